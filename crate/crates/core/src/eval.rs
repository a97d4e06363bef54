//! Topic quality (VM/CM over expert judgments), resume skill scores, and
//! rank correlation with a significance test.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::corpus::{SkillDictionary, SkillId};
use crate::error::{Error, Result};
use crate::model::{rank_scores, TrainedModel};

/// Top `k` skills of a topic by `P(w, l_w | z = topic)`.
pub fn top_k_skills(model: &TrainedModel, topic: usize, k: usize) -> Result<Vec<(SkillId, f64)>> {
    if topic >= model.num_topics() {
        return Err(Error::TopicOutOfRange {
            topic,
            num_topics: model.num_topics(),
        });
    }
    let scores: Vec<f64> = (0..model.num_skills())
        .map(|w| model.topic_skill_posterior(w, topic))
        .collect::<Result<_>>()?;
    let mut ranked = rank_scores(&scores);
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub judge_id: String,
    pub topic_id: usize,
    pub skill: String,
    pub relevant: u8,
}

/// All judgments of one judge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgmentFile {
    pub judge_id: String,
    pub rows: Vec<Judgment>,
}

/// Reads `judge_id,topic_id,skill,relevant` rows, grouped by judge in order
/// of first appearance.
pub fn read_judgments<R: Read>(reader: R) -> Result<Vec<JudgmentFile>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut files: Vec<JudgmentFile> = Vec::new();
    for (i, row) in rdr.deserialize::<Judgment>().enumerate() {
        let row = row?;
        if row.relevant > 1 {
            return Err(Error::MalformedRecord {
                line: i + 2,
                reason: format!("relevant must be 0 or 1, got {}", row.relevant),
            });
        }
        match files.iter_mut().find(|f| f.judge_id == row.judge_id) {
            Some(f) => f.rows.push(row),
            None => files.push(JudgmentFile {
                judge_id: row.judge_id.clone(),
                rows: vec![row],
            }),
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeScore {
    pub judge_id: String,
    pub topics: usize,
    pub valid_topics: usize,
    pub skills: usize,
    pub relevant_skills: usize,
    pub vm: f64,
    pub cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmCmReport {
    pub per_judge: Vec<JudgeScore>,
    pub mean_vm: f64,
    pub mean_cm: f64,
}

/// Validity measure (share of topics with at least `validity_threshold`
/// relevant skills out of `k`) and coherence measure (share of relevant
/// skills), per judge and averaged over judges.
pub fn vm_cm(files: &[JudgmentFile], k: usize, validity_threshold: usize) -> Result<VmCmReport> {
    if files.is_empty() {
        return Err(Error::IncompleteJudgments("no judgments".into()));
    }
    let mut per_judge = Vec::with_capacity(files.len());
    for file in files {
        let mut topics: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for row in &file.rows {
            let entry = topics.entry(row.topic_id).or_default();
            entry.0 += 1;
            entry.1 += row.relevant as usize;
        }
        if let Some((t, (n, _))) = topics.iter().find(|(_, (n, _))| *n != k) {
            return Err(Error::IncompleteJudgments(format!(
                "judge {} rated {n} skills for topic {t}, expected {k}",
                file.judge_id
            )));
        }
        let valid = topics.values().filter(|(_, r)| *r >= validity_threshold).count();
        let relevant: usize = topics.values().map(|(_, r)| r).sum();
        let skills = topics.len() * k;
        per_judge.push(JudgeScore {
            judge_id: file.judge_id.clone(),
            topics: topics.len(),
            valid_topics: valid,
            skills,
            relevant_skills: relevant,
            vm: valid as f64 / topics.len() as f64,
            cm: relevant as f64 / skills as f64,
        });
    }
    let n = per_judge.len() as f64;
    let mean_vm = per_judge.iter().map(|j| j.vm).sum::<f64>() / n;
    let mean_cm = per_judge.iter().map(|j| j.cm).sum::<f64>() / n;
    Ok(VmCmReport {
        per_judge,
        mean_vm,
        mean_cm,
    })
}

/// A resume with its skills resolved against the dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredResume {
    pub resume_id: String,
    pub hr_score: u8,
    pub skills: Vec<SkillId>,
    pub unknown_skills: usize,
}

#[derive(Deserialize)]
struct ResumeRecord {
    resume_id: serde_json::Value,
    hr_score: u8,
    #[serde(default)]
    skills: Vec<String>,
}

/// Reads line-delimited `{resume_id, hr_score, skills: [name]}` records.
pub fn read_resumes<R: BufRead>(reader: R, dict: &SkillDictionary) -> Result<Vec<ScoredResume>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ResumeRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if rec.hr_score > 3 {
            return Err(Error::MalformedRecord {
                line: i + 1,
                reason: format!("hr_score must be 0..=3, got {}", rec.hr_score),
            });
        }
        let resume_id = match rec.resume_id {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        let mut skills = Vec::new();
        let mut unknown = 0;
        for name in &rec.skills {
            match dict.lookup(name) {
                Some(id) => skills.push(id),
                None => unknown += 1,
            }
        }
        out.push(ScoredResume {
            resume_id,
            hr_score: rec.hr_score,
            skills,
            unknown_skills: unknown,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResumeScore {
    pub score: f64,
    /// Mentions outside the model's skill range, which contribute nothing.
    pub unknown: usize,
}

/// `Σ_w |w| · popularity(w | criteria)` over a skill multiset.
pub fn resume_skill_score(model: &TrainedModel, skills: &[SkillId], criteria: &[usize]) -> Result<ResumeScore> {
    let scores = model.popularity_scores(criteria)?;
    Ok(score_with(&scores, skills))
}

/// Same sum against a precomputed per-skill score vector.
pub fn score_with(scores: &[f64], skills: &[SkillId]) -> ResumeScore {
    let mut total = 0.0;
    let mut unknown = 0;
    for &w in skills {
        match scores.get(w) {
            Some(s) => total += s,
            None => unknown += 1,
        }
    }
    ResumeScore {
        score: total,
        unknown,
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput("need at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::DegenerateInput("NaN in input".into()));
    }
    Ok(())
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Number of pairs tied within runs of equal values of a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// Merge sort that returns the number of inversions (strictly greater
/// element before a smaller one).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k2 = k + mid - i;
    buf[k2..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm), tie-corrected on
/// both sides.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ties_x = tied_pairs(&xs);
    let ties_xy = tied_pairs(&pairs);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let ties_y = tied_pairs(&ys);

    let n0 = n * (n - 1) / 2;
    let denom_x = n0 - ties_x;
    let denom_y = n0 - ties_y;
    if denom_x == 0 || denom_y == 0 {
        return Err(Error::DegenerateInput("all values tied".into()));
    }
    // concordant - discordant
    let numerator = n0 as i64 - ties_x as i64 - ties_y as i64 + ties_xy as i64 - 2 * swaps as i64;
    Ok(numerator as f64 / ((denom_x as f64) * (denom_y as f64)).sqrt())
}

/// Normal-approximation z statistic of Kendall's tau:
/// `3 τ √(n(n−1)) / √(2(2n+5))`.
pub fn tau_z_test(tau: f64, n: usize) -> f64 {
    let n = n as f64;
    3.0 * tau * (n * (n - 1.0)).sqrt() / (2.0 * (2.0 * n + 5.0)).sqrt()
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub model: String,
    pub spearman: Option<f64>,
    pub kendall_tau: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

impl CorrelationRow {
    /// Correlates skill scores with HR scores. Degenerate inputs produce a
    /// row of missing values rather than an error.
    pub fn compute(model: &str, skill_scores: &[f64], hr_scores: &[f64]) -> Result<Self> {
        let rho = match spearman(skill_scores, hr_scores) {
            Ok(r) => Some(r),
            Err(Error::DegenerateInput(_)) => None,
            Err(e) => return Err(e),
        };
        let tau = match kendall_tau(skill_scores, hr_scores) {
            Ok(t) => Some(t),
            Err(Error::DegenerateInput(_)) => None,
            Err(e) => return Err(e),
        };
        let z = tau.map(|t| tau_z_test(t, skill_scores.len()));
        Ok(CorrelationRow {
            model: model.to_string(),
            spearman: rho,
            kendall_tau: tau,
            z,
            p: z.map(two_sided_p),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.kendall_tau.is_none() || self.spearman.is_none()
    }
}

/// CSV `model,spearman,kendall_tau,z,p`; missing values print as `NA`.
pub fn write_correlation_report<W: Write>(mut out: W, rows: &[CorrelationRow]) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    writeln!(out, "model,spearman,kendall_tau,z,p")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.model,
            fmt(r.spearman),
            fmt(r.kendall_tau),
            fmt(r.z),
            r.p.map_or_else(|| "NA".to_string(), |x| format!("{x:.6e}"))
        )?;
    }
    Ok(())
}

/// Seeded shuffle of `0..n` into (train, test) index sets, each sorted.
/// The test set gets `round(n * test_fraction)` items.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64 * test_fraction).round() as usize).min(n);
    let mut test = idx.split_off(n - n_test);
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}
