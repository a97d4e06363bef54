use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use skillpop::baselines::FrequencyTable;
use skillpop::model::{LabeledBag, Vocabulary};
use skillpop::{persist, CriteriaLabel, Error, SkillDictionary, SkillId, TrainedModel};

/// Frequency baseline as stored on disk: one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyArtifact {
    pub kind: String,
    pub vocabulary: Option<Vocabulary>,
    pub table: FrequencyTable,
}

impl FrequencyArtifact {
    pub const KIND: &'static str = "frequency";

    pub fn new(table: FrequencyTable, vocabulary: Option<Vocabulary>) -> Self {
        FrequencyArtifact {
            kind: Self::KIND.to_string(),
            vocabulary,
            table,
        }
    }
}

/// Anything that can score skills under a criteria set.
#[derive(Debug, Clone)]
pub enum Artifact {
    Model(Box<TrainedModel>),
    Frequency(FrequencyArtifact),
}

impl Artifact {
    /// Loads a model file or frequency artifact. With a dictionary, model
    /// files must have been trained against it.
    pub fn load(path: &Path, dict: Option<&SkillDictionary>) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if bytes.starts_with(b"skillpop-model") {
            let model = match dict {
                Some(d) => persist::deserialize_for(&bytes, d),
                None => persist::deserialize(&bytes),
            }
            .with_context(|| format!("loading {}", path.display()))?;
            return Ok(Artifact::Model(Box::new(model)));
        }
        let freq: FrequencyArtifact = serde_json::from_slice(&bytes)
            .map_err(|e| Error::CorruptModel(format!("{}: {e}", path.display())))?;
        if freq.kind != FrequencyArtifact::KIND {
            return Err(Error::CorruptModel(format!("{}: unknown artifact kind {}", path.display(), freq.kind)).into());
        }
        if let (Some(d), Some(v)) = (dict, &freq.vocabulary) {
            if v.dictionary_hash != d.content_hash() {
                return Err(Error::VersionMismatch(format!(
                    "{} was built with dictionary {}, current dictionary is {}",
                    path.display(),
                    v.dictionary_hash,
                    d.content_hash()
                ))
                .into());
            }
        }
        Ok(Artifact::Frequency(freq))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Artifact::Model(m) => m.meta.variant.name(),
            Artifact::Frequency(_) => FrequencyArtifact::KIND,
        }
    }

    pub fn num_labels(&self) -> usize {
        match self {
            Artifact::Model(m) => m.num_topics(),
            Artifact::Frequency(f) => f.table.num_labels(),
        }
    }

    fn vocabulary(&self) -> Option<&Vocabulary> {
        match self {
            Artifact::Model(m) => m.vocabulary.as_ref(),
            Artifact::Frequency(f) => f.vocabulary.as_ref(),
        }
    }

    pub fn skill_name(&self, s: SkillId) -> String {
        match self {
            Artifact::Model(m) => m.skill_name(s),
            Artifact::Frequency(_) => self
                .vocabulary()
                .and_then(|v| v.skill_names.get(s).cloned())
                .unwrap_or_else(|| format!("s{s}")),
        }
    }

    pub fn skill_category(&self, s: SkillId) -> String {
        match self {
            Artifact::Model(m) => m.skill_category_name(s),
            Artifact::Frequency(_) => self
                .vocabulary()
                .and_then(|v| v.skill_categories.get(s).and_then(|&l| v.category_names.get(l).cloned()))
                .unwrap_or_default(),
        }
    }

    /// Ranking scores. The frequency baseline reports raw per-label
    /// frequencies, so labels with no postings are an error and unseen
    /// skills score zero.
    pub fn rank_scores(&self, criteria: &[usize]) -> skillpop::Result<Vec<f64>> {
        match self {
            Artifact::Model(m) => m.popularity_scores(criteria),
            Artifact::Frequency(f) => {
                for &k in criteria {
                    if k < f.table.num_labels() && f.table.counts[k].is_empty() {
                        return Err(Error::LabelUnseen(label_name(k)));
                    }
                }
                f.table.smoothed_scores(criteria, 0.0)
            }
        }
    }

    /// Scores with a positive floor everywhere, for likelihoods and resume
    /// scoring. The frequency baseline is smoothed with `smoothing`.
    pub fn smoothed_scores(&self, criteria: &[usize], smoothing: f64) -> skillpop::Result<Vec<f64>> {
        match self {
            Artifact::Model(m) => m.popularity_scores(criteria),
            Artifact::Frequency(f) => f.table.smoothed_scores(criteria, smoothing),
        }
    }

    pub fn held_out_log_likelihood(&self, items: &[LabeledBag], smoothing: f64) -> skillpop::Result<f64> {
        match self {
            Artifact::Model(m) => m.held_out_log_likelihood(items),
            Artifact::Frequency(f) => f.table.held_out_log_likelihood(items, smoothing),
        }
    }
}

fn label_name(k: usize) -> String {
    CriteriaLabel::from_index(k).map_or_else(|| format!("label {k}"), |l| l.slug())
}

/// Resolves criteria arguments to label indices. Each entry is either a
/// `category=value` slug or a bare label index (useful for synthetic
/// models, whose labels have no names).
pub fn parse_criteria(args: &[String], num_labels: usize) -> skillpop::Result<Vec<usize>> {
    if args.is_empty() {
        return Err(Error::UnknownLabel("no criteria given (e.g. salary=very_high)".into()));
    }
    let mut out = Vec::with_capacity(args.len());
    for raw in args {
        let arg = raw.trim();
        let k = match arg.parse::<usize>() {
            Ok(k) => k,
            Err(_) => arg.parse::<CriteriaLabel>()?.index(),
        };
        if k >= num_labels {
            return Err(Error::UnknownLabel(format!("{arg}: model has {num_labels} labels")));
        }
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out.sort_unstable();
    Ok(out)
}
