//! Skill popularity topic model: collapsed Gibbs training over pseudo-documents,
//! topic-skill posteriors, and criteria-conditioned popularity.
//!
//! Every topic is bound to exactly one criteria label (topic `k` ↔ label `k`).
//! A document may only use the topics its label vector allows. Each token
//! carries an observed skill category fixed by the dictionary, so the
//! per-document category factor of the sampling conditional is constant in
//! the topic and drops out after normalization.

use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::{JobPosting, SkillDictionary, SkillId};
use crate::error::{Error, Result};
use crate::skillnet::PseudoDocument;
use crate::taxonomy::NUM_LABELS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Symmetric Dirichlet prior on per-document topic mixtures.
    pub alpha: f64,
    /// Symmetric Dirichlet prior on topic-skill distributions.
    pub beta: f64,
    /// Symmetric Dirichlet prior on per-document category mixtures.
    pub delta: f64,
    /// Bernoulli rate of label presence. Only the synthetic generator uses it.
    pub gamma: f64,
    pub num_topics: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            alpha: 0.01,
            beta: 0.01,
            delta: 1.0,
            gamma: 0.01,
            num_topics: NUM_LABELS,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidHyperparameters(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("delta", self.delta)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidHyperparameters(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.num_topics == 0 {
            return Err(Error::InvalidHyperparameters("num_topics must be >= 1".into()));
        }
        Ok(())
    }
}

/// Documents plus everything about the skill space the sampler needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<PseudoDocument>,
    /// `l_s` for every skill id.
    pub skill_categories: Vec<usize>,
    pub num_categories: usize,
    /// `P(Λ_k)` for every label, used by popularity ranking.
    pub label_priors: Vec<f64>,
}

impl Corpus {
    pub fn new(
        documents: Vec<PseudoDocument>,
        skill_categories: Vec<usize>,
        num_categories: usize,
        label_priors: Vec<f64>,
    ) -> Result<Self> {
        if let Some(&l) = skill_categories.iter().find(|&&l| l >= num_categories) {
            return Err(Error::InvalidDims(format!(
                "category {l} out of range (L = {num_categories})"
            )));
        }
        for d in &documents {
            if d.is_empty() {
                return Err(Error::InvalidDims(format!(
                    "document for skill {} has no tokens",
                    d.central_skill
                )));
            }
            if d.lambda.is_empty() {
                return Err(Error::InvalidDims(format!(
                    "document for skill {} has an empty label vector",
                    d.central_skill
                )));
            }
            if let Some(&(s, _)) = d.tokens.iter().find(|t| t.0 >= skill_categories.len()) {
                return Err(Error::UnknownSkill(s));
            }
        }
        Ok(Corpus {
            documents,
            skill_categories,
            num_categories,
            label_priors,
        })
    }

    /// Corpus over a real dictionary, with label priors taken from the
    /// fraction of postings carrying each label.
    pub fn from_postings(
        documents: Vec<PseudoDocument>,
        dict: &SkillDictionary,
        postings: &[JobPosting],
    ) -> Result<Self> {
        Self::new(
            documents,
            dict.skill_categories(),
            dict.num_categories(),
            posting_label_priors(postings),
        )
    }

    /// Corpus whose label priors are the fraction of documents allowing
    /// each topic. Used where no postings exist (synthetic data).
    pub fn from_documents(
        documents: Vec<PseudoDocument>,
        skill_categories: Vec<usize>,
        num_categories: usize,
        num_topics: usize,
    ) -> Result<Self> {
        let mut priors = vec![0.0; num_topics];
        for d in &documents {
            for &k in &d.lambda {
                if k < num_topics {
                    priors[k] += 1.0;
                }
            }
        }
        let m = documents.len().max(1) as f64;
        priors.iter_mut().for_each(|p| *p /= m);
        Self::new(documents, skill_categories, num_categories, priors)
    }

    pub fn num_skills(&self) -> usize {
        self.skill_categories.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(PseudoDocument::len).sum()
    }

    /// The same corpus with every skill in one category.
    pub fn erase_categories(&self) -> Corpus {
        Corpus {
            documents: self.documents.clone(),
            skill_categories: vec![0; self.skill_categories.len()],
            num_categories: 1,
            label_priors: self.label_priors.clone(),
        }
    }
}

/// Fraction of postings carrying each of the 23 labels.
pub fn posting_label_priors(postings: &[JobPosting]) -> Vec<f64> {
    let mut counts = [0.0; NUM_LABELS];
    for p in postings {
        for l in p.labels.iter() {
            counts[l.index()] += 1.0;
        }
    }
    let n = postings.len().max(1) as f64;
    counts.iter().map(|c| c / n).collect()
}

/// Whether the per-document category factor enters the conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryFactor {
    Include,
    Omit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DocState {
    tokens: Vec<SkillId>,
    allowed: Vec<usize>,
    topics: Vec<u32>,
}

/// Assignment vector and count tables of one sampling chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    hyper: Hyperparameters,
    skill_categories: Vec<usize>,
    num_categories: usize,
    docs: Vec<DocState>,
    /// `n_{s,l_s,j}`, row-major by skill.
    skill_topic: Vec<u32>,
    /// `n_j`.
    topic_totals: Vec<u32>,
    /// `n_{m,j}`, row-major by document.
    doc_topic: Vec<u32>,
    /// `n_{m,l}`. Fixed by the data; assignments never move it.
    doc_category: Vec<u32>,
}

impl ModelState {
    /// Assigns each token a topic drawn uniformly from its document's
    /// allowed topics.
    pub fn initialize<R: Rng>(corpus: &Corpus, hyper: &Hyperparameters, rng: &mut R) -> Result<Self> {
        Self::build(corpus, hyper, |doc, _| {
            doc.lambda[rng.random_range(0..doc.lambda.len())] as u32
        })
    }

    /// State with caller-supplied assignments, one vector per document in
    /// expanded token order.
    pub fn from_assignments(
        corpus: &Corpus,
        hyper: &Hyperparameters,
        assignments: &[Vec<u32>],
    ) -> Result<Self> {
        if assignments.len() != corpus.documents.len() {
            return Err(Error::DimMismatch(format!(
                "{} assignment vectors for {} documents",
                assignments.len(),
                corpus.documents.len()
            )));
        }
        for (m, (a, d)) in assignments.iter().zip(&corpus.documents).enumerate() {
            if a.len() != d.len() {
                return Err(Error::DimMismatch(format!(
                    "document {m}: {} assignments for {} tokens",
                    a.len(),
                    d.len()
                )));
            }
            if let Some(&z) = a.iter().find(|&&z| !d.allows(z as usize)) {
                return Err(Error::InconsistentCounts(format!(
                    "document {m}: topic {z} is masked"
                )));
            }
        }
        Self::build(corpus, hyper, |_, (m, i)| assignments[m][i])
    }

    fn build(
        corpus: &Corpus,
        hyper: &Hyperparameters,
        mut assign: impl FnMut(&PseudoDocument, (usize, usize)) -> u32,
    ) -> Result<Self> {
        hyper.validate()?;
        if corpus.documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let k = hyper.num_topics;
        for d in &corpus.documents {
            if let Some(&t) = d.lambda.iter().find(|&&t| t >= k) {
                return Err(Error::InvalidDims(format!(
                    "label {t} on document {} exceeds K = {k}",
                    d.central_skill
                )));
            }
        }
        let s = corpus.num_skills();
        let l = corpus.num_categories;
        let m = corpus.documents.len();
        let mut state = ModelState {
            hyper: *hyper,
            skill_categories: corpus.skill_categories.clone(),
            num_categories: l,
            docs: Vec::with_capacity(m),
            skill_topic: vec![0; s * k],
            topic_totals: vec![0; k],
            doc_topic: vec![0; m * k],
            doc_category: vec![0; m * l],
        };
        for (mi, doc) in corpus.documents.iter().enumerate() {
            let tokens: Vec<SkillId> = doc.expanded().collect();
            let topics: Vec<u32> = (0..tokens.len()).map(|i| assign(doc, (mi, i))).collect();
            for (&w, &z) in tokens.iter().zip(&topics) {
                state.skill_topic[w * k + z as usize] += 1;
                state.topic_totals[z as usize] += 1;
                state.doc_topic[mi * k + z as usize] += 1;
                state.doc_category[mi * l + state.skill_categories[w]] += 1;
            }
            state.docs.push(DocState {
                tokens,
                allowed: doc.lambda.clone(),
                topics,
            });
        }
        Ok(state)
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn num_topics(&self) -> usize {
        self.hyper.num_topics
    }

    pub fn num_documents(&self) -> usize {
        self.docs.len()
    }

    pub fn num_skills(&self) -> usize {
        self.skill_categories.len()
    }

    pub fn doc_len(&self, m: usize) -> usize {
        self.docs[m].tokens.len()
    }

    /// Topic of every token, per document.
    pub fn assignments(&self) -> Vec<Vec<u32>> {
        self.docs.iter().map(|d| d.topics.clone()).collect()
    }

    pub fn doc_topic_count(&self, m: usize, j: usize) -> u32 {
        self.doc_topic[m * self.hyper.num_topics + j]
    }

    pub fn skill_topic_count(&self, s: SkillId, j: usize) -> u32 {
        self.skill_topic[s * self.hyper.num_topics + j]
    }

    pub fn topic_total(&self, j: usize) -> u32 {
        self.topic_totals[j]
    }

    /// Normalized sampling distribution of token `i` of document `m` given
    /// every other assignment. Masked topics get exactly zero.
    pub fn conditional(&self, m: usize, i: usize) -> Vec<f64> {
        self.conditional_with(m, i, CategoryFactor::Include)
    }

    pub fn conditional_with(&self, m: usize, i: usize, factor: CategoryFactor) -> Vec<f64> {
        let current = self.docs[m].topics[i] as usize;
        let mut out = vec![0.0; self.hyper.num_topics];
        let total = self.weights(m, self.docs[m].tokens[i], Some(current), factor, &mut out);
        out.iter_mut().for_each(|p| *p /= total);
        out
    }

    /// Unnormalized conditional weights written into `out` (zero for masked
    /// topics); returns their sum. With `exclude = Some(z)` the token is
    /// still counted under topic `z` and is subtracted on the fly; with
    /// `None` the caller has already removed it from the topic tables.
    fn weights(
        &self,
        m: usize,
        w: SkillId,
        exclude: Option<usize>,
        factor: CategoryFactor,
        out: &mut [f64],
    ) -> f64 {
        let k = self.hyper.num_topics;
        let (alpha, beta, delta) = (self.hyper.alpha, self.hyper.beta, self.hyper.delta);
        let doc = &self.docs[m];
        let n_m = doc.tokens.len() as f64;
        let s_beta = self.num_skills() as f64 * beta;

        let category_factor = match factor {
            CategoryFactor::Include => {
                // n_{m,l} always includes the token itself.
                let l = self.skill_categories[w];
                let n_ml = self.doc_category[m * self.num_categories + l] as f64 - 1.0;
                (n_ml + delta) / (n_m - 1.0 + self.num_categories as f64 * delta)
            }
            CategoryFactor::Omit => 1.0,
        };
        let topic_norm = n_m - 1.0 + alpha * doc.allowed.len() as f64;

        out.iter_mut().for_each(|p| *p = 0.0);
        let mut total = 0.0;
        for &j in &doc.allowed {
            let e = if exclude == Some(j) { 1.0 } else { 0.0 };
            let n_wj = self.skill_topic[w * k + j] as f64 - e;
            let n_j = self.topic_totals[j] as f64 - e;
            let n_mj = self.doc_topic[m * k + j] as f64 - e;
            let p = (n_wj + beta) / (n_j + s_beta) * category_factor * ((n_mj + alpha) / topic_norm);
            out[j] = p;
            total += p;
        }
        total
    }

    /// One systematic scan: every token in document-then-position order is
    /// removed, resampled from its conditional, and added back.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) {
        let k = self.hyper.num_topics;
        let mut buf = vec![0.0; k];
        for m in 0..self.docs.len() {
            if self.docs[m].allowed.len() == 1 {
                continue;
            }
            for i in 0..self.docs[m].tokens.len() {
                let w = self.docs[m].tokens[i];
                let old = self.docs[m].topics[i] as usize;
                self.skill_topic[w * k + old] -= 1;
                self.topic_totals[old] -= 1;
                self.doc_topic[m * k + old] -= 1;

                let total = self.weights(m, w, None, CategoryFactor::Include, &mut buf);
                let new = sample_index(&buf, &self.docs[m].allowed, total, rng);

                self.skill_topic[w * k + new] += 1;
                self.topic_totals[new] += 1;
                self.doc_topic[m * k + new] += 1;
                self.docs[m].topics[i] = new as u32;
            }
        }
    }

    /// Collapsed log joint `log P(w, l, z)` with all Dirichlet parameters
    /// integrated out.
    pub fn log_likelihood(&self) -> f64 {
        let k = self.hyper.num_topics;
        let (alpha, beta, delta) = (self.hyper.alpha, self.hyper.beta, self.hyper.delta);
        let s = self.num_skills();
        let l = self.num_categories;

        let lg_beta = ln_gamma(beta);
        let mut ll = 0.0;
        for j in 0..k {
            ll += ln_gamma(s as f64 * beta) - ln_gamma(self.topic_totals[j] as f64 + s as f64 * beta);
            for w in 0..s {
                let n = self.skill_topic[w * k + j];
                if n > 0 {
                    ll += ln_gamma(n as f64 + beta) - lg_beta;
                }
            }
        }
        let lg_alpha = ln_gamma(alpha);
        let lg_delta = ln_gamma(delta);
        for (m, doc) in self.docs.iter().enumerate() {
            let n_m = doc.tokens.len() as f64;
            let a = alpha * doc.allowed.len() as f64;
            ll += ln_gamma(a) - ln_gamma(n_m + a);
            for &j in &doc.allowed {
                let n = self.doc_topic[m * k + j];
                if n > 0 {
                    ll += ln_gamma(n as f64 + alpha) - lg_alpha;
                }
            }
            ll += ln_gamma(l as f64 * delta) - ln_gamma(n_m + l as f64 * delta);
            for c in 0..l {
                let n = self.doc_category[m * l + c];
                if n > 0 {
                    ll += ln_gamma(n as f64 + delta) - lg_delta;
                }
            }
        }
        ll
    }

    /// Recounts every table from the assignment vector and compares.
    pub fn check_consistency(&self) -> Result<()> {
        let k = self.hyper.num_topics;
        let l = self.num_categories;
        let mut skill_topic = vec![0u32; self.skill_topic.len()];
        let mut topic_totals = vec![0u32; k];
        let mut doc_topic = vec![0u32; self.doc_topic.len()];
        let mut doc_category = vec![0u32; self.doc_category.len()];
        for (m, d) in self.docs.iter().enumerate() {
            for (&w, &z) in d.tokens.iter().zip(&d.topics) {
                let z = z as usize;
                if d.allowed.binary_search(&z).is_err() {
                    return Err(Error::InconsistentCounts(format!(
                        "document {m} uses masked topic {z}"
                    )));
                }
                skill_topic[w * k + z] += 1;
                topic_totals[z] += 1;
                doc_topic[m * k + z] += 1;
                doc_category[m * l + self.skill_categories[w]] += 1;
            }
        }
        let checks = [
            ("n_wj", skill_topic == self.skill_topic),
            ("n_j", topic_totals == self.topic_totals),
            ("n_mj", doc_topic == self.doc_topic),
            ("n_ml", doc_category == self.doc_category),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(Error::InconsistentCounts(format!("{name} table differs"))),
            None => Ok(()),
        }
    }
}

fn sample_index<R: Rng>(weights: &[f64], support: &[usize], total: f64, rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * total;
    for &j in support {
        u -= weights[j];
        if u < 0.0 {
            return j;
        }
    }
    // Rounding can leave u marginally non-negative; take the last live topic.
    *support
        .iter()
        .rev()
        .find(|&&j| weights[j] > 0.0)
        .unwrap_or(&support[support.len() - 1])
}

/// Convenience wrapper: initialize from a seed.
pub fn init_state(corpus: &Corpus, hyper: &Hyperparameters, seed: u64) -> Result<ModelState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelState::initialize(corpus, hyper, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Stop once the relative change of the training log-likelihood between
    /// consecutive sweeps falls below this.
    pub tol: f64,
    /// Sweeps during which the stopping rule is not checked.
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iters: 800,
            tol: 1e-3,
            burn_in: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub sweep: usize,
    pub log_likelihood: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub state: ModelState,
    /// Sweep 0 is the initial state.
    pub log: Vec<IterationRecord>,
    pub converged: bool,
}

impl TrainingRun {
    pub fn sweeps(&self) -> usize {
        self.log.len() - 1
    }
}

/// Runs one chain to convergence or `max_iters`.
pub fn train_chain(corpus: &Corpus, hyper: &Hyperparameters, config: &TrainConfig) -> Result<TrainingRun> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ModelState::initialize(corpus, hyper, &mut rng)?;
    let mut prev = state.log_likelihood();
    let mut log = vec![IterationRecord {
        sweep: 0,
        log_likelihood: prev,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut converged = false;
    for sweep in 1..=config.max_iters {
        state.sweep(&mut rng);
        let ll = state.log_likelihood();
        log.push(IterationRecord {
            sweep,
            log_likelihood: ll,
            seconds: start.elapsed().as_secs_f64(),
        });
        let rel = ((ll - prev) / prev).abs();
        debug!("sweep {sweep}: ll = {ll:.3}, rel change = {rel:.3e}");
        prev = ll;
        if sweep > config.burn_in && rel < config.tol {
            converged = true;
            break;
        }
    }
    info!(
        "trained {} sweeps (converged: {converged}), ll = {prev:.3}",
        log.len() - 1
    );
    Ok(TrainingRun {
        state,
        log,
        converged,
    })
}

/// Trains and freezes the counts into a [`TrainedModel`].
pub fn train(corpus: &Corpus, hyper: &Hyperparameters, config: &TrainConfig) -> Result<TrainedModel> {
    let run = train_chain(corpus, hyper, config)?;
    Ok(TrainedModel::from_run(corpus, &run, config.seed))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    #[default]
    Sptm,
    /// Trained with every skill in one category.
    Llda,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Sptm => "sptm",
            ModelVariant::Llda => "llda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub variant: ModelVariant,
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub seed: u64,
    pub converged: bool,
}

/// Names for reports; optional so synthetic models need no dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub skill_names: Vec<String>,
    pub category_names: Vec<String>,
    /// Dictionary category of every skill, independent of the categories
    /// the model was trained with.
    pub skill_categories: Vec<usize>,
    pub dictionary_hash: String,
}

impl From<&SkillDictionary> for Vocabulary {
    fn from(dict: &SkillDictionary) -> Self {
        Vocabulary {
            skill_names: dict.skill_names(),
            category_names: dict.category_names().to_vec(),
            skill_categories: dict.skill_categories(),
            dictionary_hash: dict.content_hash(),
        }
    }
}

/// Frozen counts and the estimators derived from them. Immutable; safe to
/// query from many threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub hyper: Hyperparameters,
    pub skill_categories: Vec<usize>,
    pub num_categories: usize,
    /// `n_{s,l_s,j}`, row-major by skill.
    pub skill_topic: Vec<u64>,
    pub topic_totals: Vec<u64>,
    /// Corpus-level `P(l)`, δ-smoothed token share of each category.
    pub category_prior: Vec<f64>,
    /// `P(Λ_k)` per label.
    pub label_priors: Vec<f64>,
    pub central_skills: Vec<SkillId>,
    pub doc_lambda: Vec<Vec<usize>>,
    /// `n_{m,j}`, row-major by document.
    pub doc_topic: Vec<u32>,
    /// `n_{m,l}`, row-major by document.
    pub doc_category: Vec<u32>,
    pub vocabulary: Option<Vocabulary>,
    pub meta: TrainingMeta,
}

impl TrainedModel {
    pub fn from_run(corpus: &Corpus, run: &TrainingRun, seed: u64) -> Self {
        let last = run.log.last().expect("log has the initial record");
        Self::from_state(
            corpus,
            &run.state,
            TrainingMeta {
                variant: ModelVariant::Sptm,
                iterations: run.sweeps(),
                final_log_likelihood: last.log_likelihood,
                seed,
                converged: run.converged,
            },
        )
    }

    pub fn from_state(corpus: &Corpus, state: &ModelState, meta: TrainingMeta) -> Self {
        let l = state.num_categories;
        let mut category_totals = vec![0u64; l];
        for row in state.doc_category.chunks(l) {
            for (c, &n) in row.iter().enumerate() {
                category_totals[c] += n as u64;
            }
        }
        TrainedModel {
            hyper: state.hyper,
            skill_categories: state.skill_categories.clone(),
            num_categories: l,
            skill_topic: state.skill_topic.iter().map(|&n| n as u64).collect(),
            topic_totals: state.topic_totals.iter().map(|&n| n as u64).collect(),
            category_prior: category_prior(&category_totals, state.hyper.delta),
            label_priors: corpus.label_priors.clone(),
            central_skills: corpus.documents.iter().map(|d| d.central_skill).collect(),
            doc_lambda: state.docs.iter().map(|d| d.allowed.clone()).collect(),
            doc_topic: state.doc_topic.clone(),
            doc_category: state.doc_category.clone(),
            vocabulary: None,
            meta,
        }
    }

    /// A model built directly from topic-skill counts, with no documents.
    /// `category_totals` are the corpus token counts per category.
    pub fn from_counts(
        hyper: Hyperparameters,
        skill_categories: Vec<usize>,
        num_categories: usize,
        skill_topic: Vec<u64>,
        category_totals: &[u64],
        label_priors: Vec<f64>,
    ) -> Result<Self> {
        let k = hyper.num_topics;
        let s = skill_categories.len();
        if skill_topic.len() != s * k || category_totals.len() != num_categories {
            return Err(Error::DimMismatch(format!(
                "expected {s}x{k} skill-topic counts and {num_categories} category totals"
            )));
        }
        let mut topic_totals = vec![0u64; k];
        for row in skill_topic.chunks(k) {
            for (j, &n) in row.iter().enumerate() {
                topic_totals[j] += n;
            }
        }
        Ok(TrainedModel {
            hyper,
            skill_categories,
            num_categories,
            skill_topic,
            topic_totals,
            category_prior: category_prior(category_totals, hyper.delta),
            label_priors,
            central_skills: Vec::new(),
            doc_lambda: Vec::new(),
            doc_topic: Vec::new(),
            doc_category: Vec::new(),
            vocabulary: None,
            meta: TrainingMeta {
                variant: ModelVariant::Sptm,
                iterations: 0,
                final_log_likelihood: 0.0,
                seed: 0,
                converged: false,
            },
        })
    }

    pub fn with_vocabulary(mut self, vocabulary: Vocabulary) -> Self {
        self.vocabulary = Some(vocabulary);
        self
    }

    pub fn num_topics(&self) -> usize {
        self.hyper.num_topics
    }

    pub fn num_skills(&self) -> usize {
        self.skill_categories.len()
    }

    pub fn num_documents(&self) -> usize {
        self.central_skills.len()
    }

    pub fn skill_name(&self, s: SkillId) -> String {
        self.vocabulary
            .as_ref()
            .and_then(|v| v.skill_names.get(s).cloned())
            .unwrap_or_else(|| format!("s{s}"))
    }

    pub fn category_name(&self, l: usize) -> String {
        self.vocabulary
            .as_ref()
            .and_then(|v| v.category_names.get(l).cloned())
            .unwrap_or_else(|| format!("c{l}"))
    }

    /// Dictionary category name of a skill; falls back to the training
    /// category when no vocabulary is attached.
    pub fn skill_category_name(&self, s: SkillId) -> String {
        let dict_category = self.vocabulary.as_ref().and_then(|v| v.skill_categories.get(s).copied());
        match dict_category {
            Some(l) => self.category_name(l),
            None => self.category_name(self.skill_categories.get(s).copied().unwrap_or(0)),
        }
    }

    fn check(&self, w: SkillId, j: usize) -> Result<()> {
        if w >= self.num_skills() {
            return Err(Error::UnknownSkill(w));
        }
        if j >= self.num_topics() {
            return Err(Error::TopicOutOfRange {
                topic: j,
                num_topics: self.num_topics(),
            });
        }
        Ok(())
    }

    /// `(n_{w,l_w,j} + β) / Σ_s (n_{s,l_s,j} + β)`.
    pub fn skill_given_topic(&self, w: SkillId, j: usize) -> Result<f64> {
        self.check(w, j)?;
        Ok(self.skill_factor(w, j))
    }

    fn skill_factor(&self, w: SkillId, j: usize) -> f64 {
        let k = self.num_topics();
        let beta = self.hyper.beta;
        (self.skill_topic[w * k + j] as f64 + beta)
            / (self.topic_totals[j] as f64 + self.num_skills() as f64 * beta)
    }

    /// `P(w, l_w | z = j)`: the skill factor times the corpus-level category
    /// prior. Not renormalized over skills; the sum over `w` is at most 1.
    pub fn topic_skill_posterior(&self, w: SkillId, j: usize) -> Result<f64> {
        self.check(w, j)?;
        Ok(self.posterior(w, j))
    }

    fn posterior(&self, w: SkillId, j: usize) -> f64 {
        self.skill_factor(w, j) * self.category_prior[self.skill_categories[w]]
    }

    /// Label weights `P(Λ)` renormalized over the criteria set. Falls back
    /// to uniform weights if no label in the set was ever observed.
    pub fn criteria_weights(&self, criteria: &[usize]) -> Result<Vec<(usize, f64)>> {
        if criteria.is_empty() {
            return Err(Error::UnknownLabel("empty criteria set".into()));
        }
        let mut labels = criteria.to_vec();
        labels.sort_unstable();
        labels.dedup();
        if let Some(&k) = labels.iter().find(|&&k| k >= self.num_topics()) {
            return Err(Error::UnknownLabel(format!(
                "label {k} (K = {})",
                self.num_topics()
            )));
        }
        let prior = |k: usize| self.label_priors.get(k).copied().unwrap_or(0.0);
        let total: f64 = labels.iter().map(|&k| prior(k)).sum();
        Ok(if total > 0.0 {
            labels.iter().map(|&k| (k, prior(k) / total)).collect()
        } else {
            let u = 1.0 / labels.len() as f64;
            labels.iter().map(|&k| (k, u)).collect()
        })
    }

    /// Popularity score of every skill under a criteria set, indexed by
    /// skill id. Each label contributes through its bound topic.
    pub fn popularity_scores(&self, criteria: &[usize]) -> Result<Vec<f64>> {
        self.popularity_scores_with(criteria, |k| vec![(k, 1.0)])
    }

    /// As [`popularity_scores`](Self::popularity_scores) with a custom
    /// `P(z = j | Λ_k)` given as `(topic, probability)` pairs.
    pub fn popularity_scores_with<F>(&self, criteria: &[usize], binding: F) -> Result<Vec<f64>>
    where
        F: Fn(usize) -> Vec<(usize, f64)>,
    {
        let weights = self.criteria_weights(criteria)?;
        let mut scores = vec![0.0; self.num_skills()];
        for (label, p_label) in weights {
            for (j, p_topic) in binding(label) {
                if j >= self.num_topics() {
                    return Err(Error::TopicOutOfRange {
                        topic: j,
                        num_topics: self.num_topics(),
                    });
                }
                for (w, score) in scores.iter_mut().enumerate() {
                    *score += p_label * p_topic * self.posterior(w, j);
                }
            }
        }
        Ok(scores)
    }

    /// Skills ranked by popularity, descending; ties by ascending skill id.
    pub fn popularity(&self, criteria: &[usize]) -> Result<Vec<(SkillId, f64)>> {
        Ok(rank_scores(&self.popularity_scores(criteria)?))
    }

    /// Sum over items and their skill mentions of `log score(w)` under the
    /// item's own label set. Items without labels are skipped.
    pub fn held_out_log_likelihood(&self, items: &[LabeledBag]) -> Result<f64> {
        held_out_log_likelihood(items, |labels| self.popularity_scores(labels))
    }

    /// Smoothed `θ_m`: topic mixture of document `m` over its allowed topics.
    pub fn theta(&self, m: usize) -> Option<Vec<f64>> {
        let k = self.num_topics();
        let lambda = self.doc_lambda.get(m)?;
        let row = &self.doc_topic[m * k..(m + 1) * k];
        let alpha = self.hyper.alpha;
        let total: f64 = lambda.iter().map(|&j| row[j] as f64 + alpha).sum();
        let mut theta = vec![0.0; k];
        for &j in lambda {
            theta[j] = (row[j] as f64 + alpha) / total;
        }
        Some(theta)
    }

    /// Smoothed `π_m`: category mixture of document `m`.
    pub fn pi(&self, m: usize) -> Option<Vec<f64>> {
        let l = self.num_categories;
        if m >= self.doc_lambda.len() {
            return None;
        }
        let row = &self.doc_category[m * l..(m + 1) * l];
        Some(category_prior(
            &row.iter().map(|&n| n as u64).collect::<Vec<_>>(),
            self.hyper.delta,
        ))
    }
}

fn category_prior(totals: &[u64], delta: f64) -> Vec<f64> {
    let denom: f64 = totals.iter().map(|&n| n as f64 + delta).sum();
    totals.iter().map(|&n| (n as f64 + delta) / denom).collect()
}

/// Sorts `(id, score)` descending by score, ascending by id on ties.
pub fn rank_scores(scores: &[f64]) -> Vec<(SkillId, f64)> {
    let mut ranked: Vec<(SkillId, f64)> = scores.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// A bag of skill mentions with the labels under which it is scored: a
/// held-out posting, or a held-out pseudo-document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledBag {
    pub labels: Vec<usize>,
    pub skills: Vec<SkillId>,
}

impl From<&JobPosting> for LabeledBag {
    fn from(p: &JobPosting) -> Self {
        LabeledBag {
            labels: p.labels.indices(),
            skills: p.skills.clone(),
        }
    }
}

impl From<&PseudoDocument> for LabeledBag {
    fn from(d: &PseudoDocument) -> Self {
        LabeledBag {
            labels: d.lambda.clone(),
            skills: d.expanded().collect(),
        }
    }
}

/// Shared held-out scoring loop. `score` maps a label set to per-skill
/// scores; scores are cached per distinct label set.
pub fn held_out_log_likelihood<F>(items: &[LabeledBag], mut score: F) -> Result<f64>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    let mut cache: std::collections::HashMap<Vec<usize>, Vec<f64>> = Default::default();
    let mut ll = 0.0;
    let mut scored = 0usize;
    for item in items {
        if item.labels.is_empty() || item.skills.is_empty() {
            continue;
        }
        let mut key = item.labels.clone();
        key.sort_unstable();
        key.dedup();
        if !cache.contains_key(&key) {
            let s = score(&key)?;
            cache.insert(key.clone(), s);
        }
        let scores = &cache[&key];
        for &w in &item.skills {
            let p = *scores.get(w).ok_or(Error::UnknownSkill(w))?;
            ll += p.ln();
        }
        scored += 1;
    }
    if scored == 0 {
        return Err(Error::EmptyTestSet);
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hp(k: usize) -> Hyperparameters {
        Hyperparameters {
            alpha: 0.5,
            beta: 0.1,
            delta: 1.0,
            gamma: 0.5,
            num_topics: k,
        }
    }

    fn small_corpus() -> Corpus {
        let docs = vec![
            PseudoDocument::new(0, vec![(1, 3), (2, 2)], vec![0, 1]),
            PseudoDocument::new(1, vec![(0, 3), (2, 1), (3, 2)], vec![1, 2]),
            PseudoDocument::new(2, vec![(0, 2), (1, 1)], vec![2]),
            PseudoDocument::new(3, vec![(1, 2), (0, 1)], vec![0, 1, 2]),
        ];
        Corpus::from_documents(docs, vec![0, 0, 1, 1], 2, 3).unwrap()
    }

    #[test]
    fn singleton_support_initializes_to_that_topic() {
        let docs = vec![PseudoDocument::new(0, vec![(1, 5)], vec![3])];
        let corpus = Corpus::from_documents(docs, vec![0, 0], 1, 5).unwrap();
        let state = init_state(&corpus, &hp(5), 1).unwrap();
        assert_eq!(state.assignments(), vec![vec![3; 5]]);
    }

    #[test]
    fn initialization_is_seed_deterministic() {
        let c = small_corpus();
        let a = init_state(&c, &hp(3), 42).unwrap();
        let b = init_state(&c, &hp(3), 42).unwrap();
        assert_eq!(a.assignments(), b.assignments());
        a.check_consistency().unwrap();
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let c = Corpus::from_documents(Vec::new(), vec![0], 1, 2).unwrap();
        assert!(matches!(init_state(&c, &hp(2), 0), Err(Error::EmptyCorpus)));
        assert!(matches!(
            train(&c, &hp(2), &TrainConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn masked_topics_get_zero_and_rest_sums_to_one() {
        let c = small_corpus();
        let state = init_state(&c, &hp(3), 3).unwrap();
        for m in 0..state.num_documents() {
            for i in 0..state.doc_len(m) {
                let p = state.conditional(m, i);
                for (j, &pj) in p.iter().enumerate() {
                    if !c.documents[m].allows(j) {
                        assert_eq!(pj, 0.0);
                    }
                }
                assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_state_gives_equal_probabilities() {
        // Tokens [s0, s1, s1] on topics [0, 0, 1]. With token 0 removed each
        // topic holds one s1 token and one document count.
        let corpus = Corpus::from_documents(
            vec![PseudoDocument::new(0, vec![(0, 1), (1, 2)], vec![0, 1])],
            vec![0, 0],
            1,
            2,
        )
        .unwrap();
        let state = ModelState::from_assignments(&corpus, &hp(2), &[vec![0, 0, 1]]).unwrap();
        let p = state.conditional(0, 0);
        assert_eq!(p[0], 0.5);
        assert_eq!(p[1], 0.5);
    }

    #[test]
    fn sweep_keeps_counts_consistent_and_masked() {
        let c = small_corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut state = ModelState::initialize(&c, &hp(3), &mut rng).unwrap();
        for _ in 0..20 {
            state.sweep(&mut rng);
            state.check_consistency().unwrap();
            for m in 0..state.num_documents() {
                let total: u32 = (0..3).map(|j| state.doc_topic_count(m, j)).sum();
                assert_eq!(total as usize, state.doc_len(m));
                for j in 0..3 {
                    if !c.documents[m].allows(j) {
                        assert_eq!(state.doc_topic_count(m, j), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn singleton_support_sweep_is_a_no_op() {
        let docs = vec![
            PseudoDocument::new(0, vec![(1, 3)], vec![1]),
            PseudoDocument::new(1, vec![(0, 2)], vec![0]),
        ];
        let c = Corpus::from_documents(docs, vec![0, 0], 1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = ModelState::initialize(&c, &hp(2), &mut rng).unwrap();
        let before = state.assignments();
        state.sweep(&mut rng);
        assert_eq!(state.assignments(), before);
    }

    #[test]
    fn zero_iterations_keeps_initial_counts() {
        let c = small_corpus();
        let config = TrainConfig {
            max_iters: 0,
            seed: 5,
            ..Default::default()
        };
        let model = train(&c, &hp(3), &config).unwrap();
        let init = init_state(&c, &hp(3), 5).unwrap();
        assert_eq!(model.meta.iterations, 0);
        assert_eq!(model.doc_topic, init.doc_topic);
    }

    #[test]
    fn posterior_floor_for_unassigned_skill() {
        // Skill 3 is never in topic 0.
        let c = small_corpus();
        let state = ModelState::from_assignments(
            &c,
            &hp(3),
            &[vec![0; 5], vec![1; 6], vec![2; 3], vec![0; 3]],
        )
        .unwrap();
        let model = TrainedModel::from_state(
            &c,
            &state,
            TrainingMeta {
                variant: ModelVariant::Sptm,
                iterations: 0,
                final_log_likelihood: 0.0,
                seed: 0,
                converged: false,
            },
        );
        let beta = 0.1;
        let n0 = state.topic_total(0) as f64;
        let p_l = model.category_prior[1];
        let expected = beta * p_l / (4.0 * beta + n0);
        assert_relative_eq!(model.topic_skill_posterior(3, 0).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn posterior_errors() {
        let c = small_corpus();
        let model = train(&c, &hp(3), &TrainConfig { max_iters: 2, ..Default::default() }).unwrap();
        assert!(matches!(model.topic_skill_posterior(9, 0), Err(Error::UnknownSkill(9))));
        assert!(matches!(
            model.topic_skill_posterior(0, 3),
            Err(Error::TopicOutOfRange { topic: 3, .. })
        ));
        assert!(matches!(model.popularity(&[7]), Err(Error::UnknownLabel(_))));
        assert!(matches!(model.popularity(&[]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn theta_and_pi_are_distributions() {
        let c = small_corpus();
        let model = train(&c, &hp(3), &TrainConfig { max_iters: 5, ..Default::default() }).unwrap();
        for m in 0..model.num_documents() {
            let theta = model.theta(m).unwrap();
            assert_relative_eq!(theta.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for (j, &t) in theta.iter().enumerate() {
                if !c.documents[m].allows(j) {
                    assert_eq!(t, 0.0);
                }
            }
            assert_relative_eq!(model.pi(m).unwrap().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(model.theta(99).is_none());
    }

    #[test]
    fn held_out_needs_scorable_items() {
        let c = small_corpus();
        let model = train(&c, &hp(3), &TrainConfig { max_iters: 1, ..Default::default() }).unwrap();
        assert!(matches!(model.held_out_log_likelihood(&[]), Err(Error::EmptyTestSet)));
        let bag = LabeledBag { labels: vec![], skills: vec![0] };
        assert!(matches!(model.held_out_log_likelihood(&[bag]), Err(Error::EmptyTestSet)));
    }
}
