//! Comparison methods: per-label skill frequency, and Labeled-LDA realized
//! as the single-category case of the main sampler.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::SkillId;
use crate::error::{Error, Result};
use crate::model::{
    self, rank_scores, Corpus, Hyperparameters, LabeledBag, ModelVariant, TrainConfig, TrainedModel,
};

/// Per-label normalized skill mention counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub num_skills: usize,
    /// `counts[k]`: skill → mentions over postings carrying label `k`.
    pub counts: Vec<BTreeMap<SkillId, u64>>,
    /// Fraction of training items carrying each label.
    pub label_priors: Vec<f64>,
}

impl FrequencyTable {
    pub fn build(items: &[LabeledBag], num_labels: usize, num_skills: usize) -> Result<Self> {
        let mut counts = vec![BTreeMap::new(); num_labels];
        let mut carriers = vec![0.0; num_labels];
        for item in items {
            for &k in &item.labels {
                if k >= num_labels {
                    return Err(Error::UnknownLabel(format!("label {k} (K = {num_labels})")));
                }
                carriers[k] += 1.0;
                for &w in &item.skills {
                    if w >= num_skills {
                        return Err(Error::UnknownSkill(w));
                    }
                    *counts[k].entry(w).or_insert(0) += 1;
                }
            }
        }
        let n = items.len().max(1) as f64;
        Ok(FrequencyTable {
            num_skills,
            counts,
            label_priors: carriers.iter().map(|c| c / n).collect(),
        })
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    /// Conditional probabilities of the skills seen under `label`, ranked
    /// descending with ties by ascending skill id.
    pub fn ranking(&self, label: usize) -> Result<Vec<(SkillId, f64)>> {
        let row = self
            .counts
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(format!("label {label}")))?;
        let total: u64 = row.values().sum();
        if total == 0 {
            return Err(Error::LabelUnseen(format!("label {label}")));
        }
        let mut ranked: Vec<(SkillId, f64)> = row
            .iter()
            .map(|(&s, &c)| (s, c as f64 / total as f64))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    /// Per-skill score under a criteria set, with each label's frequencies
    /// add-`smoothing` smoothed so held-out skills keep a positive floor.
    pub fn smoothed_scores(&self, criteria: &[usize], smoothing: f64) -> Result<Vec<f64>> {
        if criteria.is_empty() {
            return Err(Error::UnknownLabel("empty criteria set".into()));
        }
        if let Some(&k) = criteria.iter().find(|&&k| k >= self.num_labels()) {
            return Err(Error::UnknownLabel(format!("label {k}")));
        }
        let total_prior: f64 = criteria.iter().map(|&k| self.label_priors[k]).sum();
        let weight = |k: usize| {
            if total_prior > 0.0 {
                self.label_priors[k] / total_prior
            } else {
                1.0 / criteria.len() as f64
            }
        };
        let s = self.num_skills as f64;
        let mut scores = vec![0.0; self.num_skills];
        for &k in criteria {
            let row = &self.counts[k];
            let total: u64 = row.values().sum();
            let denom = total as f64 + s * smoothing;
            let wk = weight(k);
            for (w, score) in scores.iter_mut().enumerate() {
                let c = row.get(&w).copied().unwrap_or(0) as f64;
                *score += wk * (c + smoothing) / denom;
            }
        }
        Ok(scores)
    }

    pub fn held_out_log_likelihood(&self, items: &[LabeledBag], smoothing: f64) -> Result<f64> {
        model::held_out_log_likelihood(items, |labels| self.smoothed_scores(labels, smoothing))
    }
}

/// Ranked skills for one label by normalized mention frequency.
pub fn frequency_popularity(
    items: &[LabeledBag],
    label: usize,
    num_labels: usize,
    num_skills: usize,
) -> Result<Vec<(SkillId, f64)>> {
    FrequencyTable::build(items, num_labels, num_skills)?.ranking(label)
}

/// Labeled-LDA: the same sampler, labels, priors and schedule, with every
/// skill placed in one category so category structure plays no part.
pub fn llda_train(corpus: &Corpus, hyper: &Hyperparameters, config: &TrainConfig) -> Result<TrainedModel> {
    let mut model = model::train(&corpus.erase_categories(), hyper, config)?;
    model.meta.variant = ModelVariant::Llda;
    Ok(model)
}

/// Scores from an LLDA model, ranked like [`TrainedModel::popularity`].
pub fn llda_popularity(model: &TrainedModel, criteria: &[usize]) -> Result<Vec<(SkillId, f64)>> {
    Ok(rank_scores(&model.popularity_scores(criteria)?))
}
