//! Forward sampler for the generative story of the model, keeping the true
//! parameters so trained models can be checked against them.
//!
//! Per topic and category a skill distribution φ is drawn over that
//! category's skills. Per document: label presence Λ ~ Bernoulli(γ) (redrawn
//! until at least one label is on), a category mixture π ~ Dir(δ), a topic
//! mixture θ ~ Dir(α) over the allowed topics, then for every token a topic
//! z ~ θ, a category l ~ π and a skill w ~ φ[z][l].

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::corpus::SkillId;
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, TrainedModel};
use crate::skillnet::PseudoDocument;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_skills: usize,
    pub num_categories: usize,
    pub num_docs: usize,
    pub tokens_per_doc: usize,
    /// Skill → category. Defaults to contiguous, evenly sized blocks.
    pub partition: Option<Vec<usize>>,
}

impl SynthSpec {
    pub fn new(num_skills: usize, num_categories: usize, num_docs: usize, tokens_per_doc: usize) -> Self {
        SynthSpec {
            num_skills,
            num_categories,
            num_docs,
            tokens_per_doc,
            partition: None,
        }
    }

    fn skill_categories(&self) -> Result<Vec<usize>> {
        let (s, l) = (self.num_skills, self.num_categories);
        let categories = match &self.partition {
            Some(p) => {
                if p.len() != s {
                    return Err(Error::InvalidDims(format!(
                        "partition has {} entries for {s} skills",
                        p.len()
                    )));
                }
                p.clone()
            }
            None => (0..s).map(|i| i * l / s).collect(),
        };
        for c in 0..l {
            if !categories.contains(&c) {
                return Err(Error::InvalidDims(format!("category {c} has no skills")));
            }
        }
        if let Some(&c) = categories.iter().find(|&&c| c >= l) {
            return Err(Error::InvalidDims(format!("category {c} out of range (L = {l})")));
        }
        Ok(categories)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthToken {
    pub skill: SkillId,
    pub category: usize,
    pub topic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub num_topics: usize,
    pub num_categories: usize,
    pub skill_categories: Vec<usize>,
    /// Skills of each category, ascending.
    pub category_members: Vec<Vec<SkillId>>,
    /// `phi[k][l][i]`: probability of `category_members[l][i]` under topic
    /// `k` and category `l`.
    pub phi: Vec<Vec<Vec<f64>>>,
    /// Per-document topic mixture, zero outside the allowed topics.
    pub theta: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<usize>>,
    /// Tokens in generation order.
    pub tokens: Vec<Vec<TruthToken>>,
}

impl GroundTruth {
    pub fn num_skills(&self) -> usize {
        self.skill_categories.len()
    }

    /// `φ[k][l_s](s)`.
    pub fn phi_skill(&self, k: usize, s: SkillId) -> f64 {
        let l = self.skill_categories[s];
        let pos = self.category_members[l]
            .binary_search(&s)
            .expect("skill listed in its category");
        self.phi[k][l][pos]
    }

    /// Expected category mix of topic `k` tokens: `Σ_m N_m θ_mk π_ml`,
    /// normalized over categories. Uniform if the topic is never used.
    pub fn topic_category_mix(&self, k: usize) -> Vec<f64> {
        let l = self.num_categories;
        let mut mix = vec![0.0; l];
        for (m, tokens) in self.tokens.iter().enumerate() {
            let weight = tokens.len() as f64 * self.theta[m][k];
            for (c, slot) in mix.iter_mut().enumerate() {
                *slot += weight * self.pi[m][c];
            }
        }
        let total: f64 = mix.iter().sum();
        if total > 0.0 {
            mix.iter_mut().for_each(|x| *x /= total);
        } else {
            mix.iter_mut().for_each(|x| *x = 1.0 / l as f64);
        }
        mix
    }

    /// Distribution over all skills induced by topic `k`:
    /// `φ[k][l_w](w)` weighted by the topic's category mix.
    pub fn topic_skill_distribution(&self, k: usize) -> Vec<f64> {
        let mix = self.topic_category_mix(k);
        (0..self.num_skills())
            .map(|s| self.phi_skill(k, s) * mix[self.skill_categories[s]])
            .collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}

/// Dirichlet draw computed in log space so tiny concentrations do not
/// underflow to an all-zero vector.
pub fn sample_dirichlet<R: Rng>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            // Gamma(a) = Gamma(a + 1) * U^(1/a)
            let g = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / a
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logs.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

fn sample_categorical<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, &pi) in p.iter().enumerate() {
        u -= pi;
        if u < 0.0 {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Samples a corpus of pseudo-documents and the parameters behind it.
/// Document `m` has central skill id `m` and draws from its own ChaCha
/// stream, so output is a pure function of the seed.
pub fn generate_corpus(
    hyper: &Hyperparameters,
    spec: &SynthSpec,
    seed: u64,
) -> Result<(Vec<PseudoDocument>, GroundTruth)> {
    hyper
        .validate()
        .map_err(|e| Error::InvalidDims(e.to_string()))?;
    let k = hyper.num_topics;
    if spec.num_docs == 0 || spec.tokens_per_doc == 0 {
        return Err(Error::InvalidDims("need at least one document and one token".into()));
    }
    if spec.num_categories == 0 || spec.num_skills < spec.num_categories {
        return Err(Error::InvalidDims(format!(
            "{} skills cannot fill {} categories",
            spec.num_skills, spec.num_categories
        )));
    }
    let skill_categories = spec.skill_categories()?;
    let l = spec.num_categories;
    let mut members = vec![Vec::new(); l];
    for (s, &c) in skill_categories.iter().enumerate() {
        members[c].push(s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|_| {
            members
                .iter()
                .map(|m| sample_dirichlet(&vec![hyper.beta; m.len()], &mut rng))
                .collect()
        })
        .collect();

    let mut docs = Vec::with_capacity(spec.num_docs);
    let mut truth = GroundTruth {
        num_topics: k,
        num_categories: l,
        skill_categories,
        category_members: members,
        phi,
        theta: Vec::with_capacity(spec.num_docs),
        pi: Vec::with_capacity(spec.num_docs),
        lambda: Vec::with_capacity(spec.num_docs),
        tokens: Vec::with_capacity(spec.num_docs),
    };

    for m in 0..spec.num_docs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64 + 1);

        let lambda: Vec<usize> = loop {
            let on: Vec<usize> = (0..k).filter(|_| rng.random::<f64>() < hyper.gamma).collect();
            if !on.is_empty() {
                break on;
            }
        };
        let pi = sample_dirichlet(&vec![hyper.delta; l], &mut rng);
        let support_theta = sample_dirichlet(&vec![hyper.alpha; lambda.len()], &mut rng);
        let mut theta = vec![0.0; k];
        for (&j, &p) in lambda.iter().zip(&support_theta) {
            theta[j] = p;
        }

        let mut counts = vec![0u32; truth.num_skills()];
        let mut tokens = Vec::with_capacity(spec.tokens_per_doc);
        for _ in 0..spec.tokens_per_doc {
            let topic = lambda[sample_categorical(&support_theta, &mut rng)];
            let category = sample_categorical(&pi, &mut rng);
            let pos = sample_categorical(&truth.phi[topic][category], &mut rng);
            let skill = truth.category_members[category][pos];
            counts[skill] += 1;
            tokens.push(TruthToken {
                skill,
                category,
                topic,
            });
        }
        let doc_tokens = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| (s, c))
            .collect();
        docs.push(PseudoDocument::new(m, doc_tokens, lambda.clone()));
        truth.theta.push(theta);
        truth.pi.push(pi);
        truth.lambda.push(lambda);
        truth.tokens.push(tokens);
    }
    Ok((docs, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    /// Total-variation distance per topic.
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// Compares each topic's normalized skill factor with the true skill
/// distribution of the same topic. Topics are identified by their labels,
/// so no matching step is needed.
pub fn recovery_error(model: &TrainedModel, truth: &GroundTruth) -> Result<RecoveryReport> {
    if model.num_topics() != truth.num_topics || model.num_skills() != truth.num_skills() {
        return Err(Error::DimMismatch(format!(
            "model has K={}, S={}; truth has K={}, S={}",
            model.num_topics(),
            model.num_skills(),
            truth.num_topics,
            truth.num_skills()
        )));
    }
    let per_topic: Vec<f64> = (0..truth.num_topics)
        .map(|j| {
            let target = truth.topic_skill_distribution(j);
            let fitted: Vec<f64> = (0..model.num_skills())
                .map(|w| model.skill_given_topic(w, j).expect("in range"))
                .collect();
            total_variation(&target, &fitted)
        })
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(RecoveryReport { per_topic, mean })
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
