#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillpop::model::{Corpus, Hyperparameters, ModelState};
use skillpop::PseudoDocument;

pub fn hyper(k: usize, alpha: f64, beta: f64, delta: f64) -> Hyperparameters {
    Hyperparameters {
        alpha,
        beta,
        delta,
        gamma: 0.5,
        num_topics: k,
    }
}

/// Random corpus: every doc has 1..=max_len tokens and a non-empty Λ.
pub fn random_corpus(seed: u64, m: usize, s: usize, l: usize, k: usize, max_len: u32) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skill_categories: Vec<usize> = (0..s).map(|w| if w < l { w } else { rng.random_range(0..l) }).collect();
    let docs = (0..m)
        .map(|c| {
            let n_distinct = rng.random_range(1..=s.min(4));
            let mut tokens: Vec<(usize, u32)> = Vec::new();
            while tokens.len() < n_distinct {
                let w = rng.random_range(0..s);
                if !tokens.iter().any(|t| t.0 == w) {
                    tokens.push((w, rng.random_range(1..=max_len)));
                }
            }
            let mut lambda: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
            if lambda.is_empty() {
                lambda.push(rng.random_range(0..k));
            }
            PseudoDocument::new(c, tokens, lambda)
        })
        .collect();
    Corpus::from_documents(docs, skill_categories, l, k).unwrap()
}

/// Uniformly random allowed assignments.
pub fn random_assignments(corpus: &Corpus, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corpus
        .documents
        .iter()
        .map(|d| {
            (0..d.len())
                .map(|_| d.lambda[rng.random_range(0..d.lambda.len())] as u32)
                .collect()
        })
        .collect()
}

pub fn random_state(corpus: &Corpus, hp: &Hyperparameters, seed: u64) -> ModelState {
    ModelState::from_assignments(corpus, hp, &random_assignments(corpus, seed)).unwrap()
}

/// Direct evaluation of the sampling conditional of token `i` in doc `m`,
/// recounting everything from the assignment vectors with the token
/// removed. `with_category` toggles the per-document category factor.
pub fn oracle_conditional(
    corpus: &Corpus,
    hp: &Hyperparameters,
    z: &[Vec<u32>],
    m: usize,
    i: usize,
    with_category: bool,
) -> Vec<f64> {
    let k = hp.num_topics;
    let s = corpus.num_skills();
    let l = corpus.num_categories;
    let doc: Vec<usize> = corpus.documents[m].expanded().collect();
    let w = doc[i];
    let mut n_wj = vec![0.0; k];
    let mut n_j = vec![0.0; k];
    for (d, zd) in corpus.documents.iter().zip(z) {
        for (t, &zt) in d.expanded().zip(zd) {
            n_j[zt as usize] += 1.0;
            if t == w {
                n_wj[zt as usize] += 1.0;
            }
        }
    }
    let mut n_mj = vec![0.0; k];
    for &zt in &z[m] {
        n_mj[zt as usize] += 1.0;
    }
    let own = z[m][i] as usize;
    n_wj[own] -= 1.0;
    n_j[own] -= 1.0;
    n_mj[own] -= 1.0;

    let lw = corpus.skill_categories[w];
    let n_ml = doc.iter().filter(|&&t| corpus.skill_categories[t] == lw).count() as f64 - 1.0;
    let n_m = doc.len() as f64;
    let lambda = &corpus.documents[m].lambda;
    let cat = if with_category {
        (n_ml + hp.delta) / (n_m - 1.0 + l as f64 * hp.delta)
    } else {
        1.0
    };
    let mut p = vec![0.0; k];
    for &j in lambda {
        p[j] = (n_wj[j] + hp.beta) / (n_j[j] + s as f64 * hp.beta)
            * cat
            * (n_mj[j] + hp.alpha)
            / (n_m - 1.0 + hp.alpha * lambda.len() as f64);
    }
    let total: f64 = p.iter().sum();
    p.iter().map(|x| x / total).collect()
}
