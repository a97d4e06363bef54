use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};
use skillpop::model::{Hyperparameters, TrainConfig};
use skillpop::synth::SynthSpec;
use skillpop::MultiplicityMode;

/// Everything a run needs. Loaded from a TOML file, then overridden field by
/// field from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub postings: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub model: PathBuf,
    pub reports: PathBuf,

    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,

    pub max_iters: usize,
    pub tol: f64,
    pub burn_in: usize,
    pub seed: u64,

    pub multiplicity_mode: MultiplicityMode,
    pub min_support: u32,

    pub num_topics: usize,
    pub num_skills: usize,
    pub num_categories: usize,
    pub num_docs: usize,
    pub tokens_per_doc: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = Hyperparameters::default();
        let tc = TrainConfig::default();
        RunConfig {
            postings: None,
            dictionary: None,
            model: PathBuf::from("model.sptm"),
            reports: PathBuf::from("reports"),
            alpha: hp.alpha,
            beta: hp.beta,
            delta: hp.delta,
            gamma: hp.gamma,
            max_iters: tc.max_iters,
            tol: tc.tol,
            burn_in: tc.burn_in,
            seed: tc.seed,
            multiplicity_mode: MultiplicityMode::default(),
            min_support: 1,
            num_topics: 6,
            num_skills: 120,
            num_categories: 6,
            num_docs: 200,
            tokens_per_doc: 100,
        }
    }
}

/// Command-line overrides, one per config field.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub postings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dictionary: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true)]
    pub reports: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub multiplicity_mode: Option<MultiplicityMode>,
    #[arg(long, global = true)]
    pub min_support: Option<u32>,
    #[arg(long, global = true)]
    pub num_topics: Option<usize>,
    #[arg(long, global = true)]
    pub num_skills: Option<usize>,
    #[arg(long, global = true)]
    pub num_categories: Option<usize>,
    #[arg(long, global = true)]
    pub num_docs: Option<usize>,
    #[arg(long, global = true)]
    pub tokens_per_doc: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match &overrides.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = overrides.$field.clone() {
                    cfg.$field = v.into();
                }
            )*};
        }
        take!(postings, dictionary, model, reports, alpha, beta, delta, gamma, max_iters, tol, burn_in, seed);
        take!(multiplicity_mode, min_support, num_topics, num_skills, num_categories, num_docs, tokens_per_doc);
        Ok(cfg)
    }

    pub fn hyperparameters(&self, num_topics: usize) -> Hyperparameters {
        Hyperparameters {
            alpha: self.alpha,
            beta: self.beta,
            delta: self.delta,
            gamma: self.gamma,
            num_topics,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            burn_in: self.burn_in,
            seed: self.seed,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec::new(self.num_skills, self.num_categories, self.num_docs, self.tokens_per_doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "alpha = 0.2\nseed = 3\nmultiplicity_mode = \"binary\"\n").unwrap();
        let overrides = Overrides {
            config: Some(path),
            seed: Some(9),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(&overrides).unwrap();
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.multiplicity_mode, MultiplicityMode::Binary);
        assert_eq!(cfg.max_iters, 800);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "alhpa = 0.2\n").unwrap();
        let overrides = Overrides {
            config: Some(path),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(&overrides).is_err());
    }
}
