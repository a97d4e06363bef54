//! Skill popularity modeling over job postings.
//!
//! Pipeline: parse postings against a categorical skill dictionary
//! ([`corpus`]), build the skill co-occurrence network and its
//! pseudo-documents ([`skillnet`]), train the label-masked topic model by
//! collapsed Gibbs sampling ([`model`]), then rank skills under any set of
//! job criteria. [`baselines`], [`eval`] and [`synth`] provide comparison
//! methods, evaluation metrics and a generative oracle.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod persist;
pub mod skillnet;
pub mod synth;
pub mod taxonomy;

pub use corpus::{JobPosting, SkillDictionary, SkillId};
pub use error::{Error, Result};
pub use model::{Corpus, Hyperparameters, ModelState, TrainConfig, TrainedModel};
pub use skillnet::{MultiplicityMode, PseudoDocument, SkillNet};
pub use taxonomy::{CriteriaCategory, CriteriaLabel, NUM_LABELS};
