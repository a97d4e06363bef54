//! Model file and iteration log.
//!
//! A model file is four LF-terminated UTF-8 lines:
//!
//! ```text
//! skillpop-model 1
//! {"format_version":1,"num_topics":23,"num_skills":..,"num_categories":..,"num_documents":..,"seed":..,"dictionary_hash":..}
//! sha256 <hex digest of the body line, without its newline>
//! {..TrainedModel as one JSON object..}
//! ```
//!
//! The header is redundant with the body and checked against it on load.
//! Output is byte-deterministic for a given model.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SkillDictionary;
use crate::error::{Error, Result};
use crate::model::{IterationRecord, TrainedModel};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "skillpop-model";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub num_topics: usize,
    pub num_skills: usize,
    pub num_categories: usize,
    pub num_documents: usize,
    pub seed: u64,
    pub dictionary_hash: Option<String>,
}

impl ModelHeader {
    pub fn of(model: &TrainedModel) -> Self {
        ModelHeader {
            format_version: FORMAT_VERSION,
            num_topics: model.num_topics(),
            num_skills: model.num_skills(),
            num_categories: model.num_categories,
            num_documents: model.num_documents(),
            seed: model.meta.seed,
            dictionary_hash: model.vocabulary.as_ref().map(|v| v.dictionary_hash.clone()),
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn serialize(model: &TrainedModel) -> Result<Vec<u8>> {
    let header = serde_json::to_string(&ModelHeader::of(model))?;
    let body = serde_json::to_string(model)?;
    let mut out = Vec::with_capacity(body.len() + header.len() + 128);
    writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "{header}")?;
    writeln!(out, "sha256 {}", digest(body.as_bytes()))?;
    writeln!(out, "{body}")?;
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptModel(msg.into())
}

pub fn deserialize(bytes: &[u8]) -> Result<TrainedModel> {
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt("not UTF-8"))?;
    let mut lines = text.split('\n');
    let mut next = |what: &str| lines.next().ok_or_else(|| corrupt(format!("missing {what} line")));

    let magic = next("version")?;
    let version = magic
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| corrupt("not a model file"))?;
    let version: u32 = version
        .parse()
        .map_err(|_| corrupt(format!("bad version field {version:?}")))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(format!(
            "model format {version}, reader supports {FORMAT_VERSION}"
        )));
    }

    let header: ModelHeader =
        serde_json::from_str(next("header")?).map_err(|e| corrupt(format!("header: {e}")))?;
    let checksum = next("checksum")?
        .strip_prefix("sha256 ")
        .ok_or_else(|| corrupt("missing checksum"))?
        .to_string();
    let body = next("body")?;
    if digest(body.as_bytes()) != checksum {
        return Err(corrupt("checksum mismatch"));
    }
    let model: TrainedModel = serde_json::from_str(body).map_err(|e| corrupt(format!("body: {e}")))?;
    if ModelHeader::of(&model) != header {
        return Err(corrupt("header disagrees with body"));
    }
    validate(&model)?;
    Ok(model)
}

fn validate(model: &TrainedModel) -> Result<()> {
    let (k, s, l, m) = (
        model.num_topics(),
        model.num_skills(),
        model.num_categories,
        model.num_documents(),
    );
    let ok = model.skill_topic.len() == s * k
        && model.topic_totals.len() == k
        && model.category_prior.len() == l
        && model.label_priors.len() == k
        && model.doc_lambda.len() == m
        && (model.doc_topic.is_empty() || model.doc_topic.len() == m * k)
        && (model.doc_category.is_empty() || model.doc_category.len() == m * l)
        && model.skill_categories.iter().all(|&c| c < l);
    if !ok {
        return Err(corrupt("table dimensions disagree"));
    }
    Ok(())
}

/// Loads a model and checks that it was trained against `dict`.
pub fn deserialize_for(bytes: &[u8], dict: &SkillDictionary) -> Result<TrainedModel> {
    let model = deserialize(bytes)?;
    let expected = dict.content_hash();
    match model.vocabulary.as_ref().map(|v| v.dictionary_hash.as_str()) {
        Some(h) if h == expected => Ok(model),
        Some(h) => Err(Error::VersionMismatch(format!(
            "model was trained with dictionary {h}, current dictionary is {expected}"
        ))),
        None => Err(Error::VersionMismatch("model carries no dictionary hash".into())),
    }
}

pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    deserialize(&bytes)
}

/// CSV `sweep,log_likelihood,seconds`.
pub fn write_iteration_log<W: Write>(mut out: W, log: &[IterationRecord]) -> Result<()> {
    writeln!(out, "sweep,log_likelihood,seconds")?;
    for r in log {
        writeln!(out, "{},{},{:.6}", r.sweep, r.log_likelihood, r.seconds)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparameters, Vocabulary};

    fn model() -> TrainedModel {
        let hyper = Hyperparameters {
            num_topics: 2,
            ..Hyperparameters::default()
        };
        TrainedModel::from_counts(hyper, vec![0, 0, 1], 2, vec![3, 0, 1, 2, 0, 5], &[6, 5], vec![0.4, 0.6])
            .unwrap()
            .with_vocabulary(Vocabulary {
                skill_names: vec!["a".into(), "b".into(), "c".into()],
                category_names: vec!["x".into(), "y".into()],
                skill_categories: vec![0, 0, 1],
                dictionary_hash: "abc".into(),
            })
    }

    #[test]
    fn round_trip_is_lossless_and_stable() {
        let m = model();
        let bytes = serialize(&m).unwrap();
        let back = deserialize(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(serialize(&back).unwrap(), bytes);
        assert!(bytes.starts_with(b"skillpop-model 1\n"));
    }

    #[test]
    fn tampering_is_detected() {
        let bytes = serialize(&model()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let tampered = text.replace("\"skill_topic\":[3,", "\"skill_topic\":[4,");
        assert_ne!(tampered, text);
        assert!(matches!(deserialize(tampered.as_bytes()), Err(Error::CorruptModel(_))));

        let mut lines: Vec<&str> = text.split('\n').collect();
        let bad_sum = format!("sha256 {}", "0".repeat(64));
        lines[2] = &bad_sum;
        assert!(matches!(deserialize(lines.join("\n").as_bytes()), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn foreign_version_is_rejected() {
        let text = String::from_utf8(serialize(&model()).unwrap()).unwrap();
        let v2 = text.replacen("skillpop-model 1", "skillpop-model 2", 1);
        assert!(matches!(deserialize(v2.as_bytes()), Err(Error::VersionMismatch(_))));
        assert!(matches!(deserialize(b"hello"), Err(Error::CorruptModel(_))));
    }
}
