use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::{info, warn};
use skillpop::baselines::FrequencyTable;
use skillpop::corpus::{parse_postings_path, write_postings, ParseReport};
use skillpop::eval::{read_resumes, score_with, split_indices, write_correlation_report, CorrelationRow};
use skillpop::model::{rank_scores, train_chain, LabeledBag, ModelVariant, TrainingRun, Vocabulary};
use skillpop::skillnet::{make_documents, read_documents, write_documents, DocumentReport};
use skillpop::synth::{generate_corpus, recovery_error, GroundTruth};
use skillpop::{persist, Corpus, Error, JobPosting, PseudoDocument, SkillDictionary, SkillNet, TrainedModel, NUM_LABELS};

use crate::artifact::{parse_criteria, Artifact, FrequencyArtifact};
use crate::config::RunConfig;
use crate::Baseline;

const DOCUMENTS_FILE: &str = "documents.jsonl";
const TRUTH_FILE: &str = "truth.json";

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    path.as_deref().with_context(|| format!("--{flag} is required"))
}

fn load_dictionary(cfg: &RunConfig) -> anyhow::Result<SkillDictionary> {
    let path = required(&cfg.dictionary, "dictionary")?;
    SkillDictionary::from_csv_path(path).with_context(|| format!("reading dictionary {}", path.display()))
}

fn optional_dictionary(cfg: &RunConfig) -> anyhow::Result<Option<SkillDictionary>> {
    cfg.dictionary.as_ref().map(|_| load_dictionary(cfg)).transpose()
}

fn load_postings(path: &Path, dict: &SkillDictionary) -> anyhow::Result<(Vec<JobPosting>, ParseReport)> {
    let (postings, report) =
        parse_postings_path(path, dict).with_context(|| format!("reading postings {}", path.display()))?;
    if report.malformed > 0 {
        warn!("{}: skipped {} malformed records", path.display(), report.malformed);
    }
    Ok((postings, report))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn report_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.reports.join(name)
}

/// Writes CSV rows to a report file and echoes them to stdout.
fn emit_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let render = || -> anyhow::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    };
    let bytes = render()?;
    if let Some(path) = path {
        let mut out = create(path)?;
        out.write_all(&bytes)?;
        out.flush()?;
    }
    std::io::stdout().write_all(&bytes)?;
    Ok(())
}

pub fn ingest(cfg: &RunConfig) -> anyhow::Result<()> {
    let dict = load_dictionary(cfg)?;
    let path = required(&cfg.postings, "postings")?;
    let (postings, report) = load_postings(path, &dict)?;
    let mut out = create(&report_path(cfg, "postings.jsonl"))?;
    write_postings(&mut out, &postings, &dict)?;
    out.flush()?;
    let dropped = report.dropped_no_skills + report.malformed;
    if report.parsed == 0 && report.records > 0 {
        warn!("no usable postings in {}", path.display());
    }
    emit_csv(
        Some(&report_path(cfg, "ingest.csv")),
        &["records", "parsed", "dropped", "dropped_no_skills", "malformed", "unknown_skill_names"],
        &[vec![
            report.records.to_string(),
            report.parsed.to_string(),
            dropped.to_string(),
            report.dropped_no_skills.to_string(),
            report.malformed.to_string(),
            report.unknown_skill_names.to_string(),
        ]],
    )
}

struct Network {
    dict: SkillDictionary,
    postings: Vec<JobPosting>,
    net: SkillNet,
    docs: Vec<PseudoDocument>,
    report: DocumentReport,
}

fn build_network(cfg: &RunConfig) -> anyhow::Result<Network> {
    let dict = load_dictionary(cfg)?;
    let (postings, _) = load_postings(required(&cfg.postings, "postings")?, &dict)?;
    let net = SkillNet::build(&postings);
    let (docs, report) = make_documents(&net, &postings, cfg.multiplicity_mode, cfg.min_support);
    info!(
        "skill network: {} nodes, {} edges; {} documents ({} isolated, {} without labels)",
        net.num_nodes(),
        net.num_edges(),
        report.documents,
        report.isolated,
        report.zero_lambda
    );
    Ok(Network {
        dict,
        postings,
        net,
        docs,
        report,
    })
}

pub fn build_net(cfg: &RunConfig) -> anyhow::Result<()> {
    let n = build_network(cfg)?;
    let mut edges = create(&report_path(cfg, "skillnet.csv"))?;
    n.net.write_edge_list(&mut edges)?;
    edges.flush()?;
    let mut docs = create(&report_path(cfg, DOCUMENTS_FILE))?;
    write_documents(&mut docs, &n.docs)?;
    docs.flush()?;
    emit_csv(
        Some(&report_path(cfg, "documents.csv")),
        &["nodes", "edges", "documents", "isolated", "zero_lambda"],
        &[vec![
            n.net.num_nodes().to_string(),
            n.net.num_edges().to_string(),
            n.report.documents.to_string(),
            n.report.isolated.to_string(),
            n.report.zero_lambda.to_string(),
        ]],
    )
}

fn read_synthetic(dir: &Path) -> anyhow::Result<(Vec<PseudoDocument>, GroundTruth)> {
    let docs_path = dir.join(DOCUMENTS_FILE);
    let file = File::open(&docs_path).with_context(|| format!("reading {}", docs_path.display()))?;
    let docs = read_documents(BufReader::new(file)).with_context(|| format!("reading {}", docs_path.display()))?;
    let truth_path = dir.join(TRUTH_FILE);
    let file = File::open(&truth_path).with_context(|| format!("reading {}", truth_path.display()))?;
    let truth = GroundTruth::read_json(BufReader::new(file)).with_context(|| format!("reading {}", truth_path.display()))?;
    Ok((docs, truth))
}

fn synthetic_corpus(docs: Vec<PseudoDocument>, truth: &GroundTruth) -> skillpop::Result<Corpus> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Corpus::from_documents(docs, truth.skill_categories.clone(), truth.num_categories, truth.num_topics)
}

fn fit(cfg: &RunConfig, corpus: &Corpus, num_topics: usize, variant: ModelVariant) -> anyhow::Result<(TrainedModel, TrainingRun)> {
    let hyper = cfg.hyperparameters(num_topics);
    let config = cfg.train_config();
    let corpus = match variant {
        ModelVariant::Sptm => corpus.clone(),
        ModelVariant::Llda => corpus.erase_categories(),
    };
    let run = train_chain(&corpus, &hyper, &config)?;
    let mut model = TrainedModel::from_run(&corpus, &run, config.seed);
    model.meta.variant = variant;
    Ok((model, run))
}

fn save_frequency(cfg: &RunConfig, artifact: &FrequencyArtifact) -> anyhow::Result<()> {
    let mut out = create(&cfg.model)?;
    serde_json::to_writer(&mut out, artifact)?;
    out.write_all(b"\n")?;
    out.flush()?;
    info!("wrote frequency table to {}", cfg.model.display());
    Ok(())
}

fn save_model(cfg: &RunConfig, model: &TrainedModel, run: &TrainingRun) -> anyhow::Result<()> {
    let mut out = create(&cfg.model)?;
    out.write_all(&persist::serialize(model)?)?;
    out.flush()?;
    let mut log = create(&report_path(cfg, "iterations.csv"))?;
    persist::write_iteration_log(&mut log, &run.log)?;
    log.flush()?;
    println!(
        "{} model: {} sweeps, converged {}, log-likelihood {}",
        model.meta.variant.name(),
        model.meta.iterations,
        model.meta.converged,
        model.meta.final_log_likelihood
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, baseline: Option<Baseline>, synthetic: Option<&Path>) -> anyhow::Result<()> {
    let variant = match baseline {
        Some(Baseline::Llda) => ModelVariant::Llda,
        _ => ModelVariant::Sptm,
    };
    if let Some(dir) = synthetic {
        let (docs, truth) = read_synthetic(dir)?;
        if baseline == Some(Baseline::Frequency) {
            let bags: Vec<LabeledBag> = docs.iter().map(LabeledBag::from).collect();
            let table = FrequencyTable::build(&bags, truth.num_topics, truth.num_skills())?;
            return save_frequency(cfg, &FrequencyArtifact::new(table, None));
        }
        let corpus = synthetic_corpus(docs, &truth)?;
        let (model, run) = fit(cfg, &corpus, truth.num_topics, variant)?;
        save_model(cfg, &model, &run)?;
        let recovery = recovery_error(&model, &truth)?;
        let mut rows: Vec<Vec<String>> = recovery
            .per_topic
            .iter()
            .enumerate()
            .map(|(j, tv)| vec![j.to_string(), tv.to_string()])
            .collect();
        rows.push(vec!["mean".into(), recovery.mean.to_string()]);
        return emit_csv(Some(&report_path(cfg, "recovery.csv")), &["topic", "tv_distance"], &rows);
    }

    let n = build_network(cfg)?;
    if n.postings.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    let vocabulary = Vocabulary::from(&n.dict);
    if baseline == Some(Baseline::Frequency) {
        let bags: Vec<LabeledBag> = n.postings.iter().map(LabeledBag::from).collect();
        let table = FrequencyTable::build(&bags, NUM_LABELS, n.dict.num_skills())?;
        return save_frequency(cfg, &FrequencyArtifact::new(table, Some(vocabulary)));
    }
    if n.docs.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    let corpus = Corpus::from_postings(n.docs, &n.dict, &n.postings)?;
    let (model, run) = fit(cfg, &corpus, NUM_LABELS, variant)?;
    save_model(cfg, &model.with_vocabulary(vocabulary), &run)
}

pub fn rank(cfg: &RunConfig, criteria: &[String], k: usize) -> anyhow::Result<()> {
    let dict = optional_dictionary(cfg)?;
    let artifact = Artifact::load(&cfg.model, dict.as_ref())?;
    let labels = parse_criteria(criteria, artifact.num_labels())?;
    let scores = artifact.rank_scores(&labels)?;
    let rows: Vec<Vec<String>> = rank_scores(&scores)
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .take(k)
        .enumerate()
        .map(|(i, (s, score))| {
            vec![
                (i + 1).to_string(),
                artifact.skill_name(s),
                artifact.skill_category(s),
                score.to_string(),
            ]
        })
        .collect();
    emit_csv(None, &["rank", "skill", "category", "score"], &rows)
}

fn load_artifacts(cfg: &RunConfig, compare: &[PathBuf], dict: Option<&SkillDictionary>) -> anyhow::Result<Vec<Artifact>> {
    std::iter::once(&cfg.model)
        .chain(compare)
        .map(|p| Artifact::load(p, dict))
        .collect()
}

fn scorable(items: &[LabeledBag]) -> usize {
    items.iter().filter(|b| !b.labels.is_empty() && !b.skills.is_empty()).count()
}

fn held_out_rows(artifacts: &[(String, Artifact)], items: &[LabeledBag], smoothing: f64) -> anyhow::Result<Vec<Vec<String>>> {
    let n = scorable(items);
    if n == 0 {
        return Err(Error::EmptyTestSet.into());
    }
    artifacts
        .iter()
        .map(|(name, a)| {
            let ll = a.held_out_log_likelihood(items, smoothing)?;
            Ok(vec![name.clone(), n.to_string(), ll.to_string()])
        })
        .collect()
}

pub fn eval(cfg: &RunConfig, test: Option<&Path>, compare: &[PathBuf]) -> anyhow::Result<()> {
    let Some(test) = test else {
        bail!("--test or --synthetic is required");
    };
    let dict = load_dictionary(cfg)?;
    let artifacts = load_artifacts(cfg, compare, Some(&dict))?;
    let (postings, _) = load_postings(test, &dict)?;
    let items: Vec<LabeledBag> = postings.iter().map(LabeledBag::from).collect();
    let named: Vec<(String, Artifact)> = artifacts.into_iter().map(|a| (a.name().to_string(), a)).collect();
    let rows = held_out_rows(&named, &items, cfg.beta)?;
    emit_csv(Some(&report_path(cfg, "heldout.csv")), &["model", "items", "log_likelihood"], &rows)
}

/// Splits a synthetic corpus 80/20 by document, fits all three methods on
/// the training part and scores the held-out part.
pub fn eval_synthetic(cfg: &RunConfig, dir: &Path) -> anyhow::Result<()> {
    let (docs, truth) = read_synthetic(dir)?;
    let (train_idx, test_idx) = split_indices(docs.len(), 0.2, cfg.seed);
    let train_docs: Vec<PseudoDocument> = train_idx.iter().map(|&i| docs[i].clone()).collect();
    let test: Vec<LabeledBag> = test_idx.iter().map(|&i| LabeledBag::from(&docs[i])).collect();
    let train_bags: Vec<LabeledBag> = train_docs.iter().map(LabeledBag::from).collect();
    let corpus = synthetic_corpus(train_docs, &truth)?;
    let k = truth.num_topics;
    let (sptm, _) = fit(cfg, &corpus, k, ModelVariant::Sptm)?;
    let (llda, _) = fit(cfg, &corpus, k, ModelVariant::Llda)?;
    let table = FrequencyTable::build(&train_bags, k, truth.num_skills())?;
    let artifacts = vec![
        ("sptm".to_string(), Artifact::Model(Box::new(sptm))),
        ("llda".to_string(), Artifact::Model(Box::new(llda))),
        ("frequency".to_string(), Artifact::Frequency(FrequencyArtifact::new(table, None))),
    ];
    let rows = held_out_rows(&artifacts, &test, cfg.beta)?;
    emit_csv(Some(&report_path(cfg, "heldout.csv")), &["model", "items", "log_likelihood"], &rows)
}

pub fn score_resumes(cfg: &RunConfig, resumes: &Path, criteria: &[String], compare: &[PathBuf]) -> anyhow::Result<()> {
    let dict = load_dictionary(cfg)?;
    let artifacts = load_artifacts(cfg, compare, Some(&dict))?;
    let file = File::open(resumes).with_context(|| format!("reading {}", resumes.display()))?;
    let resumes = read_resumes(BufReader::new(file), &dict)?;
    if resumes.is_empty() {
        return Err(Error::EmptyTestSet.into());
    }
    let hr: Vec<f64> = resumes.iter().map(|r| f64::from(r.hr_score)).collect();

    let mut score_rows = Vec::new();
    let mut correlations = Vec::new();
    for artifact in &artifacts {
        let labels = parse_criteria(criteria, artifact.num_labels())?;
        let scores = artifact.smoothed_scores(&labels, cfg.beta)?;
        let mut skill_scores = Vec::with_capacity(resumes.len());
        for r in &resumes {
            let s = score_with(&scores, &r.skills);
            skill_scores.push(s.score);
            score_rows.push(vec![
                r.resume_id.clone(),
                r.hr_score.to_string(),
                artifact.name().to_string(),
                s.score.to_string(),
                (r.unknown_skills + s.unknown).to_string(),
            ]);
        }
        let row = CorrelationRow::compute(artifact.name(), &skill_scores, &hr)?;
        if row.is_degenerate() {
            warn!("{}: correlation undefined (constant scores or HR scores)", artifact.name());
        }
        correlations.push(row);
    }

    let path = report_path(cfg, "resume_scores.csv");
    let mut out = create(&path)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
    w.write_record(["resume_id", "hr_score", "model", "skill_score", "unknown_skills"])?;
    for r in &score_rows {
        w.write_record(r)?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;

    let mut report = Vec::new();
    write_correlation_report(&mut report, &correlations)?;
    let mut out = create(&report_path(cfg, "correlation.csv"))?;
    out.write_all(&report)?;
    out.flush()?;
    std::io::stdout().write_all(&report)?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let hyper = cfg.hyperparameters(cfg.num_topics);
    let (docs, truth) = generate_corpus(&hyper, &cfg.synth_spec(), cfg.seed)?;
    let mut w = create(&out.join(DOCUMENTS_FILE))?;
    write_documents(&mut w, &docs)?;
    w.flush()?;
    let mut w = create(&out.join(TRUTH_FILE))?;
    truth.write_json(&mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    println!(
        "wrote {} documents over {} skills, {} topics, {} categories to {}",
        docs.len(),
        truth.num_skills(),
        truth.num_topics,
        truth.num_categories,
        out.display()
    );
    Ok(())
}
