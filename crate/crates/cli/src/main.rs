mod artifact;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "skillpop", version, about = "Rank job skills by popularity under job criteria")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse postings against the dictionary and report what was kept.
    Ingest,
    /// Build the skill co-occurrence network and its pseudo-documents.
    BuildNet,
    /// Train a model (or a baseline) and write it to the model path.
    Train {
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Train on the output of `synth` instead of postings.
        #[arg(long)]
        synthetic: Option<PathBuf>,
    },
    /// Top-k skills under a set of criteria, as CSV on stdout.
    Rank {
        /// Criteria as `category=value` slugs or label indices.
        #[arg(long, value_delimiter = ',', required = true)]
        criteria: Vec<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Held-out log-likelihood of one or more artifacts.
    Eval {
        /// Held-out postings.
        #[arg(long, conflicts_with = "synthetic")]
        test: Option<PathBuf>,
        /// Further artifacts to evaluate beside the model path.
        #[arg(long, value_delimiter = ',')]
        compare: Vec<PathBuf>,
        /// Split a `synth` output 80/20 and compare SPTM, LLDA and frequency.
        #[arg(long)]
        synthetic: Option<PathBuf>,
    },
    /// Skill scores of resumes and their correlation with HR scores.
    ScoreResumes {
        #[arg(long)]
        resumes: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        criteria: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        compare: Vec<PathBuf>,
    },
    /// Generate a synthetic corpus with its ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Llda,
    Frequency,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use skillpop::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::EmptyCorpus => 3,
                Error::UnknownLabel(_) | Error::LabelUnseen(_) => 4,
                Error::EmptyTestSet => 5,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = RunConfig::resolve(&cli.overrides).and_then(|cfg| match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::BuildNet => commands::build_net(&cfg),
        Command::Train { baseline, synthetic } => commands::train(&cfg, baseline, synthetic.as_deref()),
        Command::Rank { criteria, k } => commands::rank(&cfg, &criteria, k),
        Command::Eval {
            test,
            compare,
            synthetic,
        } => match synthetic {
            Some(dir) => commands::eval_synthetic(&cfg, &dir),
            None => commands::eval(&cfg, test.as_deref(), &compare),
        },
        Command::ScoreResumes {
            resumes,
            criteria,
            compare,
        } => commands::score_resumes(&cfg, &resumes, &criteria, &compare),
        Command::Synth { out } => commands::synth(&cfg, &out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
