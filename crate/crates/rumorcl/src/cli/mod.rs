//! Command-line driver wiring the library into reproducible runs.
//!
//! Every subcommand honours `--seed` and writes its reports (text + CSV)
//! under the output directory; re-running with the same seed reproduces the
//! CSVs byte for byte. `--config` points at a JSON document whose fields the
//! flags override. `RUMORCL_OUT_DIR` and `RUMORCL_JOBS` override the output
//! directory and the worker-thread cap.

pub mod config;
pub mod report;

use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use crate::ablation::{self, run_grid};
use crate::augment::AugmentPlanner;
use crate::centrality::{check_principles, compute_centrality, root_min_adjust, CentralityMeasure};
use crate::encoder::{load_checkpoint, save_checkpoint};
use crate::gradcheck::run_gradcheck;
use crate::stats::corpus_stats;
use crate::synth::{synth_corpus, SynthSpec};
use crate::train::{evaluate, make_splits, summarize, train};
use crate::tree::{build_corpus, parse_claims, PropagationTree};

use config::RunConfig;
use report::OutputSession;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Msg(String),
    #[error(transparent)]
    Tree(#[from] crate::tree::TreeError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error(transparent)]
    Centrality(#[from] crate::centrality::CentralityError),
    #[error(transparent)]
    Augment(#[from] crate::augment::AugmentError),
    #[error(transparent)]
    Encoder(#[from] crate::encoder::EncoderError),
    #[error(transparent)]
    Train(#[from] crate::train::TrainError),
    #[error(transparent)]
    Ablation(#[from] crate::ablation::AblationError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "rumorcl",
    version,
    about = "Centrality-guided graph contrastive learning on rumor propagation trees"
)]
pub struct Cli {
    /// JSON run-configuration file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads for parallel sections.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural statistics of a claim corpus.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Per-node centrality scores and principle checks for one claim.
    Centrality {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        claim: String,
        /// degree | betweenness | pagerank | eigenvector | katz | closeness
        #[arg(long)]
        measure: Option<String>,
        /// top_down | bottom_up | undirected
        #[arg(long)]
        direction: Option<String>,
    },
    /// Probability plans and one sampled view pair for a claim.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        claim: String,
    },
    /// Generate a synthetic corpus and its planted per-claim counts.
    Synth {
        /// separable | noisy (ignored when the config file carries a spec)
        #[arg(long, default_value = "separable")]
        preset: String,
        /// Trees per class.
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Noise-reply share for the noisy preset.
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
    },
    /// Train on one stratified split; writes checkpoint, log, and metrics.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Evaluate a checkpoint over every labelled claim in a corpus.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Cross-product sweep; axes: alpha, aug, centrality, direction.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Repeatable `axis=v1,v2,...` declarations.
        #[arg(long = "grid", required = true)]
        grids: Vec<String>,
    },
    /// Finite-difference verification of the end-to-end gradients.
    Gradcheck {
        #[arg(long, default_value_t = 3)]
        graphs: usize,
        #[arg(long, default_value_t = 10)]
        max_nodes: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
}

pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Msg)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("RUMORCL_OUT_DIR").map(PathBuf::from))
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let jobs = cli.jobs.or_else(|| {
        std::env::var("RUMORCL_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    configure_jobs(jobs);

    let mut session = OutputSession::new(&out_dir)?;
    let result = dispatch(&cli.command, &config, seed, &mut session);
    if result.is_err() {
        session.discard();
    }
    result
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: Option<usize>) {
    if let Some(jobs) = jobs {
        // Ignored when a global pool already exists (e.g. under tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(_jobs: Option<usize>) {}

fn load_trees(path: &PathBuf, config: &RunConfig) -> Result<Vec<PropagationTree>, CliError> {
    let file = File::open(path).map_err(|e| {
        CliError::Msg(format!("cannot open data file {}: {e}", path.display()))
    })?;
    let records = parse_claims(BufReader::new(file))?;
    Ok(build_corpus(&records, &config.featurizer)?)
}

fn find_claim<'a>(
    trees: &'a [PropagationTree],
    claim_id: &str,
) -> Result<&'a PropagationTree, CliError> {
    trees
        .iter()
        .find(|t| t.claim_id == claim_id)
        .ok_or_else(|| CliError::Msg(format!("claim {claim_id:?} not found in the corpus")))
}

fn dispatch(
    command: &Command,
    config: &RunConfig,
    seed: u64,
    session: &mut OutputSession,
) -> Result<(), CliError> {
    match command {
        Command::Stats { data } => {
            let trees = load_trees(data, config)?;
            let stats = corpus_stats(&trees)?;
            let text = report::stats_text(&stats);
            session.write("stats.csv", report::stats_csv(&stats).as_bytes())?;
            session.write("stats.txt", text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::Centrality {
            data,
            claim,
            measure,
            direction,
        } => {
            let trees = load_trees(data, config)?;
            let tree = find_claim(&trees, claim)?;
            let mut spec = match measure.as_deref() {
                Some(name) => CentralityMeasure::new(ablation::parse_centrality(name)?),
                None => config
                    .train
                    .augment
                    .map(|aug| aug.measure)
                    .unwrap_or_else(|| CentralityMeasure::new(crate::centrality::CentralityKind::PageRank)),
            };
            if let Some(name) = direction.as_deref() {
                spec.direction = ablation::parse_direction(name)?;
            }
            let start = Instant::now();
            let raw = compute_centrality(tree, &spec)?;
            let seconds = start.elapsed().as_secs_f64();
            let adjusted = root_min_adjust(&raw);
            let principle_report = if tree.len() >= 2 {
                Some(check_principles(tree, &adjusted)?)
            } else {
                None
            };
            let text =
                report::centrality_text(claim, &raw, &adjusted, principle_report.as_ref(), seconds);
            session.write(
                "centrality.csv",
                report::centrality_csv(claim, tree.levels(), &raw, &adjusted).as_bytes(),
            )?;
            session.write("centrality.txt", text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::Augment { data, claim } => {
            let trees = load_trees(data, config)?;
            let tree = find_claim(&trees, claim)?;
            let aug = config.train.augment.unwrap_or_default();
            let planner = AugmentPlanner::new(tree, &aug)?;
            let views = planner.views(tree, seed);
            let text = report::augment_text(claim, seed, &planner, &views);
            session.write("augment.csv", report::augment_csv(&planner).as_bytes())?;
            session.write("augment.txt", text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::Synth {
            preset,
            trees,
            noise,
        } => {
            let spec = match &config.synth {
                Some(spec) => spec.clone(),
                None => match preset.as_str() {
                    "separable" => SynthSpec::separable(*trees),
                    "noisy" => SynthSpec::noisy(*trees, *noise),
                    other => {
                        return Err(CliError::Msg(format!(
                            "unknown preset {other:?} (expected separable or noisy)"
                        )))
                    }
                },
            };
            let corpus = synth_corpus(&spec, seed)?;
            let mut jsonl = String::new();
            for record in &corpus.records {
                jsonl.push_str(
                    &serde_json::to_string(record)
                        .map_err(|e| CliError::Msg(format!("serialising corpus: {e}")))?,
                );
                jsonl.push('\n');
            }
            let ids: Vec<String> = corpus.records.iter().map(|r| r.id.clone()).collect();
            session.write("corpus.jsonl", jsonl.as_bytes())?;
            session.write("truth.csv", report::truth_csv(&ids, &corpus.truth).as_bytes())?;
            println!(
                "wrote {} claims to {}",
                corpus.records.len(),
                session.dir().join("corpus.jsonl").display()
            );
            Ok(())
        }
        Command::Train { data, split_seed } => {
            let trees = load_trees(data, config)?;
            let train_config = &config.train;
            let split_seed = split_seed
                .or_else(|| train_config.split_seeds.first().copied())
                .unwrap_or(1);
            let labels: Vec<Option<usize>> = trees.iter().map(|t| t.label).collect();
            let splits = make_splits(&labels, train_config.ratios, split_seed)?;
            let outcome = train(&trees, &splits, train_config, split_seed)?;
            let metrics = evaluate(&outcome.params, &trees, &splits.test, train_config.direction)?;

            session.write(
                "training_log.csv",
                report::training_log_csv(&outcome.log).as_bytes(),
            )?;
            let mut checkpoint = Vec::new();
            save_checkpoint(&outcome.params, &mut checkpoint)?;
            session.write("checkpoint.bin", &checkpoint)?;
            let runs = vec![(format!("split-{split_seed}"), metrics)];
            session.write("metrics.csv", report::metrics_csv(&runs, None).as_bytes())?;
            let text = report::metrics_text(&runs, None);
            session.write("metrics.txt", text.as_bytes())?;
            println!(
                "best epoch {} (val accuracy {:.4}); test:",
                outcome.best_epoch, outcome.best_val_accuracy
            );
            print!("{text}");
            Ok(())
        }
        Command::Eval { data, checkpoint } => {
            let trees = load_trees(data, config)?;
            let file = File::open(checkpoint).map_err(|e| {
                CliError::Msg(format!("cannot open checkpoint {}: {e}", checkpoint.display()))
            })?;
            let params = load_checkpoint(BufReader::new(file))?;
            let labelled: Vec<usize> = (0..trees.len())
                .filter(|&i| trees[i].label.is_some())
                .collect();
            let metrics = evaluate(&params, &trees, &labelled, config.train.direction)?;
            let runs = vec![("corpus".to_string(), metrics)];
            session.write("eval_metrics.csv", report::metrics_csv(&runs, None).as_bytes())?;
            let text = report::metrics_text(&runs, None);
            session.write("eval_metrics.txt", text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::Ablate { data, grids } => {
            let trees = load_trees(data, config)?;
            let mut axes = Vec::new();
            for grid in grids {
                let (axis, values) = grid.split_once('=').ok_or_else(|| {
                    CliError::Msg(format!("grid {grid:?} must look like axis=v1,v2"))
                })?;
                let values: Vec<String> = values.split(',').map(str::to_string).collect();
                if values.is_empty() || values.iter().any(String::is_empty) {
                    return Err(CliError::Msg(format!("grid {grid:?} has empty values")));
                }
                axes.push((axis.to_string(), values));
            }
            let cells = run_grid(&trees, &config.train, &axes, seed)?;
            let axis_names: Vec<String> = axes.iter().map(|(name, _)| name.clone()).collect();
            session.write("ablate.csv", report::ablate_csv(&axis_names, &cells).as_bytes())?;
            let text = report::ablate_text(&cells);
            session.write("ablate.txt", text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::Gradcheck {
            graphs,
            max_nodes,
            step,
        } => {
            let tolerance = 1e-4;
            let gc = run_gradcheck(seed, *graphs, *max_nodes, *step)?;
            session.write("gradcheck.csv", report::gradcheck_csv(&gc).as_bytes())?;
            let text = report::gradcheck_text(&gc, tolerance);
            session.write("gradcheck.txt", text.as_bytes())?;
            print!("{text}");
            if !gc.passes(tolerance) {
                return Err(CliError::Msg(format!(
                    "gradient check failed: worst relative error {:.3e}",
                    gc.worst
                )));
            }
            Ok(())
        }
    }
}

/// Aggregated evaluation over several split seeds; exposed for reuse in the
/// acceptance suite and benchmarks.
pub fn aggregate_runs(
    trees: &[PropagationTree],
    config: &crate::train::TrainConfig,
) -> Result<crate::train::MetricSummary, crate::train::TrainError> {
    let summary = crate::ablation::evaluate_config(trees, config)?;
    Ok(summarize(&summary.per_split))
}
