//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use passgi_core::{apply_individual, parse_individual, summarize, FitnessValue};

use crate::backend::{BackendKind, FitnessCache};
use crate::config::ExperimentConfig;
use crate::error::Error;
use crate::experiment::{self, Inputs, TrialOutcome, TEST_LABEL};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "passgi", version, about = "Evolve patches over a compiler optimization pass sequence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run all trials of an experiment and write its artifacts.
    Evolve(RunArgs),
    /// Same as `evolve`, forcing the simulated backend.
    Simulate(RunArgs),
    /// Apply a patch file to a baseline and print the resulting sequence.
    Apply {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        individual: PathBuf,
        /// Defaults to the built-in catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Measure the baseline sequence's fitness.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        backend: Option<BackendKind>,
    },
    /// Summary statistics over a summary.json or a list of improvements.
    Stats { input: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed; trial i uses seed + i. Replaces any explicit seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<BackendKind>,
}

impl RunArgs {
    /// Loads the config file and applies flag overrides on top.
    pub fn effective_config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(t) = self.trials {
            cfg.experiment.trials = t;
            if cfg.experiment.seeds.as_ref().is_some_and(|s| s.len() != t) {
                cfg.experiment.seeds = None;
            }
        }
        if let Some(s) = self.seed {
            cfg.ga.rng_seed = s;
            cfg.experiment.seeds = None;
        }
        if let Some(d) = &self.output_dir {
            cfg.experiment.output_dir = d.clone();
        }
        if let Some(b) = self.backend {
            cfg.backend.kind = b;
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Error> {
    match cli.command {
        Command::Evolve(args) => cmd_evolve(args.effective_config()?, out),
        Command::Simulate(args) => {
            let mut cfg = args.effective_config()?;
            cfg.backend.kind = BackendKind::Simulated;
            cmd_evolve(cfg, out)
        }
        Command::Apply { baseline, individual, catalog } => cmd_apply(&baseline, &individual, catalog.as_deref(), out),
        Command::Baseline { config, backend } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(b) = backend {
                cfg.backend.kind = b;
            }
            cmd_baseline(&cfg, out)
        }
        Command::Stats { input } => cmd_stats(&input, out),
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

pub fn cmd_evolve(cfg: ExperimentConfig, out: &mut dyn Write) -> Result<(), Error> {
    let report = experiment::run_trials(&cfg)?;
    for o in &report.outcomes {
        match o {
            TrialOutcome::Completed(t) => writeln!(
                out,
                "trial {:>2}  seed {:<6} baseline {:.6}s  best {:.6}s  improvement {:+.3}%",
                t.trial_index, t.seed, t.baseline_fitness, t.best_fitness, t.percent_improvement
            ),
            TrialOutcome::Failed { trial_index, reason, .. } => writeln!(out, "trial {trial_index:>2}  FAILED: {reason}"),
        }
        .map_err(io_out)?;
    }
    match (&report.summary, &report.summary_error) {
        (Some(s), _) => writeln!(
            out,
            "n = {}  mean improvement = {:.4}% ± {:.4}  t = {:.4}  p = {:.3e} ({TEST_LABEL})",
            s.n, s.mean_improvement, s.sample_stddev, s.t_statistic, s.p_value_one_tailed
        ),
        (None, Some(e)) => writeln!(out, "no t-test: {e}"),
        (None, None) => Ok(()),
    }
    .map_err(io_out)?;
    writeln!(out, "artifacts written to {}", cfg.experiment.output_dir.display()).map_err(io_out)?;
    if report.completed().count() == 0 {
        return Err(Error::AllTrialsFailed(report.outcomes.len()));
    }
    Ok(())
}

pub fn cmd_apply(baseline: &Path, individual: &Path, catalog: Option<&Path>, out: &mut dyn Write) -> Result<(), Error> {
    let catalog = experiment::load_catalog_file(catalog)?;
    let base = experiment::load_sequence_file(Some(baseline), &catalog)?;
    let text = fs::read_to_string(individual).map_err(|e| Error::io(individual, e))?;
    let ind = parse_individual(&text, &catalog).map_err(|source| Error::Patch { path: individual.into(), source })?;
    out.write_all(apply_individual(&base, &ind).to_text().as_bytes()).map_err(io_out)
}

pub fn cmd_baseline(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), Error> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    let evaluator = experiment::make_evaluator(cfg, &inputs, Arc::new(FitnessCache::new()));
    let rec = evaluator.evaluate(&inputs.baseline);
    match rec.fitness() {
        FitnessValue::Measured(mean) => {
            writeln!(out, "baseline: {} passes ({})", inputs.baseline.len(), inputs.baseline.label).map_err(io_out)?;
            writeln!(out, "runs: {}", rec.runs).map_err(io_out)?;
            writeln!(out, "mean: {mean}").map_err(io_out)?;
            writeln!(out, "sample_stddev: {}", rec.sample_stddev).map_err(io_out)
        }
        FitnessValue::Penalty => {
            Err(Error::BaselineFailed { status: rec.status.to_string(), diagnostics: rec.diagnostics.clone() })
        }
    }
}

pub fn cmd_stats(input: &Path, out: &mut dyn Write) -> Result<(), Error> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let values = report::parse_improvements(&text)?;
    let s = summarize(&values)?;
    writeln!(out, "n: {}", s.n).map_err(io_out)?;
    writeln!(out, "mean: {}", s.mean_improvement).map_err(io_out)?;
    writeln!(out, "stddev: {}", s.sample_stddev).map_err(io_out)?;
    writeln!(out, "t: {}", s.t_statistic).map_err(io_out)?;
    writeln!(out, "p_one_tailed: {:e}", s.p_value_one_tailed).map_err(io_out)?;
    writeln!(out, "test: {TEST_LABEL}").map_err(io_out)
}
