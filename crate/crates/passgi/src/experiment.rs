//! Repeated evolution trials against one baseline, plus the summary
//! statistics across trials.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use passgi_core::{
    apply_individual, evolve_batched, load_catalog, load_sequence, percent_improvement, search_space_order,
    serialize_individual, summarize, EvolutionHistory, FitnessValue, GAConfig, Individual, PassCatalog,
    PassSequence, SimModel, StatsError, SummaryStats,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{BackendKind, EvaluationRecord, Evaluator, FitnessCache};
use crate::builtin;
use crate::config::ExperimentConfig;
use crate::error::Error;
use crate::report;

pub const TEST_LABEL: &str = "one-tailed, H0: mean improvement = 0, H1: > 0";

/// Catalog, baseline, and (for the simulated backend) the hidden target.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub catalog: PassCatalog,
    pub baseline: PassSequence,
    pub sim: Option<SimModel>,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_catalog_file(path: Option<&Path>) -> Result<PassCatalog, Error> {
    match path {
        None => Ok(builtin::catalog()),
        Some(p) => {
            let mut c = load_catalog(&read(p)?).map_err(|source| Error::Catalog { path: p.into(), source })?;
            c.source_label = p.display().to_string();
            Ok(c)
        }
    }
}

pub fn load_sequence_file(path: Option<&Path>, catalog: &PassCatalog) -> Result<PassSequence, Error> {
    match path {
        None => builtin::baseline(catalog).map_err(|source| Error::Catalog { path: builtin::BASELINE_LABEL.into(), source }),
        Some(p) => {
            let mut s = load_sequence(&read(p)?, catalog).map_err(|source| Error::Catalog { path: p.into(), source })?;
            s.label = p.display().to_string();
            Ok(s)
        }
    }
}

impl Inputs {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, Error> {
        let catalog = load_catalog_file(cfg.experiment.catalog_path.as_deref())?;
        let baseline = load_sequence_file(cfg.experiment.baseline_path.as_deref(), &catalog)?;
        let sim = match (&cfg.backend.kind, &cfg.backend.simulated) {
            (BackendKind::Simulated, Some(s)) => {
                let target = load_sequence_file(Some(&s.target_path), &catalog)?;
                Some(SimModel { target, base_runtime: s.base_runtime })
            }
            _ => None,
        };
        Ok(Inputs { catalog, baseline, sim })
    }
}

pub fn make_evaluator(cfg: &ExperimentConfig, inputs: &Inputs, cache: Arc<FitnessCache>) -> Evaluator {
    let workdir = cfg.backend.workdir.clone().unwrap_or_else(|| cfg.experiment.output_dir.join("work"));
    Evaluator::new(cfg.backend.clone(), inputs.sim.clone(), cache, workdir)
}

/// Evaluates the unmodified baseline. A failing baseline is fatal.
pub fn measure_baseline(evaluator: &Evaluator, baseline: &PassSequence) -> Result<Arc<EvaluationRecord>, Error> {
    let rec = evaluator.evaluate(baseline);
    match rec.fitness() {
        FitnessValue::Measured(_) => Ok(rec),
        FitnessValue::Penalty => Err(Error::BaselineFailed { status: rec.status.to_string(), diagnostics: rec.diagnostics.clone() }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub seed: u64,
    pub baseline_fitness: f64,
    pub best_fitness: f64,
    pub percent_improvement: f64,
    pub best_individual: Individual,
    pub best_sequence: PassSequence,
    pub history: EvolutionHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialResult),
    Failed { trial_index: usize, seed: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub outcomes: Vec<TrialOutcome>,
    pub summary: Option<SummaryStats>,
    pub summary_error: Option<StatsError>,
    pub catalog_size: usize,
    pub baseline_len: usize,
}

impl ExperimentReport {
    pub fn completed(&self) -> impl Iterator<Item = &TrialResult> {
        self.outcomes.iter().filter_map(|o| match o {
            TrialOutcome::Completed(t) => Some(t),
            TrialOutcome::Failed { .. } => None,
        })
    }

    pub fn failed_count(&self) -> usize {
        self.outcomes.len() - self.completed().count()
    }
}

fn run_one_trial(
    trial_index: usize,
    seed: u64,
    ga: &GAConfig,
    inputs: &Inputs,
    evaluator: &Evaluator,
    baseline_fitness: f64,
) -> TrialOutcome {
    let ga = GAConfig { rng_seed: seed, ..ga.clone() };
    let generation = AtomicUsize::new(0);
    let outcome = evolve_batched(&ga, &inputs.baseline, &inputs.catalog, |seqs| {
        let fits: Vec<FitnessValue> = seqs.iter().map(|s| evaluator.fitness(s)).collect();
        let g = generation.fetch_add(1, Ordering::Relaxed);
        if let Some(best) = fits.iter().min() {
            log::info!("trial {trial_index} generation {g}: best {best}");
        }
        fits
    });
    let Some(best_fitness) = outcome.best_fitness.seconds() else {
        return TrialOutcome::Failed { trial_index, seed, reason: "every candidate was penalized".into() };
    };
    let percent = percent_improvement(baseline_fitness, best_fitness).expect("baseline fitness is positive");
    TrialOutcome::Completed(TrialResult {
        trial_index,
        seed,
        baseline_fitness,
        best_fitness,
        percent_improvement: percent,
        best_sequence: apply_individual(&inputs.baseline, &outcome.best),
        best_individual: outcome.best,
        history: outcome.history,
    })
}

/// Runs every trial and writes all artifacts to the output directory.
///
/// Trials run in parallel on the simulated backend and strictly one at a
/// time on the external backend, so timing runs never overlap.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<ExperimentReport, Error> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    let out_dir = &cfg.experiment.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cache_path = out_dir.join("fitness_cache.tsv");
    let cache = match cfg.backend.kind {
        // persisted so an interrupted campaign resumes without re-timing
        BackendKind::External => Arc::new(FitnessCache::persistent(&cache_path).map_err(|e| Error::io(&cache_path, e))?),
        BackendKind::Simulated => Arc::new(FitnessCache::new()),
    };
    let evaluator = make_evaluator(cfg, &inputs, cache);
    let shared_baseline = measure_baseline(&evaluator, &inputs.baseline)?.mean;
    log::info!("baseline fitness {shared_baseline}");

    let seeds = cfg.trial_seeds();
    let trial = |(i, &seed): (usize, &u64)| -> Result<TrialOutcome, Error> {
        let baseline_fitness = if cfg.experiment.remeasure_baseline {
            // a fresh evaluator bypasses the cache so the baseline is re-timed
            let fresh = make_evaluator(cfg, &inputs, Arc::new(FitnessCache::new()));
            measure_baseline(&fresh, &inputs.baseline)?.mean
        } else {
            shared_baseline
        };
        Ok(run_one_trial(i, seed, &cfg.ga, &inputs, &evaluator, baseline_fitness))
    };
    let outcomes: Vec<TrialOutcome> = match cfg.backend.kind {
        BackendKind::Simulated => seeds.par_iter().enumerate().map(trial).collect::<Result<_, _>>()?,
        BackendKind::External => seeds.iter().enumerate().map(trial).collect::<Result<_, _>>()?,
    };

    let improvements: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match o {
            TrialOutcome::Completed(t) => Some(t.percent_improvement),
            TrialOutcome::Failed { .. } => None,
        })
        .collect();
    let (summary, summary_error) = match summarize(&improvements) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e)),
    };
    let report = ExperimentReport {
        outcomes,
        summary,
        summary_error,
        catalog_size: inputs.catalog.len(),
        baseline_len: inputs.baseline.len(),
    };
    if report.failed_count() > 0 {
        log::warn!("{} of {} trials failed; summary uses the rest", report.failed_count(), report.outcomes.len());
    }
    write_artifacts(cfg, &report)?;
    Ok(report)
}

#[derive(Serialize)]
struct TrialJson<'a> {
    trial_index: usize,
    seed: u64,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_fitness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_fitness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    percent_improvement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_genome_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_sequence_len: Option<usize>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    trials: Vec<TrialJson<'a>>,
    completed: usize,
    failed: usize,
    catalog_size: usize,
    baseline_len: usize,
    search_space_log10: f64,
    test: &'static str,
    summary: Option<SummaryStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary_error: Option<String>,
}

pub fn summary_json(report: &ExperimentReport) -> String {
    let trials = report
        .outcomes
        .iter()
        .map(|o| match o {
            TrialOutcome::Completed(t) => TrialJson {
                trial_index: t.trial_index,
                seed: t.seed,
                status: "completed",
                reason: None,
                baseline_fitness: Some(t.baseline_fitness),
                best_fitness: Some(t.best_fitness),
                percent_improvement: Some(t.percent_improvement),
                best_genome_len: Some(t.best_individual.len()),
                best_sequence_len: Some(t.best_sequence.len()),
            },
            TrialOutcome::Failed { trial_index, seed, reason } => TrialJson {
                trial_index: *trial_index,
                seed: *seed,
                status: "failed",
                reason: Some(reason),
                baseline_fitness: None,
                best_fitness: None,
                percent_improvement: None,
                best_genome_len: None,
                best_sequence_len: None,
            },
        })
        .collect();
    let doc = SummaryJson {
        trials,
        completed: report.completed().count(),
        failed: report.failed_count(),
        catalog_size: report.catalog_size,
        baseline_len: report.baseline_len,
        search_space_log10: search_space_order(report.catalog_size as u64, report.baseline_len as u64),
        test: TEST_LABEL,
        summary: report.summary,
        summary_error: report.summary_error.as_ref().map(|e| e.to_string()),
    };
    serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n"
}

fn write(path: PathBuf, contents: &str) -> Result<(), Error> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn write_artifacts(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<(), Error> {
    let out = &cfg.experiment.output_dir;
    write(out.join("effective_config.toml"), &cfg.to_toml())?;
    for t in report.completed() {
        let dir = out.join(format!("trial_{}", t.trial_index));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write(dir.join("history.csv"), &report::history_csv(&t.history))?;
        write(dir.join("best_individual.patch"), &serialize_individual(&t.best_individual))?;
        write(dir.join("best_sequence.txt"), &t.best_sequence.to_text())?;
    }
    write(out.join("summary.json"), &summary_json(report))
}
