//! Turning a pass sequence into a fitness value.
//!
//! The external backend compiles the target program in three steps (front
//! end to IR, optimizer with the candidate pass list, link to a native
//! executable) and then times the executable `runs_per_eval` times, one run
//! after another. The simulated backend scores sequences by edit distance to
//! a hidden target. Both go through a [`FitnessCache`] keyed by the sequence
//! digest.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use passgi_core::{simulated_fitness, FitnessValue, PassSequence, SimModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wait_timeout::ChildExt;

/// Cap on captured tool output kept in a record.
const DIAGNOSTICS_LIMIT: usize = 8 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    External,
    Simulated,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "external" => Ok(BackendKind::External),
            "simulated" => Ok(BackendKind::Simulated),
            other => Err(format!("unknown backend `{other}` (expected external or simulated)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatedSection {
    /// Sequence file holding the hidden target.
    pub target_path: PathBuf,
    #[serde(default = "default_base_runtime")]
    pub base_runtime: f64,
}

fn default_base_runtime() -> f64 {
    1.0
}

/// Toolchain commands are whitespace-split templates. Placeholders:
/// `{source}`, `{ir}`, `{opt_ir}`, `{output}`, `{passes_csv}`, and a bare
/// `{passes}` token, which expands to one argument per pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub source_path: Option<PathBuf>,
    pub front_command: String,
    pub optimizer_command: String,
    pub linker_command: String,
    pub runs_per_eval: usize,
    /// Seconds.
    pub run_timeout: f64,
    /// Seconds.
    pub compile_timeout: f64,
    pub program_args: Vec<String>,
    pub workdir: Option<PathBuf>,
    /// Fraction trimmed from each end of the sorted samples before averaging.
    pub trim_fraction: f64,
    pub simulated: Option<SimulatedSection>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Simulated,
            source_path: None,
            front_command: "clang -O0 -Xclang -disable-O0-optnone -emit-llvm -c {source} -o {ir}".into(),
            optimizer_command: "opt {passes} {ir} -o {opt_ir}".into(),
            linker_command: "clang {opt_ir} -o {output}".into(),
            runs_per_eval: 40,
            run_timeout: 10.0,
            compile_timeout: 60.0,
            program_args: Vec::new(),
            workdir: None,
            trim_fraction: 0.0,
            simulated: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.runs_per_eval == 0 {
            return Err("backend.runs_per_eval must be at least 1".into());
        }
        if !(self.run_timeout > 0.0) || !(self.compile_timeout > 0.0) {
            return Err("backend timeouts must be positive".into());
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err("backend.trim_fraction must lie in [0, 0.5)".into());
        }
        match self.kind {
            BackendKind::External if self.source_path.is_none() => {
                Err("backend.source_path is required for the external backend".into())
            }
            BackendKind::Simulated if self.simulated.is_none() => {
                Err("[backend.simulated] section is required for the simulated backend".into())
            }
            BackendKind::Simulated if !(self.simulated.as_ref().unwrap().base_runtime > 0.0) => {
                Err("backend.simulated.base_runtime must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    CompileError,
    RunError,
    Timeout,
}

impl fmt::Display for EvalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalStatus::Ok => "ok",
            EvalStatus::CompileError => "compile_error",
            EvalStatus::RunError => "run_error",
            EvalStatus::Timeout => "timeout",
        })
    }
}

impl std::str::FromStr for EvalStatus {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "ok" => EvalStatus::Ok,
            "compile_error" => EvalStatus::CompileError,
            "run_error" => EvalStatus::RunError,
            "timeout" => EvalStatus::Timeout,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub sequence_digest: String,
    pub runs: usize,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sample_stddev: f64,
    pub status: EvalStatus,
    pub diagnostics: String,
    /// Standard output of the first timed run, truncated.
    pub program_output: String,
}

impl EvaluationRecord {
    pub fn fitness(&self) -> FitnessValue {
        match self.status {
            EvalStatus::Ok if self.mean.is_finite() && self.mean > 0.0 => FitnessValue::Measured(self.mean),
            _ => FitnessValue::Penalty,
        }
    }

    fn failed(digest: String, status: EvalStatus, diagnostics: String) -> Self {
        EvaluationRecord {
            sequence_digest: digest,
            runs: 0,
            samples: Vec::new(),
            mean: f64::INFINITY,
            sample_stddev: 0.0,
            status,
            diagnostics,
            program_output: String::new(),
        }
    }

    fn to_line(&self) -> String {
        let samples: Vec<String> = self.samples.iter().map(|s| s.to_string()).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.sequence_digest,
            self.status,
            self.runs,
            self.mean,
            self.sample_stddev,
            samples.join(",")
        )
    }

    fn from_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return None;
        }
        let samples = if f[5].is_empty() {
            Vec::new()
        } else {
            f[5].split(',').map(str::parse).collect::<Result<Vec<f64>, _>>().ok()?
        };
        Some(EvaluationRecord {
            sequence_digest: f[0].to_string(),
            status: f[1].parse().ok()?,
            runs: f[2].parse().ok()?,
            mean: f[3].parse().ok()?,
            sample_stddev: f[4].parse().ok()?,
            samples,
            diagnostics: String::new(),
            program_output: String::new(),
        })
    }
}

/// SHA-256 over the ordered pass tokens, each terminated by a newline.
pub fn sequence_digest(seq: &PassSequence) -> String {
    let mut h = Sha256::new();
    for p in seq.iter() {
        h.update(p.as_str().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Mean and sample (n - 1) standard deviation, after dropping
/// `trim_fraction` of the samples from each end.
pub fn sample_stats(samples: &[f64], trim_fraction: f64) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    let kept: &[f64] = if trim_fraction > 0.0 {
        sorted.sort_by(f64::total_cmp);
        let k = (samples.len() as f64 * trim_fraction).floor() as usize;
        &sorted[k..samples.len() - k]
    } else {
        samples
    };
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let sd = if kept.len() > 1 {
        (kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Records by digest. First writer wins; stored records never change.
#[derive(Debug, Default)]
pub struct FitnessCache {
    records: Mutex<HashMap<String, Arc<EvaluationRecord>>>,
    journal: Option<Mutex<fs::File>>,
}

impl FitnessCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or creates) a persisted cache, loading any records already in
    /// the file.
    pub fn persistent(path: &Path) -> io::Result<Self> {
        let mut records = HashMap::new();
        if path.exists() {
            for line in fs::read_to_string(path)?.lines() {
                if let Some(r) = EvaluationRecord::from_line(line) {
                    records.entry(r.sequence_digest.clone()).or_insert_with(|| Arc::new(r));
                } else if !line.trim().is_empty() {
                    log::warn!("skipping malformed cache line in {}", path.display());
                }
            }
        }
        let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FitnessCache { records: Mutex::new(records), journal: Some(Mutex::new(file)) })
    }

    pub fn get(&self, digest: &str) -> Option<Arc<EvaluationRecord>> {
        self.records.lock().unwrap().get(digest).cloned()
    }

    pub fn insert(&self, record: EvaluationRecord) -> Arc<EvaluationRecord> {
        let mut map = self.records.lock().unwrap();
        if let Some(existing) = map.get(&record.sequence_digest) {
            return existing.clone();
        }
        if let Some(journal) = &self.journal {
            let mut f = journal.lock().unwrap();
            if let Err(e) = writeln!(f, "{}", record.to_line()) {
                log::warn!("failed to persist cache record: {e}");
            }
        }
        let rec = Arc::new(record);
        map.insert(rec.sequence_digest.clone(), rec.clone());
        rec
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Finished { seconds: f64, exit_code: Option<i32>, stdout: String, stderr: String },
    Timeout { seconds: f64 },
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        buf
    })
}

fn truncated(bytes: &[u8]) -> String {
    let s = String::from_utf8_lossy(bytes);
    if s.len() <= DIAGNOSTICS_LIMIT {
        return s.into_owned();
    }
    let mut end = DIAGNOSTICS_LIMIT;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...[truncated]", &s[..end])
}

fn wait_with_timeout(mut child: Child, start: Instant, timeout: Duration) -> io::Result<RunOutcome> {
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    match child.wait_timeout(timeout)? {
        Some(status) => {
            let seconds = start.elapsed().as_secs_f64();
            let stdout = truncated(&out.join().unwrap_or_default());
            let stderr = truncated(&err.join().unwrap_or_default());
            Ok(RunOutcome::Finished { seconds, exit_code: status.code(), stdout, stderr })
        }
        None => {
            let _ = child.kill();
            let _ = child.wait();
            Ok(RunOutcome::Timeout { seconds: start.elapsed().as_secs_f64() })
        }
    }
}

/// Wall-clock time from spawn to exit. The child is killed on timeout.
pub fn time_execution(executable: &Path, args: &[String], timeout: Duration) -> io::Result<RunOutcome> {
    let mut cmd = Command::new(executable);
    cmd.args(args).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let start = Instant::now();
    let child = cmd.spawn()?;
    wait_with_timeout(child, start, timeout)
}

/// Values substituted into command templates.
pub struct TemplateVars<'a> {
    pub source: &'a Path,
    pub ir: &'a Path,
    pub opt_ir: &'a Path,
    pub output: &'a Path,
    pub passes: &'a [&'a str],
}

pub fn expand_template(template: &str, vars: &TemplateVars<'_>) -> Vec<String> {
    let csv = vars.passes.join(",");
    let mut argv = Vec::new();
    for tok in template.split_whitespace() {
        if tok == "{passes}" {
            argv.extend(vars.passes.iter().map(|p| p.to_string()));
            continue;
        }
        argv.push(
            tok.replace("{source}", &vars.source.to_string_lossy())
                .replace("{opt_ir}", &vars.opt_ir.to_string_lossy())
                .replace("{ir}", &vars.ir.to_string_lossy())
                .replace("{output}", &vars.output.to_string_lossy())
                .replace("{passes_csv}", &csv),
        );
    }
    argv
}

enum StepError {
    Failed(String),
    Timeout(String),
}

fn run_tool(argv: &[String], timeout: Duration) -> Result<(), StepError> {
    let Some((prog, args)) = argv.split_first() else {
        return Err(StepError::Failed("empty command template".into()));
    };
    let start = Instant::now();
    let child = Command::new(prog)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| StepError::Failed(format!("failed to spawn `{prog}`: {e}")))?;
    match wait_with_timeout(child, start, timeout) {
        Ok(RunOutcome::Finished { exit_code: Some(0), .. }) => Ok(()),
        Ok(RunOutcome::Finished { exit_code, stdout, stderr, .. }) => Err(StepError::Failed(format!(
            "`{}` exited with {:?}\n{stderr}{stdout}",
            argv.join(" "),
            exit_code
        ))),
        Ok(RunOutcome::Timeout { seconds }) => {
            Err(StepError::Timeout(format!("`{}` timed out after {seconds:.3}s", argv.join(" "))))
        }
        Err(e) => Err(StepError::Failed(format!("waiting on `{prog}`: {e}"))),
    }
}

/// Evaluates sequences through the configured backend, with caching.
pub struct Evaluator {
    cfg: BackendConfig,
    sim: Option<SimModel>,
    cache: Arc<FitnessCache>,
    workdir: PathBuf,
    tool_invocations: AtomicU64,
    fresh_evaluations: AtomicU64,
}

impl Evaluator {
    /// `sim` must be present for the simulated backend. `workdir` holds
    /// build products for the external backend.
    pub fn new(cfg: BackendConfig, sim: Option<SimModel>, cache: Arc<FitnessCache>, workdir: PathBuf) -> Self {
        assert!(cfg.kind == BackendKind::External || sim.is_some(), "simulated backend needs a model");
        Evaluator {
            cfg,
            sim,
            cache,
            workdir,
            tool_invocations: AtomicU64::new(0),
            fresh_evaluations: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &FitnessCache {
        &self.cache
    }

    /// External processes spawned so far (compiles and timed runs).
    pub fn tool_invocations(&self) -> u64 {
        self.tool_invocations.load(Ordering::Relaxed)
    }

    /// Evaluations that missed the cache.
    pub fn fresh_evaluations(&self) -> u64 {
        self.fresh_evaluations.load(Ordering::Relaxed)
    }

    pub fn fitness(&self, seq: &PassSequence) -> FitnessValue {
        self.evaluate(seq).fitness()
    }

    pub fn evaluate(&self, seq: &PassSequence) -> Arc<EvaluationRecord> {
        let digest = sequence_digest(seq);
        if let Some(hit) = self.cache.get(&digest) {
            return hit;
        }
        self.fresh_evaluations.fetch_add(1, Ordering::Relaxed);
        let record = match self.cfg.kind {
            BackendKind::Simulated => self.evaluate_simulated(seq, digest),
            BackendKind::External => self.evaluate_external(seq, digest),
        };
        if record.status != EvalStatus::Ok {
            log::debug!("candidate {} failed: {}", record.sequence_digest, record.status);
        }
        self.cache.insert(record)
    }

    fn evaluate_simulated(&self, seq: &PassSequence, digest: String) -> EvaluationRecord {
        let model = self.sim.as_ref().expect("simulated backend has a model");
        let value = simulated_fitness(seq, model).as_f64();
        let runs = self.cfg.runs_per_eval;
        EvaluationRecord {
            sequence_digest: digest,
            runs,
            samples: vec![value; runs],
            mean: value,
            sample_stddev: 0.0,
            status: EvalStatus::Ok,
            diagnostics: String::new(),
            program_output: String::new(),
        }
    }

    fn evaluate_external(&self, seq: &PassSequence, digest: String) -> EvaluationRecord {
        let dir = self.workdir.join(format!("eval-{}", &digest[..16]));
        let result = self.build_and_time(seq, &digest, &dir);
        let _ = fs::remove_dir_all(&dir);
        result
    }

    fn build_and_time(&self, seq: &PassSequence, digest: &str, dir: &Path) -> EvaluationRecord {
        if let Err(e) = fs::create_dir_all(dir) {
            return EvaluationRecord::failed(digest.into(), EvalStatus::CompileError, format!("creating {}: {e}", dir.display()));
        }
        let source = self.cfg.source_path.as_deref().expect("validated: external backend has a source");
        let ir = dir.join("input.bc");
        let opt_ir = dir.join("optimized.bc");
        let output = dir.join("candidate.exe");
        let passes: Vec<&str> = seq.iter().map(|p| p.as_str()).collect();
        let vars = TemplateVars { source, ir: &ir, opt_ir: &opt_ir, output: &output, passes: &passes };
        let compile_timeout = Duration::from_secs_f64(self.cfg.compile_timeout);

        for template in [&self.cfg.front_command, &self.cfg.optimizer_command, &self.cfg.linker_command] {
            let argv = expand_template(template, &vars);
            self.tool_invocations.fetch_add(1, Ordering::Relaxed);
            match run_tool(&argv, compile_timeout) {
                Ok(()) => {}
                Err(StepError::Failed(msg)) => {
                    return EvaluationRecord::failed(digest.into(), EvalStatus::CompileError, msg)
                }
                Err(StepError::Timeout(msg)) => return EvaluationRecord::failed(digest.into(), EvalStatus::Timeout, msg),
            }
        }

        let run_timeout = Duration::from_secs_f64(self.cfg.run_timeout);
        let mut samples = Vec::with_capacity(self.cfg.runs_per_eval);
        let mut program_output = String::new();
        for i in 0..self.cfg.runs_per_eval {
            self.tool_invocations.fetch_add(1, Ordering::Relaxed);
            match time_execution(&output, &self.cfg.program_args, run_timeout) {
                Ok(RunOutcome::Finished { seconds, exit_code: Some(0), stdout, .. }) => {
                    if i == 0 {
                        program_output = stdout;
                    }
                    samples.push(seconds);
                }
                Ok(RunOutcome::Finished { exit_code, stdout, stderr, .. }) => {
                    return EvaluationRecord::failed(
                        digest.into(),
                        EvalStatus::RunError,
                        format!("run {} exited with {exit_code:?}\n{stderr}{stdout}", i + 1),
                    )
                }
                Ok(RunOutcome::Timeout { seconds }) => {
                    return EvaluationRecord::failed(
                        digest.into(),
                        EvalStatus::Timeout,
                        format!("run {} exceeded {:.3}s (killed after {seconds:.3}s)", i + 1, self.cfg.run_timeout),
                    )
                }
                Err(e) => {
                    return EvaluationRecord::failed(digest.into(), EvalStatus::RunError, format!("spawning candidate: {e}"))
                }
            }
        }
        let (mean, sample_stddev) = sample_stats(&samples, self.cfg.trim_fraction);
        EvaluationRecord {
            sequence_digest: digest.into(),
            runs: samples.len(),
            samples,
            mean,
            sample_stddev,
            status: EvalStatus::Ok,
            diagnostics: String::new(),
            program_output,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use passgi_core::PassName;

    fn seq(items: &[&str]) -> PassSequence {
        PassSequence::new(items.iter().map(|s| PassName::new(*s).unwrap()).collect(), "")
    }

    #[test]
    fn digest_is_order_sensitive() {
        assert_ne!(sequence_digest(&seq(&["a", "b"])), sequence_digest(&seq(&["b", "a"])));
        assert_ne!(sequence_digest(&seq(&["ab"])), sequence_digest(&seq(&["a", "b"])));
        assert_eq!(sequence_digest(&seq(&["a", "b"])), sequence_digest(&seq(&["a", "b"])));
        assert_eq!(sequence_digest(&seq(&[])).len(), 64);
    }

    #[test]
    fn stats_of_fixed_samples() {
        let (m, sd) = sample_stats(&[1.0, 2.0, 3.0], 0.0);
        assert_eq!(m, 2.0);
        assert_eq!(sd, 1.0);
        let (m, sd) = sample_stats(&[5.0], 0.0);
        assert_eq!((m, sd), (5.0, 0.0));
        // 10% trimmed from each end of ten samples drops the outliers
        let s = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 100.0];
        assert_eq!(sample_stats(&s, 0.1).0, 1.0);
    }

    #[test]
    fn failed_records_are_penalized() {
        let r = EvaluationRecord::failed("d".into(), EvalStatus::Timeout, String::new());
        assert!(r.fitness().is_penalty());
    }

    #[test]
    fn template_expansion() {
        let vars = TemplateVars {
            source: Path::new("/s.c"),
            ir: Path::new("/w/in.bc"),
            opt_ir: Path::new("/w/out.bc"),
            output: Path::new("/w/a.out"),
            passes: &["-gvn", "-licm"],
        };
        assert_eq!(
            expand_template("opt {passes} {ir} -o {opt_ir}", &vars),
            vec!["opt", "-gvn", "-licm", "/w/in.bc", "-o", "/w/out.bc"]
        );
        assert_eq!(
            expand_template("opt -passes={passes_csv} {ir}", &vars),
            vec!["opt", "-passes=-gvn,-licm", "/w/in.bc"]
        );
        let none = TemplateVars { passes: &[], ..vars };
        assert_eq!(expand_template("opt {passes} {ir}", &none), vec!["opt", "/w/in.bc"]);
    }

    #[test]
    fn cache_line_round_trip() {
        let r = EvaluationRecord {
            sequence_digest: "abc".into(),
            runs: 3,
            samples: vec![1.0, 2.0, 3.0],
            mean: 2.0,
            sample_stddev: 1.0,
            status: EvalStatus::Ok,
            diagnostics: String::new(),
            program_output: String::new(),
        };
        assert_eq!(EvaluationRecord::from_line(&r.to_line()), Some(r));
        assert_eq!(EvaluationRecord::from_line("garbage"), None);
    }

    #[test]
    fn cache_first_writer_wins() {
        let cache = FitnessCache::new();
        let mut a = EvaluationRecord::failed("d".into(), EvalStatus::RunError, String::new());
        cache.insert(a.clone());
        a.status = EvalStatus::Timeout;
        assert_eq!(cache.insert(a).status, EvalStatus::RunError);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BackendConfig::default();
        assert!(cfg.validate().is_err(), "simulated without a model");
        cfg.kind = BackendKind::External;
        assert!(cfg.validate().is_err(), "external without a source");
        cfg.source_path = Some("x.c".into());
        assert!(cfg.validate().is_ok());
        cfg.runs_per_eval = 0;
        assert!(cfg.validate().is_err());
        cfg.runs_per_eval = 1;
        cfg.run_timeout = 0.0;
        assert!(cfg.validate().is_err());
    }
}
