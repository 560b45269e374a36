#![allow(dead_code)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::Command;

use passgi::backend::{BackendConfig, BackendKind};

pub fn samples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("samples")
}

pub fn write_script(path: &Path, body: &str) {
    fs::write(path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

pub fn on_path(tool: &str) -> Option<PathBuf> {
    if let Ok(explicit) = std::env::var(format!("PASSGI_{}", tool.to_uppercase())) {
        return Some(PathBuf::from(explicit));
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths).map(|d| d.join(tool)).find(|p| p.is_file())
    })
}

/// An optimizer stand-in: `fake-opt <passes...> <in> -o <out>`. Rejects any
/// pass not listed in `known`, otherwise copies input to output.
pub fn fake_optimizer(dir: &Path, known: &[&str]) -> PathBuf {
    let path = dir.join("fake-opt");
    let cases = known.join("|");
    write_script(
        &path,
        &format!(
            r#"out=""; in=""
while [ $# -gt 0 ]; do
  case "$1" in
    -o) out="$2"; shift 2; continue ;;
    {cases}) ;;
    -*) echo "fake-opt: unknown pass $1" >&2; exit 1 ;;
    *) in="$1" ;;
  esac
  shift
done
cp "$in" "$out""#
        ),
    );
    path
}

/// A backend whose "compiler" copies an executable shell script through
/// every stage, so the pipeline runs without a toolchain.
pub fn script_backend(dir: &Path, program_body: &str, known: &[&str]) -> BackendConfig {
    let program = dir.join("program.sh");
    write_script(&program, program_body);
    let opt = fake_optimizer(dir, known);
    BackendConfig {
        kind: BackendKind::External,
        source_path: Some(program),
        front_command: "cp {source} {ir}".into(),
        optimizer_command: format!("{} {{passes}} {{ir}} -o {{opt_ir}}", opt.display()),
        linker_command: "cp {opt_ir} {output}".into(),
        runs_per_eval: 3,
        run_timeout: 5.0,
        compile_timeout: 10.0,
        workdir: Some(dir.join("work")),
        ..BackendConfig::default()
    }
}

pub fn passgi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_passgi"))
}

/// Upper tail of Student's t by adaptive Simpson quadrature of the density.
pub fn t_tail_quadrature(t: f64, df: f64) -> f64 {
    fn ln_gamma(x: f64) -> f64 {
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let tt = x + 7.5;
        let mut a = C[0];
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * tt.ln() - tt + a.ln()
    }
    let norm = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
    let g = move |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let x = t + u / (1.0 - u);
        norm * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0) / ((1.0 - u) * (1.0 - u))
    };
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (g(0.0), g(0.5), g(1.0));
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    step(&g, 0.0, 1.0, fa, fm, fb, whole, 1e-14 * whole.abs(), 50)
}

/// Eight values with mean 3.7 and sample standard deviation 0.8768.
pub fn eight_trial_sample() -> Vec<f64> {
    let scale = 0.8768 / (8.0f64 / 7.0).sqrt();
    [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0].iter().map(|r| 3.7 + r * scale).collect()
}
