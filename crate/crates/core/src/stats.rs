//! Percent improvement over the baseline and the one-sample t-test used to
//! summarize repeated trials.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("baseline runtime must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("degenerate sample: need at least two values with non-zero spread")]
    DegenerateSample,
}

/// Positive when `evolved` is faster than `baseline`.
pub fn percent_improvement(baseline: f64, evolved: f64) -> Result<f64, StatsError> {
    if !(baseline > 0.0) {
        return Err(StatsError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - evolved) / baseline)
}

/// One-tailed test of H0: mean improvement = 0 against H1: mean > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryStats {
    pub n: usize,
    pub mean_improvement: f64,
    /// n - 1 denominator.
    pub sample_stddev: f64,
    pub t_statistic: f64,
    pub p_value_one_tailed: f64,
}

pub fn summarize(improvements: &[f64]) -> Result<SummaryStats, StatsError> {
    let n = improvements.len();
    if n < 2 {
        return Err(StatsError::DegenerateSample);
    }
    let nf = n as f64;
    let mean = improvements.iter().sum::<f64>() / nf;
    let ss: f64 = improvements.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = libm::sqrt(ss / (nf - 1.0));
    // relative guard: equal inputs can leave rounding residue in `ss`
    if !(sd > 1e-12 * libm::fabs(mean)) || sd == 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    let t = mean / (sd / libm::sqrt(nf));
    Ok(SummaryStats {
        n,
        mean_improvement: mean,
        sample_stddev: sd,
        t_statistic: t,
        p_value_one_tailed: student_t_sf(t, nf - 1.0),
    })
}

/// P(T >= t) for Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// I_x(a, b), via the continued fraction with modified Lentz iteration.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // the fraction converges fast only for x < (a + 1) / (a + b + 2)
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}
