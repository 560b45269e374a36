//! Fitness values and the simulated hidden-target landscape.

use alloc::vec;
use core::cmp::Ordering;
use core::fmt;

use crate::catalog::{PassName, PassSequence};

/// Mean runtime in seconds, or `Penalty` for a candidate that failed to
/// build, crashed, or timed out. Lower is better; `Penalty` is worse than
/// every measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitnessValue {
    Measured(f64),
    Penalty,
}

impl FitnessValue {
    /// Panics unless `seconds` is finite and positive.
    pub fn measured(seconds: f64) -> Self {
        assert!(seconds.is_finite() && seconds > 0.0, "measured fitness must be finite and > 0, got {seconds}");
        FitnessValue::Measured(seconds)
    }

    pub fn is_penalty(&self) -> bool {
        matches!(self, FitnessValue::Penalty)
    }

    pub fn seconds(&self) -> Option<f64> {
        match *self {
            FitnessValue::Measured(s) => Some(s),
            FitnessValue::Penalty => None,
        }
    }

    /// `Penalty` maps to `+inf`.
    pub fn as_f64(&self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }
}

impl Eq for FitnessValue {}

impl PartialOrd for FitnessValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FitnessValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (FitnessValue::Measured(a), FitnessValue::Measured(b)) => a.total_cmp(b),
            (FitnessValue::Measured(_), FitnessValue::Penalty) => Ordering::Less,
            (FitnessValue::Penalty, FitnessValue::Measured(_)) => Ordering::Greater,
            (FitnessValue::Penalty, FitnessValue::Penalty) => Ordering::Equal,
        }
    }
}

impl fmt::Display for FitnessValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitnessValue::Measured(s) => write!(f, "{s}"),
            FitnessValue::Penalty => f.write_str("inf"),
        }
    }
}

/// A toolchain-free landscape: runtime grows with edit distance from a
/// hidden target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub target: PassSequence,
    pub base_runtime: f64,
}

/// Element-level edit distance (unit-cost insert, delete, substitute).
pub fn levenshtein(a: &[PassName], b: &[PassName]) -> usize {
    let mut prev: alloc::vec::Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `base_runtime * (1 + distance(seq, target) / max(|target|, 1))`
pub fn simulated_fitness(seq: &PassSequence, model: &SimModel) -> FitnessValue {
    let d = levenshtein(&seq.passes, &model.target.passes) as f64;
    let denom = model.target.len().max(1) as f64;
    FitnessValue::measured(model.base_runtime * (1.0 + d / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn seq(items: &[&str]) -> PassSequence {
        PassSequence::new(items.iter().map(|s| PassName::new(*s).unwrap()).collect(), "")
    }

    #[test]
    fn penalty_orders_last() {
        assert!(FitnessValue::measured(1e300) < FitnessValue::Penalty);
        assert!(FitnessValue::measured(0.5) < FitnessValue::measured(0.6));
        assert_eq!(FitnessValue::Penalty.cmp(&FitnessValue::Penalty), Ordering::Equal);
        assert_eq!(FitnessValue::Penalty.as_f64(), f64::INFINITY);
    }

    #[test]
    #[should_panic]
    fn measured_rejects_zero() {
        FitnessValue::measured(0.0);
    }

    #[test]
    fn simulated_examples() {
        let t = seq(&["a", "b", "c"]);
        let m = SimModel { target: t.clone(), base_runtime: 1.0 };
        assert_eq!(simulated_fitness(&t, &m), FitnessValue::Measured(1.0));
        let got = simulated_fitness(&seq(&["a", "b"]), &m).as_f64();
        assert!((got - 4.0 / 3.0).abs() < 1e-12);
        let m2 = SimModel { target: t, base_runtime: 2.0 };
        assert_eq!(simulated_fitness(&seq(&[]), &m2), FitnessValue::Measured(4.0));
    }

    #[test]
    fn empty_target_uses_unit_denominator() {
        let m = SimModel { target: seq(&[]), base_runtime: 1.0 };
        assert_eq!(simulated_fitness(&seq(&["a", "b"]), &m), FitnessValue::Measured(3.0));
    }

    #[test]
    fn levenshtein_small() {
        let a: Vec<_> = seq(&["a", "b", "c"]).passes;
        let b: Vec<_> = seq(&["b", "c", "d"]).passes;
        assert_eq!(levenshtein(&a, &b), 2);
        assert_eq!(levenshtein(&a, &a), 0);
        assert_eq!(levenshtein(&[], &b), 3);
    }
}
