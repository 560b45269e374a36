//! Plot-ready CSV output and parsing of improvement lists.

use std::fmt::Write as _;

use passgi_core::EvolutionHistory;

use crate::error::Error;

pub const HISTORY_HEADER: &str = "generation,best_fitness,mean_fitness";

/// One row per generation. Penalized values are written as `inf`.
pub fn history_csv(history: &EvolutionHistory) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for g in &history.generations {
        let _ = writeln!(out, "{},{},{}", g.generation, g.best_fitness, g.mean_fitness);
    }
    out
}

/// Parses a `history.csv` back into `(generation, best, mean)` rows.
pub fn parse_history_csv(text: &str) -> Result<Vec<(usize, f64, f64)>, Error> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(Error::Malformed("history.csv header mismatch".into()));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::Malformed(format!("bad history row `{l}`"));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Improvement percentages from either a `summary.json` (completed trials)
/// or a plain list of numbers separated by whitespace or commas, with `#`
/// comments.
pub fn parse_improvements(text: &str) -> Result<Vec<f64>, Error> {
    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("invalid JSON: {e}")))?;
        let trials = doc
            .get("trials")
            .and_then(|t| t.as_array())
            .ok_or_else(|| Error::Malformed("summary.json has no `trials` array".into()))?;
        return Ok(trials.iter().filter_map(|t| t.get("percent_improvement")?.as_f64()).collect());
    }
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| Error::Malformed(format!("not a number: `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::Malformed(format!("not a finite number: `{tok}`")));
            }
            values.push(v);
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use passgi_core::{FitnessValue, GenerationRecord, Individual};

    #[test]
    fn csv_rows() {
        let h = EvolutionHistory {
            generations: vec![
                GenerationRecord {
                    generation: 0,
                    best_fitness: FitnessValue::Measured(1.5),
                    mean_fitness: FitnessValue::Measured(2.25),
                    best_individual: Individual::default(),
                },
                GenerationRecord {
                    generation: 1,
                    best_fitness: FitnessValue::Measured(1.25),
                    mean_fitness: FitnessValue::Penalty,
                    best_individual: Individual::default(),
                },
            ],
        };
        let csv = history_csv(&h);
        assert_eq!(csv, "generation,best_fitness,mean_fitness\n0,1.5,2.25\n1,1.25,inf\n");
        let rows = parse_history_csv(&csv).unwrap();
        assert_eq!(rows[1].0, 1);
        assert_eq!(rows[1].2, f64::INFINITY);
    }

    #[test]
    fn improvement_lists() {
        assert_eq!(parse_improvements("1.0, 2\n# c\n3e0\n").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_improvements("1.0 abc").is_err());
        assert!(parse_improvements("nan").is_err());
        let json = r#"{"trials":[{"percent_improvement":2.5},{"status":"failed"},{"percent_improvement":-1}]}"#;
        assert_eq!(parse_improvements(json).unwrap(), vec![2.5, -1.0]);
        assert!(parse_improvements("{\"x\":1}").is_err());
    }
}
