//! Flat key-value experiment configuration files.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored. List values (`alpha`, `delta`) are comma separated.
//! Keys match the CLI flags: `problem`, `n`, `alpha`, `delta`, `tau`,
//! `runs`, `seed`, `freq`, `max-epochs`, `d`, `p`, `decay`, `w-norm`.
//! Values from the command line override values from the file.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, ProblemKind};

/// Parses a config file into key-value pairs, preserving order.
pub fn parse_config(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Applies one key-value pair to a spec.
pub fn apply(spec: &mut ExperimentSpec, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("bad value '{value}' for {what}"));
    match key {
        "problem" => spec.problem = ProblemKind::parse(value),
        "n" => spec.n = value.parse().map_err(|_| bad("n"))?,
        "alpha" => spec.alphas = parse_list(value).map_err(|_| bad("alpha"))?,
        "delta" => spec.deltas = parse_list(value).map_err(|_| bad("delta"))?,
        "tau" => spec.tau = value.parse().map_err(|_| bad("tau"))?,
        "runs" => spec.runs = value.parse().map_err(|_| bad("runs"))?,
        "seed" => spec.master_seed = value.parse().map_err(|_| bad("seed"))?,
        "freq" => spec.check_frequency = value.parse().map_err(|_| bad("freq"))?,
        "max-epochs" | "max_epochs" => {
            spec.max_epochs = value.parse().map_err(|_| bad("max-epochs"))?
        }
        "d" => spec.gravity_depth = value.parse().map_err(|_| bad("d"))?,
        "p" => spec.spectral.p = value.parse().map_err(|_| bad("p"))?,
        "decay" => spec.spectral.decay = value.parse().map_err(|_| bad("decay"))?,
        "w-norm" | "w_norm" => spec.spectral.w_norm = value.parse().map_err(|_| bad("w-norm"))?,
        _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
    }
    Ok(())
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    value
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect()
}

/// Loads a config file and folds it into the spec.
pub fn apply_file(spec: &mut ExperimentSpec, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (key, value) in parse_config(&text, &path.display().to_string())? {
        apply(spec, &key, &value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_applies() {
        let text = "# experiment\nproblem = gravity\nn = 48\nalpha = 0.1, 0.5\ndelta=1e-3\nseed = 7\n";
        let pairs = parse_config(text, "test.cfg").unwrap();
        let mut spec = ExperimentSpec::default();
        for (k, v) in &pairs {
            apply(&mut spec, k, v).unwrap();
        }
        assert_eq!(spec.problem, ProblemKind::Gravity);
        assert_eq!(spec.n, 48);
        assert_eq!(spec.alphas, vec![0.1, 0.5]);
        assert_eq!(spec.deltas, vec![1e-3]);
        assert_eq!(spec.master_seed, 7);
    }

    #[test]
    fn rejects_malformed_lines_and_keys() {
        assert!(matches!(
            parse_config("this is not a pair\n", "t"),
            Err(Error::Parse { line: 1, .. })
        ));
        let mut spec = ExperimentSpec::default();
        assert!(apply(&mut spec, "unknown", "1").is_err());
        assert!(apply(&mut spec, "n", "many").is_err());
    }
}
