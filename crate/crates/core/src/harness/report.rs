//! CSV and plain-text rendering of experiment results, plus the run
//! manifest. Floating-point values are written with Rust's shortest
//! round-trip formatting, so re-parsing a CSV recovers the numbers exactly
//! and repeated runs with the same seed produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{
    BoundsOutcome, DecomposeCell, ExperimentSpec, IdpRow, NontermRow, ResultRow,
};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `problem,alpha,delta_rel,e_sgd,std_e_sgd,k_sgd,e_lm,k_lm,n_exhausted`.
pub fn table_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("problem,alpha,delta_rel,e_sgd,std_e_sgd,k_sgd,e_lm,k_lm,n_exhausted\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.problem,
            r.alpha,
            r.delta_rel,
            r.e_sgd,
            r.std_e_sgd,
            r.k_sgd,
            opt(r.e_lm),
            opt(r.k_lm),
            r.n_exhausted
        );
    }
    out
}

/// Parses the output of [`table_csv`] back into rows.
pub fn parse_table_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                path: "<table csv>".into(),
                line: idx + 1,
                message: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| Error::Parse {
                path: "<table csv>".into(),
                line: idx + 1,
                message: format!("bad number '{}'", fields[i]),
            })
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(ResultRow {
            problem: fields[0].to_string(),
            alpha: num(1)?,
            delta_rel: num(2)?,
            e_sgd: num(3)?,
            std_e_sgd: num(4)?,
            k_sgd: num(5)?,
            e_lm: opt_num(6)?,
            k_lm: opt_num(7)?,
            n_exhausted: fields[8].parse().map_err(|_| Error::Parse {
                path: "<table csv>".into(),
                line: idx + 1,
                message: format!("bad count '{}'", fields[8]),
            })?,
        });
    }
    Ok(rows)
}

/// Aligned plain-text table: one row per noise level, a column group
/// (e_sgd, std, k_sgd) per alpha, then the Landweber columns.
pub fn render_table(rows: &[ResultRow]) -> String {
    let mut alphas: Vec<f64> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for r in rows {
        if !alphas.contains(&r.alpha) {
            alphas.push(r.alpha);
        }
        if !deltas.contains(&r.delta_rel) {
            deltas.push(r.delta_rel);
        }
    }
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let with_lm = rows.iter().any(|r| r.e_lm.is_some());
    let mut out = String::new();
    let _ = write!(out, "{:>8} ", "delta");
    for a in &alphas {
        let _ = write!(out, "| {:^31} ", format!("alpha={a}"));
    }
    if with_lm {
        let _ = write!(out, "| {:^20}", "LM");
    }
    out.push('\n');
    let _ = write!(out, "{:>8} ", "");
    for _ in &alphas {
        let _ = write!(out, "| {:>9} {:>9} {:>11} ", "e_sgd", "std", "k_sgd");
    }
    if with_lm {
        let _ = write!(out, "| {:>9} {:>10}", "e_lm", "k_lm");
    }
    out.push('\n');
    for &d in &deltas {
        let _ = write!(out, "{:>8} ", format!("{d:.0e}"));
        let mut lm: Option<(f64, f64)> = None;
        for &a in &alphas {
            match rows
                .iter()
                .find(|r| r.alpha == a && r.delta_rel == d)
            {
                Some(r) => {
                    let _ = write!(
                        out,
                        "| {:>9.2e} {:>9.2e} {:>11.3} ",
                        r.e_sgd, r.std_e_sgd, r.k_sgd
                    );
                    if let (Some(e), Some(k)) = (r.e_lm, r.k_lm) {
                        lm = Some((e, k));
                    }
                }
                None => {
                    let _ = write!(out, "| {:>9} {:>9} {:>11} ", "-", "-", "-");
                }
            }
        }
        if with_lm {
            match lm {
                Some((e, k)) => {
                    let _ = write!(out, "| {:>9.2e} {:>10.1}", e, k);
                }
                None => {
                    let _ = write!(out, "| {:>9} {:>10}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// `problem,alpha,delta_rel,dp_mean,dp_std,idp_mean,idp_std,n_exhausted`.
pub fn idp_csv(rows: &[IdpRow]) -> String {
    let mut out =
        String::from("problem,alpha,delta_rel,dp_mean,dp_std,idp_mean,idp_std,n_exhausted\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.problem, r.alpha, r.delta_rel, r.dp_mean, r.dp_std, r.idp_mean, r.idp_std,
            r.n_exhausted
        );
    }
    out
}

/// One row per sampled iterate and cell:
/// `problem,alpha,delta_rel,k,mse,err_variance,bias_err,msr,res_variance,bias_res,se_err,se_res,delta_sq,expected_stop,n_samples`.
pub fn decompose_csv(cells: &[DecomposeCell]) -> String {
    let mut out = String::from(
        "problem,alpha,delta_rel,k,mse,err_variance,bias_err,msr,res_variance,bias_res,se_err,se_res,delta_sq,expected_stop,n_samples\n",
    );
    for cell in cells {
        let s = &cell.series;
        for (i, &k) in s.iterations.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                cell.problem,
                cell.alpha,
                cell.delta_rel,
                k,
                s.mse[i],
                s.err_variance[i],
                s.bias_err[i],
                s.msr[i],
                s.res_variance[i],
                s.bias_res[i],
                s.se_err[i],
                s.se_res[i],
                s.delta_sq,
                cell.expected_stop.map(|v| v.to_string()).unwrap_or_default(),
                s.n_samples
            );
        }
    }
    out
}

/// Summary per sweep: `sweep,checked_cases,violations,max_ratio`.
pub fn bounds_csv(outcome: &BoundsOutcome) -> String {
    let mut out = String::from("sweep,checked_cases,violations,max_ratio\n");
    for (name, report) in &outcome.reports {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            name,
            report.checked_cases,
            report.violations.len(),
            report.max_ratio
        );
    }
    out
}

/// Detailed violation listing: `sweep,label,lhs,rhs,gap`.
pub fn bounds_violations_csv(outcome: &BoundsOutcome) -> String {
    let mut out = String::from("sweep,label,lhs,rhs,gap\n");
    for (name, report) in &outcome.reports {
        for v in &report.violations {
            let _ = writeln!(out, "{},{},{},{},{}", name, v.label, v.lhs, v.rhs, v.gap);
        }
    }
    out
}

/// `problem,alpha,delta_rel,runs,n_exhausted,fraction`.
pub fn nonterm_csv(rows: &[NontermRow]) -> String {
    let mut out = String::from("problem,alpha,delta_rel,runs,n_exhausted,fraction\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.problem, r.alpha, r.delta_rel, r.runs, r.n_exhausted, r.fraction
        );
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    problem: String,
    n: usize,
    alphas: &'a [f64],
    deltas: &'a [f64],
    tau: f64,
    runs: usize,
    master_seed: u64,
    check_frequency: usize,
    max_epochs: usize,
    outputs: &'a [String],
}

/// Provenance record written next to the CSV outputs.
pub fn manifest_json(spec: &ExperimentSpec, outputs: &[String]) -> String {
    let manifest = Manifest {
        tool: "morozov",
        version: env!("CARGO_PKG_VERSION"),
        mode: spec.mode.label(),
        problem: spec.problem.label(),
        n: spec.n,
        alphas: &spec.alphas,
        deltas: &spec.deltas,
        tau: spec.tau,
        runs: spec.runs,
        master_seed: spec.master_seed,
        check_frequency: spec.check_frequency,
        max_epochs: spec.max_epochs,
        outputs,
    };
    serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail")
}

/// Writes `content` under `dir/name`, creating the directory if needed.
pub fn write_output(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Mode, ProblemKind};

    fn sample_rows() -> Vec<ResultRow> {
        vec![
            ResultRow {
                problem: "phillips".into(),
                alpha: 0.1,
                delta_rel: 1e-3,
                e_sgd: 8.6e-3,
                std_e_sgd: 4.5e-3,
                k_sgd: 1.424,
                e_lm: Some(5.72e-3),
                k_lm: Some(361.0),
                n_exhausted: 0,
            },
            ResultRow {
                problem: "phillips".into(),
                alpha: 0.5,
                delta_rel: 1e-3,
                e_sgd: 8.34e-3,
                std_e_sgd: 4.6e-3,
                k_sgd: 52.29,
                e_lm: Some(5.72e-3),
                k_lm: Some(361.0),
                n_exhausted: 2,
            },
        ]
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let rows = sample_rows();
        let csv = table_csv(&rows);
        let parsed = parse_table_csv(&csv).unwrap();
        assert_eq!(rows, parsed);
    }

    #[test]
    fn empty_rows_give_header_only() {
        let csv = table_csv(&[]);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("problem,alpha,"));
        assert!(parse_table_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn rendered_table_has_expected_columns() {
        let text = render_table(&sample_rows());
        let header: Vec<&str> = text.lines().take(2).collect();
        assert!(header[0].contains("alpha=0.1"));
        assert!(header[0].contains("alpha=0.5"));
        assert!(header[0].contains("LM"));
        assert!(header[1].contains("e_sgd"));
        assert!(header[1].contains("k_sgd"));
        assert!(header[1].contains("e_lm"));
        assert!(header[1].contains("k_lm"));
        assert!(text.lines().count() >= 3);
    }

    #[test]
    fn bounds_and_nonterm_csv_structure() {
        let mut report = crate::analysis::BoundReport::new();
        report.record(2.0, 1.0, || "case a=1".into());
        report.record(0.5, 1.0, || unreachable!());
        let outcome = BoundsOutcome {
            reports: vec![("demo".into(), report)],
        };
        let summary = bounds_csv(&outcome);
        assert_eq!(summary.lines().next().unwrap(), "sweep,checked_cases,violations,max_ratio");
        assert_eq!(summary.lines().nth(1).unwrap(), "demo,2,1,2");
        let details = bounds_violations_csv(&outcome);
        assert!(details.lines().nth(1).unwrap().starts_with("demo,case a=1,2,1,1"));

        let rows = vec![NontermRow {
            problem: "spectral".into(),
            alpha: 1.5,
            delta_rel: 1e-3,
            runs: 100,
            n_exhausted: 40,
            fraction: 0.4,
        }];
        let csv = nonterm_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "spectral,1.5,0.001,100,40,0.4");
    }

    #[test]
    fn manifest_echoes_the_spec() {
        let spec = ExperimentSpec {
            problem: ProblemKind::Shaw,
            mode: Mode::Idp,
            ..ExperimentSpec::default()
        };
        let json = manifest_json(&spec, &["idp.csv".into()]);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["problem"], "shaw");
        assert_eq!(value["mode"], "idp");
        assert_eq!(value["runs"], 100);
        assert_eq!(value["outputs"][0], "idp.csv");
    }
}
