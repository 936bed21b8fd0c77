//! Problem persistence: the matrix goes to a MatrixMarket dense-array file
//! (`%%MatrixMarket matrix array real general`, column-major values), the
//! rest to a JSON sidecar `{name, n, m, params, x_true, y_true}` next to it.
//! Values are printed with Rust's shortest round-trip formatting, so a
//! save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problems::InverseProblem;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    name: String,
    n: usize,
    m: usize,
    params: BTreeMap<String, f64>,
    x_true: Vec<f64>,
    y_true: Vec<f64>,
}

/// Resolves the `.mtx`/`.json` pair for a base path. A trailing `.mtx`
/// extension is accepted and stripped.
fn file_pair(path: &Path) -> (PathBuf, PathBuf) {
    let stem = if path.extension().is_some_and(|e| e == "mtx") {
        path.with_extension("")
    } else {
        path.to_path_buf()
    };
    (stem.with_extension("mtx"), stem.with_extension("json"))
}

/// Serializes a matrix in MatrixMarket dense-array format.
pub fn matrix_market_string(matrix: &Matrix, comment: &str) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    if !comment.is_empty() {
        let _ = writeln!(out, "% {comment}");
    }
    let _ = writeln!(out, "{} {}", matrix.nrows(), matrix.ncols());
    for j in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            let _ = writeln!(out, "{}", matrix[(i, j)]);
        }
    }
    out
}

/// Parses MatrixMarket dense-array content. `origin` is used in error messages.
pub fn parse_matrix_market(content: &str, origin: &str) -> Result<Matrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "array"
        || tokens[3] != "real"
        || tokens[4] != "general"
    {
        return Err(err(
            1,
            format!("expected '%%MatrixMarket matrix array real general', got '{header}'"),
        ));
    }
    let mut dims: Option<(usize, usize)> = None;
    let mut data: Vec<f64> = Vec::new();
    let mut expected = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        match dims {
            None => {
                let mut parts = line.split_whitespace();
                let n: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line_no, format!("bad dimension line '{line}'")))?;
                let m: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line_no, format!("bad dimension line '{line}'")))?;
                if parts.next().is_some() {
                    return Err(err(line_no, "trailing tokens after dimensions".to_string()));
                }
                if n == 0 || m == 0 {
                    return Err(err(line_no, "dimensions must be >= 1".to_string()));
                }
                expected = n * m;
                data.reserve(expected);
                dims = Some((n, m));
            }
            Some(_) => {
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| err(line_no, format!("bad value '{tok}'")))?;
                    if !v.is_finite() {
                        return Err(err(line_no, format!("non-finite value '{tok}'")));
                    }
                    data.push(v);
                }
                if data.len() > expected {
                    return Err(err(line_no, "more values than the header declares".into()));
                }
            }
        }
    }
    let (n, m) = dims.ok_or_else(|| err(1, "missing dimension line".to_string()))?;
    if data.len() != expected {
        return Err(err(
            content.lines().count(),
            format!("expected {expected} values, found {}", data.len()),
        ));
    }
    // Values are stored column-major.
    let mut matrix = Matrix::zeros(n, m);
    let mut it = data.into_iter();
    for j in 0..m {
        for i in 0..n {
            matrix[(i, j)] = it.next().unwrap();
        }
    }
    Ok(matrix)
}

/// Writes `<path>.mtx` and `<path>.json`.
pub fn save_problem(problem: &InverseProblem, path: &Path) -> Result<()> {
    let (mtx_path, json_path) = file_pair(path);
    let mtx = matrix_market_string(&problem.matrix, &problem.name);
    fs::write(&mtx_path, mtx).map_err(|e| Error::io(&mtx_path, e))?;
    let sidecar = Sidecar {
        name: problem.name.clone(),
        n: problem.n(),
        m: problem.m(),
        params: problem.params.clone(),
        x_true: problem.x_true.clone(),
        y_true: problem.y_true.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::InvalidArgument(format!("sidecar serialization failed: {e}")))?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

/// Loads a problem saved by [`save_problem`] and re-validates its invariants.
pub fn load_problem(path: &Path) -> Result<InverseProblem> {
    let (mtx_path, json_path) = file_pair(path);
    let content = fs::read_to_string(&mtx_path).map_err(|e| Error::io(&mtx_path, e))?;
    let matrix = parse_matrix_market(&content, &mtx_path.display().to_string())?;
    let json = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&json).map_err(|e| Error::Parse {
        path: json_path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if sidecar.n != matrix.nrows() || sidecar.m != matrix.ncols() {
        return Err(Error::InvalidArgument(format!(
            "sidecar dimensions {}x{} do not match matrix {}x{}",
            sidecar.n,
            sidecar.m,
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    InverseProblem::new(
        sidecar.name,
        matrix,
        sidecar.x_true,
        sidecar.y_true,
        sidecar.params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_gravity, gen_spectral};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = gen_spectral(7, 0.5, 1.2, 2.0, 5).unwrap();
        let base = dir.path().join("spectral7");
        save_problem(&p, &base).unwrap();
        let q = load_problem(&base).unwrap();
        assert_eq!(p, q);
        // Accepting the .mtx path directly resolves the same pair.
        let q2 = load_problem(&base.with_extension("mtx")).unwrap();
        assert_eq!(p, q2);
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = gen_gravity(6, 0.25).unwrap();
        let base = dir.path().join("g");
        save_problem(&p, &base).unwrap();
        let mtx = base.with_extension("mtx");
        let content = fs::read_to_string(&mtx).unwrap();
        let cut = content.len() * 2 / 3;
        fs::write(&mtx, &content[..cut]).unwrap();
        match load_problem(&base) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_and_bad_values_are_rejected() {
        assert!(matches!(
            parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2\n", "t"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_matrix_market(
                "%%MatrixMarket matrix array real general\n2 1\n1.0\nnope\n",
                "t"
            ),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn mismatched_sidecar_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = gen_gravity(6, 0.25).unwrap();
        let base = dir.path().join("g");
        save_problem(&p, &base).unwrap();
        let json_path = base.with_extension("json");
        let json = fs::read_to_string(&json_path).unwrap();
        // Corrupt x_true so A x != y.
        let bad = json.replacen("\"x_true\": [\n    0.", "\"x_true\": [\n    9.", 1);
        assert_ne!(bad, json);
        fs::write(&json_path, bad).unwrap();
        assert!(load_problem(&base).is_err());
    }

    #[test]
    fn column_major_order() {
        let m = Matrix::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = matrix_market_string(&m, "");
        let values: Vec<&str> = s.lines().skip(2).collect();
        assert_eq!(values, vec!["1", "4", "2", "5", "3", "6"]);
        let back = parse_matrix_market(&s, "t").unwrap();
        assert_eq!(back, m);
    }
}
