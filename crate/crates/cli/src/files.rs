//! Versioned TOML input files.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use tspvqa::{CorrelationMatrix, DistanceMatrix};

pub const PROBLEM_FORMAT: &str = "tspvqa-problem/1";
pub const MATRIX_FORMAT: &str = "tspvqa-matrix/1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    format: String,
    n: usize,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    diag_penalty: Option<f64>,
    a_sub: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    format: String,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
}

/// A loaded instance. The diagonal of `rows` is as written; the penalty is
/// applied once the final `diag_penalty` is known.
#[derive(Debug, Clone)]
pub struct Problem {
    pub rows: Vec<Vec<f64>>,
    pub diag_penalty: Option<f64>,
    pub a_sub: Option<f64>,
}

impl Problem {
    pub fn distances(&self, diag_penalty: f64) -> Result<DistanceMatrix, String> {
        DistanceMatrix::new(self.rows.clone(), diag_penalty).map_err(|e| e.to_string())
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn check_format(path: &Path, found: &str, want: &str) -> Result<(), String> {
    if found == want {
        Ok(())
    } else {
        Err(format!(
            "{}: field `format`: expected \"{want}\", found \"{found}\"",
            path.display()
        ))
    }
}

pub fn parse_problem(path: &Path, text: &str) -> Result<Problem, String> {
    let doc: ProblemDoc = toml::from_str(text).map_err(|e| format!("{}: {e}", path.display()))?;
    check_format(path, &doc.format, PROBLEM_FORMAT)?;
    if doc.d.len() != doc.n {
        return Err(format!(
            "{}: field `D`: {} rows but n = {}",
            path.display(),
            doc.d.len(),
            doc.n
        ));
    }
    for (i, row) in doc.d.iter().enumerate() {
        if row.len() != doc.n {
            return Err(format!(
                "{}: field `D`: row {} has {} entries, expected {}",
                path.display(),
                i + 1,
                row.len(),
                doc.n
            ));
        }
        for (j, v) in row.iter().enumerate() {
            if i != j && !(v.is_finite() && *v >= 0.0) {
                return Err(format!(
                    "{}: field `D`: entry ({}, {}) = {v} is not finite and non-negative",
                    path.display(),
                    i + 1,
                    j + 1
                ));
            }
        }
    }
    Ok(Problem {
        rows: doc.d,
        diag_penalty: doc.diag_penalty,
        a_sub: doc.a_sub,
    })
}

pub fn load_problem(path: &Path) -> Result<Problem, String> {
    parse_problem(path, &read(path)?)
}

pub fn load_matrix(path: &Path) -> Result<CorrelationMatrix, String> {
    let doc: MatrixDoc = toml::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    check_format(path, &doc.format, MATRIX_FORMAT)?;
    CorrelationMatrix::from_rows(&doc.x).map_err(|e| format!("{}: field `X`: {e}", path.display()))
}
