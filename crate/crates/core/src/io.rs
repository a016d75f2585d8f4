//! JSON problem documents: {"name", "sense", "c", "lb", "ub", "integer",
//! "rows"}. Rows carry either {"support", "a", "b", "beta", "cov"} for
//! ellipsoidal uncertainty or {"support", "a", "b", "delta", "gamma"} for
//! budget uncertainty; one document holds one kind only.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetProblem, BudgetRow};
use crate::linalg::SymMatrix;
use crate::model::{EllipsoidalRow, RobustProblem, Sense, VarKind};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad problem document: {0}")]
    Format(String),
}

/// A parsed problem file, dispatched on the row kind found inside.
/// A document with no rows parses as an ellipsoidal problem.
#[derive(Debug, Clone)]
pub enum LoadedProblem {
    Ellipsoidal(RobustProblem),
    Budget(BudgetProblem),
}

impl LoadedProblem {
    pub fn name(&self) -> &str {
        match self {
            LoadedProblem::Ellipsoidal(p) => &p.name,
            LoadedProblem::Budget(p) => &p.name,
        }
    }

    pub fn num_vars(&self) -> usize {
        match self {
            LoadedProblem::Ellipsoidal(p) => p.num_vars(),
            LoadedProblem::Budget(p) => p.num_vars(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    name: String,
    sense: String,
    c: Vec<f64>,
    // Bounds use null for the unbounded side: null in lb is -inf, in ub +inf.
    lb: Vec<Option<f64>>,
    ub: Vec<Option<f64>>,
    integer: Vec<bool>,
    rows: Vec<RowDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowDoc {
    support: Vec<usize>,
    a: Vec<f64>,
    b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cov: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

fn sense_to_str(sense: Sense) -> &'static str {
    match sense {
        Sense::Maximize => "max",
        Sense::Minimize => "min",
    }
}

fn sense_from_str(s: &str) -> Result<Sense, IoError> {
    match s {
        "max" => Ok(Sense::Maximize),
        "min" => Ok(Sense::Minimize),
        other => Err(IoError::Format(format!(
            "sense must be \"max\" or \"min\", found \"{other}\""
        ))),
    }
}

fn bound_out(value: f64, unbounded_toward: f64) -> Result<Option<f64>, IoError> {
    if value.is_finite() {
        Ok(Some(value))
    } else if value == unbounded_toward {
        Ok(None)
    } else {
        Err(IoError::Format(format!(
            "bound {value} cannot be represented in JSON"
        )))
    }
}

fn finite_out(value: f64, what: &str) -> Result<f64, IoError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(IoError::Format(format!(
            "{what} is {value}, which JSON cannot represent"
        )))
    }
}

fn doc_from_problem(problem: &LoadedProblem) -> Result<ProblemDoc, IoError> {
    let (name, sense, c, lb, ub, kinds) = match problem {
        LoadedProblem::Ellipsoidal(p) => (&p.name, p.sense, &p.c, &p.lb, &p.ub, &p.kinds),
        LoadedProblem::Budget(p) => (&p.name, p.sense, &p.c, &p.lb, &p.ub, &p.kinds),
    };
    let rows = match problem {
        LoadedProblem::Ellipsoidal(p) => p
            .rows
            .iter()
            .map(|row| {
                let dim = row.support.len();
                let cov: Vec<Vec<f64>> = (0..dim)
                    .map(|i| (0..dim).map(|j| row.sigma.get(i, j)).collect())
                    .collect();
                Ok(RowDoc {
                    support: row.support.clone(),
                    a: row.a_nominal.clone(),
                    b: finite_out(row.b, "row bound b")?,
                    beta: Some(finite_out(row.beta, "beta")?),
                    cov: Some(cov),
                    delta: None,
                    gamma: None,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?,
        LoadedProblem::Budget(p) => p
            .rows
            .iter()
            .map(|row| {
                Ok(RowDoc {
                    support: row.support.clone(),
                    a: row.a_nominal.clone(),
                    b: finite_out(row.b, "row bound b")?,
                    beta: None,
                    cov: None,
                    delta: Some(row.deltas.clone()),
                    gamma: Some(finite_out(row.gamma, "gamma")?),
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?,
    };
    Ok(ProblemDoc {
        name: name.clone(),
        sense: sense_to_str(sense).to_string(),
        c: c.clone(),
        lb: lb
            .iter()
            .map(|&v| bound_out(v, f64::NEG_INFINITY))
            .collect::<Result<_, _>>()?,
        ub: ub
            .iter()
            .map(|&v| bound_out(v, f64::INFINITY))
            .collect::<Result<_, _>>()?,
        integer: kinds.iter().map(|k| *k == VarKind::Integer).collect(),
        rows,
    })
}

enum RowKind {
    Ellipsoidal,
    Budget,
}

fn classify_row(row: &RowDoc, index: usize) -> Result<RowKind, IoError> {
    match (&row.beta, &row.cov, &row.delta, &row.gamma) {
        (Some(_), Some(_), None, None) => Ok(RowKind::Ellipsoidal),
        (None, None, Some(_), Some(_)) => Ok(RowKind::Budget),
        _ => Err(IoError::Format(format!(
            "row {index} must carry either beta+cov or delta+gamma"
        ))),
    }
}

fn problem_from_doc(doc: ProblemDoc) -> Result<LoadedProblem, IoError> {
    let sense = sense_from_str(&doc.sense)?;
    let lb: Vec<f64> = doc
        .lb
        .iter()
        .map(|v| v.unwrap_or(f64::NEG_INFINITY))
        .collect();
    let ub: Vec<f64> = doc.ub.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
    let kinds: Vec<VarKind> = doc
        .integer
        .iter()
        .map(|&i| if i { VarKind::Integer } else { VarKind::Continuous })
        .collect();

    let mut kind = None;
    for (i, row) in doc.rows.iter().enumerate() {
        let this = classify_row(row, i)?;
        match (&kind, this) {
            (None, k) => kind = Some(k),
            (Some(RowKind::Ellipsoidal), RowKind::Ellipsoidal) => {}
            (Some(RowKind::Budget), RowKind::Budget) => {}
            _ => {
                return Err(IoError::Format(format!(
                    "row {i} mixes uncertainty kinds within one document"
                )))
            }
        }
    }

    match kind.unwrap_or(RowKind::Ellipsoidal) {
        RowKind::Ellipsoidal => {
            let rows = doc
                .rows
                .into_iter()
                .enumerate()
                .map(|(i, row)| {
                    let cov = row.cov.expect("classified as ellipsoidal");
                    let sigma = SymMatrix::from_rows(&cov).map_err(|e| {
                        IoError::Format(format!("row {i} covariance: {e}"))
                    })?;
                    Ok(EllipsoidalRow::new(
                        row.support,
                        row.a,
                        row.b,
                        row.beta.expect("classified as ellipsoidal"),
                        sigma,
                    ))
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            Ok(LoadedProblem::Ellipsoidal(RobustProblem {
                name: doc.name,
                sense,
                c: doc.c,
                lb,
                ub,
                kinds,
                rows,
            }))
        }
        RowKind::Budget => {
            let rows = doc
                .rows
                .into_iter()
                .map(|row| {
                    BudgetRow::new(
                        row.support,
                        row.a,
                        row.b,
                        row.delta.expect("classified as budget"),
                        row.gamma.expect("classified as budget"),
                    )
                })
                .collect();
            Ok(LoadedProblem::Budget(BudgetProblem {
                name: doc.name,
                sense,
                c: doc.c,
                lb,
                ub,
                kinds,
                rows,
            }))
        }
    }
}

/// Parses a problem document. Shape and value validation is left to the
/// owning module's `validate`; this layer only enforces the document schema.
pub fn parse_problem(text: &str) -> Result<LoadedProblem, IoError> {
    let doc: ProblemDoc = serde_json::from_str(text)?;
    problem_from_doc(doc)
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem, IoError> {
    parse_problem(&std::fs::read_to_string(path)?)
}

/// Pretty-printed document with stable key order and shortest round-trip
/// number formatting; output is deterministic byte for byte and ends with a
/// newline.
pub fn problem_to_json(problem: &LoadedProblem) -> Result<String, IoError> {
    let doc = doc_from_problem(problem)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}
