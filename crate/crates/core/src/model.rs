//! Problem model: uncertain rows with ellipsoidal coefficient sets over
//! sparse supports, solver configuration, and structural validation.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::linalg::{self, LinalgError, LowerTriangular, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
}

/// One uncertain `≤` row. The coefficient vector over `support` lives in the
/// ellipsoid centered at `a_nominal` with shape `sigma`, scaled by `beta`;
/// coefficients outside the support are fixed at zero.
#[derive(Debug)]
pub struct EllipsoidalRow {
    pub support: Vec<usize>,
    pub a_nominal: Vec<f64>,
    pub b: f64,
    pub beta: f64,
    pub sigma: SymMatrix,
    chol: OnceLock<LowerTriangular>,
}

impl Clone for EllipsoidalRow {
    fn clone(&self) -> Self {
        Self {
            support: self.support.clone(),
            a_nominal: self.a_nominal.clone(),
            b: self.b,
            beta: self.beta,
            sigma: self.sigma.clone(),
            chol: OnceLock::new(),
        }
    }
}

impl EllipsoidalRow {
    pub fn new(
        support: Vec<usize>,
        a_nominal: Vec<f64>,
        b: f64,
        beta: f64,
        sigma: SymMatrix,
    ) -> Self {
        Self {
            support,
            a_nominal,
            b,
            beta,
            sigma,
            chol: OnceLock::new(),
        }
    }

    /// Cholesky factor of `sigma`, computed on first use and cached.
    pub fn chol(&self) -> Result<&LowerTriangular, LinalgError> {
        if let Some(l) = self.chol.get() {
            return Ok(l);
        }
        let l = linalg::cholesky(&self.sigma)?;
        Ok(self.chol.get_or_init(|| l))
    }

    /// Gathers the support coordinates out of a full-length point.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.support.iter().map(|&j| x[j]).collect()
    }
}

/// Uncertain MILP in decision variables `x`: optimize `cᵀx` subject to bounds,
/// integrality, and the robust rows.
#[derive(Debug, Clone)]
pub struct RobustProblem {
    pub name: String,
    pub sense: Sense,
    pub c: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub kinds: Vec<VarKind>,
    pub rows: Vec<EllipsoidalRow>,
}

impl RobustProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutPolicy {
    /// Refresh the worst-case cut of every row each iteration,
    /// violated or not.
    AllRows,
    /// Cut only the rows whose conic constraint is violated.
    ViolatedOnly,
}

/// Knobs for the cutting-plane loop and the integer engine underneath it.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stall threshold on the Euclidean step between consecutive iterates.
    pub eps_stall: f64,
    /// Conic feasibility tolerance, relative to `1 + |b|` per row.
    pub feas_tol: f64,
    /// Cap on cutting-plane iterations.
    pub max_iter: usize,
    pub cut_policy: CutPolicy,
    /// Integrality tolerance in the branch-and-bound engine.
    pub int_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_stall: 1e-8,
            feas_tol: 1e-6,
            max_iter: 100,
            cut_policy: CutPolicy::AllRows,
            int_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), ModelError> {
        if !(self.eps_stall > 0.0 && self.eps_stall.is_finite()) {
            return Err(ModelError::BadConfig("eps_stall must be positive"));
        }
        if !(self.feas_tol > 0.0 && self.feas_tol.is_finite()) {
            return Err(ModelError::BadConfig("feas_tol must be positive"));
        }
        if !(self.int_tol > 0.0 && self.int_tol.is_finite()) {
            return Err(ModelError::BadConfig("int_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(ModelError::BadConfig("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
    #[error("row index {0} out of range ({1} rows)")]
    RowOutOfRange(usize, usize),
    #[error("pinned coefficient must be finite, got {0}")]
    NonFiniteCoefficient(f64),
    #[error("pinned variance must be finite and nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("problem failed validation:\n{0}")]
    Invalid(ValidationReport),
}

/// One structural defect found by `validate`.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ArrayLengthMismatch { field: &'static str, expected: usize, found: usize },
    BoundsReversed { var: usize, lb: f64, ub: f64 },
    NonFinite { field: &'static str, index: usize },
    SupportOutOfRange { row: usize, index: usize },
    DuplicateSupport { row: usize, index: usize },
    RowShapeMismatch { row: usize, field: &'static str, expected: usize, found: usize },
    NegativeBeta { row: usize, beta: f64 },
    NotSymmetric { row: usize },
    NotPositiveSemidefinite { row: usize },
    NegativeDelta { row: usize, position: usize, delta: f64 },
    GammaOutOfRange { row: usize, gamma: f64, max: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            ArrayLengthMismatch { field, expected, found } => {
                write!(f, "{field} has length {found}, expected {expected}")
            }
            BoundsReversed { var, lb, ub } => {
                write!(f, "variable {var} has lb {lb} > ub {ub}")
            }
            NonFinite { field, index } => write!(f, "{field}[{index}] is not finite"),
            SupportOutOfRange { row, index } => {
                write!(f, "row {row} references variable {index} out of range")
            }
            DuplicateSupport { row, index } => {
                write!(f, "row {row} lists variable {index} more than once")
            }
            RowShapeMismatch { row, field, expected, found } => {
                write!(f, "row {row}: {field} has length {found}, expected {expected}")
            }
            NegativeBeta { row, beta } => write!(f, "row {row} has negative beta {beta}"),
            NotSymmetric { row } => write!(f, "row {row}: covariance is not symmetric"),
            NotPositiveSemidefinite { row } => {
                write!(f, "row {row}: covariance is not positive semidefinite")
            }
            NegativeDelta { row, position, delta } => {
                write!(f, "row {row}: deviation {position} is negative ({delta})")
            }
            GammaOutOfRange { row, gamma, max } => {
                write!(f, "row {row}: gamma {gamma} outside [0, {max}]")
            }
        }
    }
}

/// Everything `validate` found, in deterministic order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ModelError::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_vector(
    report: &mut ValidationReport,
    field: &'static str,
    v: &[f64],
    allow_inf: bool,
) {
    for (i, x) in v.iter().enumerate() {
        let bad = if allow_inf { x.is_nan() } else { !x.is_finite() };
        if bad {
            report.violations.push(Violation::NonFinite { field, index: i });
        }
    }
}

/// Shared checks for the variable block (`c`, `lb`, `ub`, kinds).
pub(crate) fn validate_variables(
    report: &mut ValidationReport,
    c: &[f64],
    lb: &[f64],
    ub: &[f64],
    kinds_len: usize,
) {
    let n = c.len();
    for (field, len) in [("lb", lb.len()), ("ub", ub.len()), ("integer", kinds_len)] {
        if len != n {
            report.violations.push(Violation::ArrayLengthMismatch {
                field,
                expected: n,
                found: len,
            });
        }
    }
    check_vector(report, "c", c, false);
    check_vector(report, "lb", lb, true);
    check_vector(report, "ub", ub, true);
    for (j, (&l, &u)) in lb.iter().zip(ub).enumerate() {
        if l > u {
            report.violations.push(Violation::BoundsReversed { var: j, lb: l, ub: u });
        }
    }
}

pub(crate) fn validate_support(
    report: &mut ValidationReport,
    row: usize,
    support: &[usize],
    num_vars: usize,
) {
    let mut seen = std::collections::BTreeSet::new();
    for &j in support {
        if j >= num_vars {
            report
                .violations
                .push(Violation::SupportOutOfRange { row, index: j });
        } else if !seen.insert(j) {
            report
                .violations
                .push(Violation::DuplicateSupport { row, index: j });
        }
    }
}

/// Structural validation: array shapes, bound order, support sanity,
/// nonnegative beta, symmetric PSD covariance. Collects every defect rather
/// than stopping at the first.
pub fn validate(problem: &RobustProblem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = problem.num_vars();
    validate_variables(
        &mut report,
        &problem.c,
        &problem.lb,
        &problem.ub,
        problem.kinds.len(),
    );
    for (i, row) in problem.rows.iter().enumerate() {
        validate_support(&mut report, i, &row.support, n);
        let k = row.support.len();
        if row.a_nominal.len() != k {
            report.violations.push(Violation::RowShapeMismatch {
                row: i,
                field: "a",
                expected: k,
                found: row.a_nominal.len(),
            });
        }
        if row.sigma.dim() != k {
            report.violations.push(Violation::RowShapeMismatch {
                row: i,
                field: "cov",
                expected: k,
                found: row.sigma.dim(),
            });
            continue;
        }
        check_vector(&mut report, "a", &row.a_nominal, false);
        if !row.b.is_finite() || !row.beta.is_finite() {
            report.violations.push(Violation::NonFinite { field: "row", index: i });
        }
        if row.beta < 0.0 {
            report.violations.push(Violation::NegativeBeta { row: i, beta: row.beta });
        }
        match row.chol() {
            Ok(_) => {}
            Err(LinalgError::NotSymmetric { .. }) => {
                report.violations.push(Violation::NotSymmetric { row: i });
            }
            Err(_) => {
                report
                    .violations
                    .push(Violation::NotPositiveSemidefinite { row: i });
            }
        }
    }
    report
}

/// Moves a known constant out of a row's right-hand side into an explicit
/// variable fixed at 1, so the constant can carry uncertainty. Appends the
/// pinned variable (bounds [1, 1], zero cost) and augments the designated
/// row's support, nominal vector, and covariance with the given coefficient
/// and variance; the objective and optimal set are unchanged.
pub fn pin_constant_term(
    problem: &RobustProblem,
    row_index: usize,
    coefficient: f64,
    variance: f64,
) -> Result<RobustProblem, ModelError> {
    if row_index >= problem.rows.len() {
        return Err(ModelError::RowOutOfRange(row_index, problem.rows.len()));
    }
    if !coefficient.is_finite() {
        return Err(ModelError::NonFiniteCoefficient(coefficient));
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(ModelError::NegativeVariance(variance));
    }

    let mut out = problem.clone();
    let pin = out.num_vars();
    out.c.push(0.0);
    out.lb.push(1.0);
    out.ub.push(1.0);
    out.kinds.push(VarKind::Continuous);

    let row = &problem.rows[row_index];
    let k = row.support.len();
    let mut support = row.support.clone();
    support.push(pin);
    let mut a = row.a_nominal.clone();
    a.push(coefficient);
    let mut cov = row.sigma.rows();
    for r in cov.iter_mut() {
        r.push(0.0);
    }
    let mut last = vec![0.0; k + 1];
    last[k] = variance;
    cov.push(last);
    let sigma = SymMatrix::from_rows(&cov).expect("augmented covariance stays symmetric");
    out.rows[row_index] = EllipsoidalRow::new(support, a, row.b, row.beta, sigma);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var_problem() -> RobustProblem {
        let sigma = SymMatrix::from_rows(&[vec![0.01, 0.016], vec![0.016, 0.04]]).unwrap();
        RobustProblem {
            name: "t".into(),
            sense: Sense::Maximize,
            c: vec![3.0, 2.0],
            lb: vec![0.0, 0.0],
            ub: vec![10.0, 10.0],
            kinds: vec![VarKind::Integer, VarKind::Integer],
            rows: vec![EllipsoidalRow::new(
                vec![0, 1],
                vec![1.0, 2.0],
                10.0,
                2.0,
                sigma,
            )],
        }
    }

    #[test]
    fn valid_problem_passes() {
        assert!(validate(&two_var_problem()).is_ok());
    }

    #[test]
    fn reversed_bounds_flagged() {
        let mut p = two_var_problem();
        p.lb[1] = 11.0;
        let report = validate(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BoundsReversed { var: 1, .. })));
    }

    #[test]
    fn negative_beta_flagged() {
        let mut p = two_var_problem();
        p.rows[0].beta = -0.5;
        let report = validate(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NegativeBeta { row: 0, .. })));
    }

    #[test]
    fn indefinite_covariance_flagged() {
        let mut p = two_var_problem();
        p.rows[0] = EllipsoidalRow::new(
            vec![0, 1],
            vec![1.0, 2.0],
            10.0,
            2.0,
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
        );
        let report = validate(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotPositiveSemidefinite { row: 0 })));
    }

    #[test]
    fn support_out_of_range_flagged() {
        let mut p = two_var_problem();
        p.rows[0].support = vec![0, 7];
        let report = validate(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SupportOutOfRange { row: 0, index: 7 })));
    }

    #[test]
    fn duplicate_support_flagged() {
        let mut p = two_var_problem();
        p.rows[0].support = vec![1, 1];
        let report = validate(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateSupport { row: 0, index: 1 })));
    }

    #[test]
    fn shape_mismatch_flagged() {
        let mut p = two_var_problem();
        p.rows[0].a_nominal = vec![1.0];
        let report = validate(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RowShapeMismatch { row: 0, field: "a", .. })));
    }

    #[test]
    fn multiple_defects_all_collected() {
        let mut p = two_var_problem();
        p.lb[0] = 99.0;
        p.rows[0].beta = -1.0;
        let report = validate(&p);
        assert_eq!(report.violations.len(), 2);
    }

    #[test]
    fn config_default_is_valid() {
        assert!(SolverConfig::default().check().is_ok());
    }

    #[test]
    fn config_rejects_nonpositive_tolerances() {
        for patch in [
            |c: &mut SolverConfig| c.eps_stall = 0.0,
            |c: &mut SolverConfig| c.feas_tol = -1e-9,
            |c: &mut SolverConfig| c.int_tol = f64::NAN,
            |c: &mut SolverConfig| c.max_iter = 0,
        ] {
            let mut c = SolverConfig::default();
            patch(&mut c);
            assert!(c.check().is_err());
        }
    }

    #[test]
    fn pin_appends_fixed_variable() {
        let p = two_var_problem();
        let pinned = pin_constant_term(&p, 0, 5.0, 0.25).unwrap();
        assert_eq!(pinned.num_vars(), 3);
        assert_eq!(pinned.lb[2], 1.0);
        assert_eq!(pinned.ub[2], 1.0);
        assert_eq!(pinned.c[2], 0.0);
        assert_eq!(pinned.kinds[2], VarKind::Continuous);
        let row = &pinned.rows[0];
        assert_eq!(row.support, vec![0, 1, 2]);
        assert_eq!(row.a_nominal, vec![1.0, 2.0, 5.0]);
        assert_eq!(row.sigma.get(2, 2), 0.25);
        assert_eq!(row.sigma.get(0, 2), 0.0);
        assert!(validate(&pinned).is_ok());
    }

    #[test]
    fn pin_rejects_bad_inputs() {
        let p = two_var_problem();
        assert!(matches!(
            pin_constant_term(&p, 3, 1.0, 0.0),
            Err(ModelError::RowOutOfRange(3, 1))
        ));
        assert!(matches!(
            pin_constant_term(&p, 0, f64::INFINITY, 0.0),
            Err(ModelError::NonFiniteCoefficient(_))
        ));
        assert!(matches!(
            pin_constant_term(&p, 0, 1.0, -0.5),
            Err(ModelError::NegativeVariance(_))
        ));
    }

    #[test]
    fn cloned_row_recomputes_factor() {
        let p = two_var_problem();
        let _ = p.rows[0].chol().unwrap();
        let q = p.clone();
        let l = q.rows[0].chol().unwrap();
        assert!((l.get(0, 0) - 0.1).abs() < 1e-12);
    }
}
