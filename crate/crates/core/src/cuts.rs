//! Cutting-plane decomposition for the robust counterpart: a master MILP
//! over the nominal rows plus accumulated tangent hyperplanes alternates
//! with closed-form worst-case subproblems until every conic row holds,
//! the iterates stall, or the iteration cap is reached.

use thiserror::Error;

use crate::linalg::{self, dot};
use crate::milp::{self, MilpModel, MilpRow, MilpStatus, DEFAULT_NODE_LIMIT};
use crate::model::{
    validate, CutPolicy, EllipsoidalRow, ModelError, RobustProblem, SolverConfig, VarKind,
};
use crate::reliability::{self, ReliabilityReport};

/// Coefficientwise tolerance under which a candidate cut counts as a
/// duplicate of the nominal row or an existing cut.
const DUP_TOL: f64 = 1e-12;

/// Tangent-hyperplane cut `âᵀx ≤ b` for one row, generated at one iterate.
#[derive(Debug, Clone)]
pub struct Cut {
    pub row_index: usize,
    /// Coefficients over the row's support.
    pub a_hat: Vec<f64>,
    pub rhs: f64,
    pub created_at_iter: usize,
    /// Full-length iterate the cut was generated at.
    pub generated_at: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    ConicOptimal,
    Stalled,
    IterLimit,
    MasterInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowViolation {
    pub row_index: usize,
    /// `conic_lhs − b`, positive for violated rows.
    pub amount: f64,
}

/// One master solve and its conic evaluation.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub objective: f64,
    pub violations: Vec<RowViolation>,
    pub cuts_added: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: Vec<IterationRecord>,
    pub final_status: SolveStatus,
    /// Last iterate; `None` only when a master was infeasible.
    pub final_x: Option<Vec<f64>>,
    pub final_objective: Option<f64>,
    pub reliability: Option<ReliabilityReport>,
    /// Every cut added across the run, in creation order.
    pub cuts: Vec<Cut>,
}

impl SolveReport {
    /// Iteration trace as CSV with columns
    /// `iter,objective,x,n_violated,max_violation,cuts_added`,
    /// the iterate semicolon-joined.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,x,n_violated,max_violation,cuts_added\n");
        for rec in &self.iterations {
            let xs: Vec<String> = rec.x.iter().map(|v| v.to_string()).collect();
            let max_violation = rec
                .violations
                .iter()
                .map(|v| v.amount)
                .fold(0.0f64, f64::max);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.iter,
                rec.objective,
                xs.join(";"),
                rec.violations.len(),
                max_violation,
                rec.cuts_added
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] milp::MilpError),
    #[error("master problem unbounded at iteration {iter}")]
    MasterUnbounded { iter: usize },
    #[error("master problem hit the branch-and-bound node limit at iteration {iter}")]
    MasterNodeLimit { iter: usize },
}

/// Worst-case realization of one row's coefficients at `x`:
/// `â = a + β·Σx/√(xᵀΣx)`, so that `âᵀx` equals the conic left-hand
/// side. Vanishing variance at `x` (or `β = 0`) degenerates to the
/// nominal row.
pub fn worst_case_row(row: &EllipsoidalRow, x: &[f64], row_index: usize, iter: usize) -> Cut {
    let xs = row.gather(x);
    let q = linalg::quad_form(&row.sigma, &xs).expect("row shape validated");
    let a_hat = if row.beta == 0.0 || q <= 0.0 {
        row.a_nominal.clone()
    } else {
        let scale = row.beta / q.sqrt();
        let sx = row.sigma.mat_vec(&xs).expect("row shape validated");
        row.a_nominal
            .iter()
            .zip(&sx)
            .map(|(a, s)| a + scale * s)
            .collect()
    };
    Cut {
        row_index,
        a_hat,
        rhs: row.b,
        created_at_iter: iter,
        generated_at: x.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    ConicOptimal,
    Stalled,
    Continue,
}

/// Stopping rule: a conic-feasible iterate stops immediately; otherwise a
/// step shorter than `eps_stall` stops as stalled. The distance is
/// measured against the previous iterate, so the first never stalls.
pub fn check_stop(
    x_now: &[f64],
    x_prev: Option<&[f64]>,
    violations: &[RowViolation],
    config: &SolverConfig,
) -> StopDecision {
    if violations.is_empty() {
        return StopDecision::ConicOptimal;
    }
    if let Some(prev) = x_prev {
        let dist2: f64 = x_now
            .iter()
            .zip(prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if dist2.sqrt() < config.eps_stall {
            return StopDecision::Stalled;
        }
    }
    StopDecision::Continue
}

fn evaluate_violations(problem: &RobustProblem, x: &[f64], feas_tol: f64) -> Vec<RowViolation> {
    problem
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let slack = reliability::conic_lhs(row, x) - row.b;
            (slack > feas_tol * (1.0 + row.b.abs())).then_some(RowViolation {
                row_index: i,
                amount: slack,
            })
        })
        .collect()
}

/// Candidate duplicates the master's row set when it matches the row's
/// nominal coefficients or an existing cut of the same row within
/// `DUP_TOL` coefficientwise (the right-hand side is shared).
fn is_duplicate(candidate: &[f64], row: &EllipsoidalRow, cuts: &[Cut], row_index: usize) -> bool {
    let close =
        |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DUP_TOL);
    close(candidate, &row.a_nominal)
        || cuts
            .iter()
            .any(|c| c.row_index == row_index && close(candidate, &c.a_hat))
}

/// Runs the decomposition: solve the master MILP, snap integer
/// coordinates, evaluate every conic row, stop or cut, repeat for up to
/// `config.max_iter` master solves.
///
/// An infeasible master at any iteration proves the robust problem
/// infeasible (cuts only shrink the feasible region), reported as
/// `MasterInfeasible` with no final iterate.
pub fn solve(problem: &RobustProblem, config: &SolverConfig) -> Result<SolveReport, SolveError> {
    config.check()?;
    validate(problem).into_result()?;

    let integer: Vec<bool> = problem
        .kinds
        .iter()
        .map(|k| *k == VarKind::Integer)
        .collect();
    let mut master = MilpModel {
        sense: problem.sense,
        c: problem.c.clone(),
        lb: problem.lb.clone(),
        ub: problem.ub.clone(),
        integer,
        rows: problem
            .rows
            .iter()
            .map(|r| MilpRow::new(r.support.clone(), r.a_nominal.clone(), r.b))
            .collect(),
    };

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut cuts: Vec<Cut> = Vec::new();
    let mut x_prev: Option<Vec<f64>> = None;

    for iter in 1..=config.max_iter {
        let sol = milp::solve_milp(&master, config.int_tol, DEFAULT_NODE_LIMIT)?;
        match sol.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible => {
                return Ok(SolveReport {
                    iterations,
                    final_status: SolveStatus::MasterInfeasible,
                    final_x: None,
                    final_objective: None,
                    reliability: None,
                    cuts,
                });
            }
            MilpStatus::Unbounded => return Err(SolveError::MasterUnbounded { iter }),
            MilpStatus::IterLimit => return Err(SolveError::MasterNodeLimit { iter }),
        }

        let mut x = sol.x;
        for (j, is_int) in master.integer.iter().enumerate() {
            if *is_int {
                x[j] = x[j].round();
            }
        }
        let objective = dot(&problem.c, &x);

        let violations = evaluate_violations(problem, &x, config.feas_tol);
        let decision = check_stop(&x, x_prev.as_deref(), &violations, config);

        let mut cuts_added = 0;
        if decision == StopDecision::Continue && iter < config.max_iter {
            for (i, row) in problem.rows.iter().enumerate() {
                let wanted = match config.cut_policy {
                    CutPolicy::AllRows => true,
                    CutPolicy::ViolatedOnly => {
                        violations.iter().any(|v| v.row_index == i)
                    }
                };
                if !wanted {
                    continue;
                }
                let cut = worst_case_row(row, &x, i, iter);
                if is_duplicate(&cut.a_hat, row, &cuts, i) {
                    continue;
                }
                master.add_rows(vec![MilpRow::new(
                    row.support.clone(),
                    cut.a_hat.clone(),
                    cut.rhs,
                )])?;
                cuts.push(cut);
                cuts_added += 1;
            }
        }

        iterations.push(IterationRecord {
            iter,
            x: x.clone(),
            objective,
            violations,
            cuts_added,
        });

        match decision {
            StopDecision::ConicOptimal => {
                return Ok(finish(
                    problem,
                    config,
                    iterations,
                    cuts,
                    x,
                    objective,
                    SolveStatus::ConicOptimal,
                ));
            }
            StopDecision::Stalled => {
                return Ok(finish(
                    problem,
                    config,
                    iterations,
                    cuts,
                    x,
                    objective,
                    SolveStatus::Stalled,
                ));
            }
            StopDecision::Continue => x_prev = Some(x),
        }
    }

    let last = iterations.last().expect("at least one master solved");
    let (x, objective) = (last.x.clone(), last.objective);
    Ok(finish(
        problem,
        config,
        iterations,
        cuts,
        x,
        objective,
        SolveStatus::IterLimit,
    ))
}

fn finish(
    problem: &RobustProblem,
    config: &SolverConfig,
    iterations: Vec<IterationRecord>,
    cuts: Vec<Cut>,
    x: Vec<f64>,
    objective: f64,
    status: SolveStatus,
) -> SolveReport {
    let reliability = reliability::report_with_tol(problem, &x, config.feas_tol);
    SolveReport {
        iterations,
        final_status: status,
        final_x: Some(x),
        final_objective: Some(objective),
        reliability: Some(reliability),
        cuts,
    }
}
