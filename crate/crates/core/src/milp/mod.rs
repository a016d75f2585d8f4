//! Self-contained mixed-integer linear solver for the master problems:
//! bounded-variable primal/dual simplex plus best-bound branch-and-bound,
//! with append-only row addition between solves.
//!
//! All rows are `≤` inequalities over sparse supports. Catalogue-valued
//! decisions must be encoded by the caller as affine integers
//! `x = v₀ + step·k`; the engine only sees the integer `k`.

mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::model::Sense;
use simplex::{LpOutcome, Tableau};

/// Branch-and-bound node ceiling before giving up with the best incumbent.
pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpRow {
    pub support: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl MilpRow {
    pub fn new(support: Vec<usize>, coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { support, coeffs, rhs }
    }

    pub fn lhs_at(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coeffs)
            .map(|(&j, a)| a * x[j])
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub sense: Sense,
    pub c: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: Vec<MilpRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error("array {0} has length {1}, expected {2}")]
    LengthMismatch(&'static str, usize, usize),
    #[error("row {row} references variable {index} out of range")]
    SupportOutOfRange { row: usize, index: usize },
    #[error("row {row}: support and coefficients differ in length")]
    RowShape { row: usize },
    #[error("row {row} has a non-finite coefficient or rhs")]
    NonFiniteRow { row: usize },
    #[error("objective coefficient {0} is not finite")]
    NonFiniteObjective(usize),
    #[error("integer variable {0} has an infinite bound")]
    UnboundedInteger(usize),
    #[error("int_tol must be positive and finite")]
    BadTolerance,
}

impl MilpModel {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Appends rows to the pool; existing rows are never touched.
    pub fn add_rows(&mut self, new_rows: Vec<MilpRow>) -> Result<(), MilpError> {
        let n = self.num_vars();
        let base = self.rows.len();
        for (k, row) in new_rows.iter().enumerate() {
            check_row(row, base + k, n)?;
        }
        self.rows.extend(new_rows);
        Ok(())
    }

    /// Structural checks; integrality-specific requirements live in
    /// `solve_milp`.
    pub fn check(&self) -> Result<(), MilpError> {
        let n = self.num_vars();
        for (name, len) in [
            ("lb", self.lb.len()),
            ("ub", self.ub.len()),
            ("integer", self.integer.len()),
        ] {
            if len != n {
                return Err(MilpError::LengthMismatch(name, len, n));
            }
        }
        for (j, v) in self.c.iter().enumerate() {
            if !v.is_finite() {
                return Err(MilpError::NonFiniteObjective(j));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            check_row(row, i, n)?;
        }
        Ok(())
    }
}

fn check_row(row: &MilpRow, index: usize, n: usize) -> Result<(), MilpError> {
    if row.support.len() != row.coeffs.len() {
        return Err(MilpError::RowShape { row: index });
    }
    for &j in &row.support {
        if j >= n {
            return Err(MilpError::SupportOutOfRange { row: index, index: j });
        }
    }
    if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
        return Err(MilpError::NonFiniteRow { row: index });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub node_count: u64,
    pub lp_iterations: u64,
}

impl MilpSolution {
    fn terminal(status: MilpStatus) -> Self {
        Self {
            status,
            x: vec![],
            objective: f64::NAN,
            node_count: 0,
            lp_iterations: 0,
        }
    }
}

/// Sign-adjusted copy of the objective so the core always maximizes.
fn canonical_c(model: &MilpModel) -> Vec<f64> {
    match model.sense {
        Sense::Maximize => model.c.clone(),
        Sense::Minimize => model.c.iter().map(|v| -v).collect(),
    }
}

fn user_objective(model: &MilpModel, canon: f64) -> f64 {
    match model.sense {
        Sense::Maximize => canon,
        Sense::Minimize => -canon,
    }
}

fn sparse_rows(model: &MilpModel) -> Vec<(Vec<(usize, f64)>, f64)> {
    model
        .rows
        .iter()
        .map(|r| {
            (
                r.support.iter().copied().zip(r.coeffs.iter().copied()).collect(),
                r.rhs,
            )
        })
        .collect()
}

fn lp_iter_limit(model: &MilpModel) -> u64 {
    let size = (model.num_vars() + model.rows.len()) as u64;
    200_000 + 200 * size
}

/// Runs the LP to optimality from a fresh all-slack start.
fn lp_from_scratch(tab: &mut Tableau, limit: u64) -> LpOutcome {
    if tab.has_artificials() {
        match tab.phase1(limit) {
            LpOutcome::Optimal => tab.primal_solve(limit),
            other => other,
        }
    } else if tab.primal_feasible() {
        tab.primal_solve(limit)
    } else {
        debug_assert!(tab.dual_feasible(), "all-slack start must be dual feasible");
        match tab.dual_solve(limit) {
            LpOutcome::Optimal => tab.primal_solve(limit),
            other => other,
        }
    }
}

/// Solves the LP relaxation (integrality flags ignored).
pub fn solve_lp(model: &MilpModel) -> Result<MilpSolution, MilpError> {
    model.check()?;
    if bounds_crossed(model) {
        return Ok(MilpSolution::terminal(MilpStatus::Infeasible));
    }
    let c = canonical_c(model);
    let rows = sparse_rows(model);
    let mut tab = Tableau::new(model.num_vars(), &c, &model.lb, &model.ub, &rows);
    let limit = lp_iter_limit(model);
    let out = lp_from_scratch(&mut tab, limit);
    let status = match out {
        LpOutcome::Optimal => MilpStatus::Optimal,
        LpOutcome::Infeasible => MilpStatus::Infeasible,
        LpOutcome::Unbounded => MilpStatus::Unbounded,
        LpOutcome::IterLimit => MilpStatus::IterLimit,
    };
    let (x, objective) = if status == MilpStatus::Optimal {
        let x = tab.structural_solution();
        let obj = user_objective(model, tab.objective(&c));
        (x, obj)
    } else {
        (vec![], f64::NAN)
    };
    Ok(MilpSolution {
        status,
        x,
        objective,
        node_count: 0,
        lp_iterations: tab.iterations,
    })
}

fn bounds_crossed(model: &MilpModel) -> bool {
    model.lb.iter().zip(&model.ub).any(|(l, u)| l > u)
}

/// Subtree of the search, characterized by its working bounds. Ordered so
/// the heap pops the best parent bound first, ties to the oldest node.
struct Node {
    bound: f64,
    id: u64,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Most fractional integer coordinate: largest distance to the nearest
/// integer above `int_tol`, ties to the lowest variable index.
fn pick_branch(x: &[f64], integer: &[bool], int_tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (j, (&v, &is_int)) in x.iter().zip(integer).enumerate() {
        if !is_int {
            continue;
        }
        let dist = (v - v.round()).abs();
        if dist > int_tol && best.map_or(true, |(_, _, d)| dist > d) {
            best = Some((j, v, dist));
        }
    }
    best.map(|(j, v, _)| (j, v))
}

/// Exact mixed-integer solve: best-bound node selection, branching on the
/// most fractional variable, floor child first. One tableau is shared across
/// the whole tree; switching nodes re-installs that node's bounds and runs
/// the dual simplex, which stays valid because bound changes never disturb
/// dual feasibility.
pub fn solve_milp(model: &MilpModel, int_tol: f64, node_limit: u64) -> Result<MilpSolution, MilpError> {
    model.check()?;
    if !(int_tol > 0.0 && int_tol.is_finite()) {
        return Err(MilpError::BadTolerance);
    }
    for (j, &is_int) in model.integer.iter().enumerate() {
        if is_int && !(model.lb[j].is_finite() && model.ub[j].is_finite()) {
            return Err(MilpError::UnboundedInteger(j));
        }
    }
    if bounds_crossed(model) {
        return Ok(MilpSolution::terminal(MilpStatus::Infeasible));
    }

    let c = canonical_c(model);
    let rows = sparse_rows(model);
    let limit = lp_iter_limit(model);
    let mut tab = Tableau::new(model.num_vars(), &c, &model.lb, &model.ub, &rows);
    let root_out = lp_from_scratch(&mut tab, limit);
    match root_out {
        LpOutcome::Infeasible => {
            let mut s = MilpSolution::terminal(MilpStatus::Infeasible);
            s.lp_iterations = tab.iterations;
            return Ok(s);
        }
        LpOutcome::Unbounded => {
            let mut s = MilpSolution::terminal(MilpStatus::Unbounded);
            s.lp_iterations = tab.iterations;
            return Ok(s);
        }
        LpOutcome::IterLimit => {
            let mut s = MilpSolution::terminal(MilpStatus::IterLimit);
            s.lp_iterations = tab.iterations;
            return Ok(s);
        }
        LpOutcome::Optimal => {}
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut node_count: u64 = 1;
    let mut next_id: u64 = 0;
    let mut hit_limit = false;

    let offer = |heap: &mut BinaryHeap<Node>,
                     incumbent: &mut Option<(f64, Vec<f64>)>,
                     next_id: &mut u64,
                     tab: &Tableau,
                     lb: &[f64],
                     ub: &[f64],
                     obj: f64| {
        let x = tab.structural_solution();
        match pick_branch(&x, &model.integer, int_tol) {
            None => {
                if incumbent.as_ref().map_or(true, |(best, _)| obj > *best) {
                    *incumbent = Some((obj, x));
                }
            }
            Some((j, v)) => {
                let mut f_ub = ub.to_vec();
                f_ub[j] = v.floor();
                heap.push(Node { bound: obj, id: *next_id, lb: lb.to_vec(), ub: f_ub });
                *next_id += 1;
                let mut c_lb = lb.to_vec();
                c_lb[j] = v.floor() + 1.0;
                heap.push(Node { bound: obj, id: *next_id, lb: c_lb, ub: ub.to_vec() });
                *next_id += 1;
            }
        }
    };

    let root_obj = tab.objective(&c);
    offer(&mut heap, &mut incumbent, &mut next_id, &tab, &model.lb, &model.ub, root_obj);

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound <= best + 1e-9 {
                break;
            }
        }
        if node_count >= node_limit {
            hit_limit = true;
            break;
        }
        if node.lb.iter().zip(&node.ub).any(|(l, u)| l > u) {
            continue;
        }
        tab.apply_bounds(&node.lb, &node.ub);
        tab.reset_pricing();
        let out = if tab.restore_dual_feasibility() {
            tab.dual_solve(limit)
        } else {
            // no finite bound to flip to: rebuild rather than trust the basis
            let carried = tab.iterations;
            tab = Tableau::new(model.num_vars(), &c, &node.lb, &node.ub, &rows);
            tab.iterations += carried;
            lp_from_scratch(&mut tab, limit)
        };
        node_count += 1;
        debug_assert!(
            out != LpOutcome::Optimal || tab.dual_feasible(),
            "node LP finished without dual feasibility"
        );
        match out {
            LpOutcome::Infeasible => continue,
            LpOutcome::IterLimit | LpOutcome::Unbounded => {
                hit_limit = true;
                break;
            }
            LpOutcome::Optimal => {
                let obj = tab.objective(&c);
                if let Some((best, _)) = &incumbent {
                    if obj <= best + 1e-9 {
                        continue;
                    }
                }
                offer(&mut heap, &mut incumbent, &mut next_id, &tab, &node.lb, &node.ub, obj);
            }
        }
    }

    let status = if hit_limit {
        MilpStatus::IterLimit
    } else if incumbent.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    };
    let (objective, x) = match incumbent {
        Some((obj, x)) => (user_objective(model, obj), x),
        None => (f64::NAN, vec![]),
    };
    Ok(MilpSolution {
        status,
        x,
        objective,
        node_count,
        lp_iterations: tab.iterations,
    })
}
