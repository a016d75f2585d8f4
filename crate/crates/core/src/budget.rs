//! Budget-of-uncertainty baseline: interval deviations with a per-row
//! budget Γ, dualized into one linear program and solved by the MILP
//! engine. The comparison method next to the ellipsoidal cutting planes.

use thiserror::Error;

use crate::linalg::dot;
use crate::milp::{self, MilpModel, MilpRow, MilpStatus, DEFAULT_NODE_LIMIT};
use crate::model::{
    check_vector, validate_support, validate_variables, ModelError, Sense, ValidationReport,
    VarKind, Violation,
};

/// One uncertain `≤` row under interval uncertainty: each coefficient may
/// deviate from `a_nominal` by at most its `delta`, and at most `gamma`
/// coefficients (fractionally counted) deviate at once.
#[derive(Debug, Clone)]
pub struct BudgetRow {
    pub support: Vec<usize>,
    pub a_nominal: Vec<f64>,
    pub b: f64,
    pub deltas: Vec<f64>,
    pub gamma: f64,
}

impl BudgetRow {
    pub fn new(
        support: Vec<usize>,
        a_nominal: Vec<f64>,
        b: f64,
        deltas: Vec<f64>,
        gamma: f64,
    ) -> Self {
        Self {
            support,
            a_nominal,
            b,
            deltas,
            gamma,
        }
    }

    /// Number of genuinely uncertain coefficients (positive deltas).
    pub fn uncertain_count(&self) -> usize {
        self.deltas.iter().filter(|d| **d > 0.0).count()
    }
}

/// Uncertain MILP over budget rows, mirroring `RobustProblem`.
#[derive(Debug, Clone)]
pub struct BudgetProblem {
    pub name: String,
    pub sense: Sense,
    pub c: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub kinds: Vec<VarKind>,
    pub rows: Vec<BudgetRow>,
}

impl BudgetProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }
}

#[derive(Debug, Error)]
pub enum BudgetError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] milp::MilpError),
}

/// Structural validation: array shapes, bound order, support sanity,
/// nonnegative deviations, budget within range. Collects every defect.
pub fn validate_budget(problem: &BudgetProblem) -> ValidationReport {
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
        for (field, len) in [("a", row.a_nominal.len()), ("delta", row.deltas.len())] {
            if len != k {
                report.violations.push(Violation::RowShapeMismatch {
                    row: i,
                    field,
                    expected: k,
                    found: len,
                });
            }
        }
        check_vector(&mut report, "a", &row.a_nominal, false);
        check_vector(&mut report, "delta", &row.deltas, false);
        if !row.b.is_finite() || !row.gamma.is_finite() {
            report
                .violations
                .push(Violation::NonFinite { field: "row", index: i });
        }
        for (t, &d) in row.deltas.iter().enumerate() {
            if d < 0.0 {
                report.violations.push(Violation::NegativeDelta {
                    row: i,
                    position: t,
                    delta: d,
                });
            }
        }
        let max = row.uncertain_count();
        if row.gamma.is_finite() && !(0.0..=max as f64).contains(&row.gamma) {
            report.violations.push(Violation::GammaOutOfRange {
                row: i,
                gamma: row.gamma,
                max,
            });
        }
    }
    report
}

/// Worst total deviation the adversary can place on one row at `x`:
/// max of Σⱼ zⱼ·δⱼ·|xⱼ| over 0 ≤ z ≤ 1, Σz ≤ Γ, solved greedily
/// (largest items first, last one fractional).
pub fn protection_value(row: &BudgetRow, x: &[f64]) -> f64 {
    let mut items: Vec<f64> = row
        .support
        .iter()
        .zip(&row.deltas)
        .map(|(&j, d)| d * x[j].abs())
        .collect();
    items.sort_by(|a, b| b.total_cmp(a));
    let mut budget = row.gamma;
    let mut total = 0.0;
    for item in items {
        if budget >= 1.0 {
            total += item;
            budget -= 1.0;
        } else {
            total += budget * item;
            break;
        }
    }
    total
}

/// Dualized robust counterpart as one MILP:
/// per row `aᵀx + Γᵢsᵢ + Σⱼγᵢⱼ ≤ bᵢ` with `sᵢ + γᵢⱼ ≥ δᵢⱼ·yⱼ`, where
/// `yⱼ ≥ |xⱼ|` is linearized as `−yⱼ ≤ xⱼ ≤ yⱼ` and identified with
/// `xⱼ` itself whenever `lbⱼ ≥ 0`.
///
/// Columns `[0, n)` are the original variables; auxiliaries follow
/// (the y block, then per row its s and γ block).
pub fn reformulate(problem: &BudgetProblem) -> Result<MilpModel, BudgetError> {
    validate_budget(problem).into_result()?;

    let n = problem.num_vars();
    let mut c = problem.c.clone();
    let mut lb = problem.lb.clone();
    let mut ub = problem.ub.clone();
    let mut integer: Vec<bool> = problem
        .kinds
        .iter()
        .map(|k| *k == VarKind::Integer)
        .collect();
    let push_aux = |c: &mut Vec<f64>,
                        lb: &mut Vec<f64>,
                        ub: &mut Vec<f64>,
                        integer: &mut Vec<bool>|
     -> usize {
        c.push(0.0);
        lb.push(0.0);
        ub.push(f64::INFINITY);
        integer.push(false);
        c.len() - 1
    };

    // one y per variable that can go negative and carries uncertainty
    let mut y_col = std::collections::BTreeMap::new();
    for j in 0..n {
        let uncertain = problem.rows.iter().any(|row| {
            row.support
                .iter()
                .zip(&row.deltas)
                .any(|(&sj, &d)| sj == j && d > 0.0)
        });
        if problem.lb[j] < 0.0 && uncertain {
            let col = push_aux(&mut c, &mut lb, &mut ub, &mut integer);
            y_col.insert(j, col);
        }
    }

    let mut rows: Vec<MilpRow> = Vec::new();
    for (&j, &yc) in &y_col {
        rows.push(MilpRow::new(vec![j, yc], vec![1.0, -1.0], 0.0));
        rows.push(MilpRow::new(vec![j, yc], vec![-1.0, -1.0], 0.0));
    }

    for row in &problem.rows {
        let s_col = push_aux(&mut c, &mut lb, &mut ub, &mut integer);
        let mut master_support = row.support.clone();
        let mut master_coeffs = row.a_nominal.clone();
        master_support.push(s_col);
        master_coeffs.push(row.gamma);
        for (&sj, &d) in row.support.iter().zip(&row.deltas) {
            if d <= 0.0 {
                continue;
            }
            let g_col = push_aux(&mut c, &mut lb, &mut ub, &mut integer);
            master_support.push(g_col);
            master_coeffs.push(1.0);
            let abs_col = y_col.get(&sj).copied().unwrap_or(sj);
            rows.push(MilpRow::new(
                vec![abs_col, s_col, g_col],
                vec![d, -1.0, -1.0],
                0.0,
            ));
        }
        rows.push(MilpRow::new(master_support, master_coeffs, row.b));
    }

    let model = MilpModel {
        sense: problem.sense,
        c,
        lb,
        ub,
        integer,
        rows,
    };
    model.check()?;
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct BudgetSolution {
    pub status: MilpStatus,
    /// Original decision variables only, integers snapped; present at
    /// `Optimal`.
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub node_count: u64,
}

/// Reformulates, solves, and strips the auxiliary variables back off.
pub fn solve(problem: &BudgetProblem, int_tol: f64) -> Result<BudgetSolution, BudgetError> {
    let model = reformulate(problem)?;
    let sol = milp::solve_milp(&model, int_tol, DEFAULT_NODE_LIMIT)?;
    if sol.status != MilpStatus::Optimal {
        return Ok(BudgetSolution {
            status: sol.status,
            x: None,
            objective: None,
            node_count: sol.node_count,
        });
    }
    let n = problem.num_vars();
    let mut x: Vec<f64> = sol.x[..n].to_vec();
    for (j, k) in problem.kinds.iter().enumerate() {
        if *k == VarKind::Integer {
            x[j] = x[j].round();
        }
    }
    let objective = dot(&problem.c, &x);
    Ok(BudgetSolution {
        status: sol.status,
        x: Some(x),
        objective: Some(objective),
        node_count: sol.node_count,
    })
}
