//! Builders for the two benchmark families (a 2-variable illustrative problem
//! and a block-replicated truss sizing problem) plus a brute-force lattice
//! oracle used to certify solver output on small all-integer instances.

use crate::budget::{BudgetProblem, BudgetRow};
use crate::linalg::{self, SymMatrix};
use crate::model::{
    self, EllipsoidalRow, ModelError, RobustProblem, Sense, SolverConfig, VarKind,
};
use crate::reliability;
use thiserror::Error;

/// Arithmetic catalogue of admissible section values: start + step·k,
/// k ∈ {0, …, count−1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Catalogue {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Catalogue {
    /// Largest admissible integer code.
    pub fn max_code(&self) -> usize {
        self.count - 1
    }
}

/// Data for the seven-bar truss block: nominal load `p` with std `sigma_p`,
/// per-bar nominal strengths and stds, protection levels, geometry factors
/// `w`, the section catalogue, and unit costs. The budget variant deviates
/// each parameter by `deviation_factor` stds under per-bar budgets
/// `budget_gammas`.
#[derive(Debug, Clone)]
pub struct TrussSpec {
    pub n_blocks: usize,
    pub p: f64,
    pub sigma_p: f64,
    pub yield_means: [f64; 7],
    pub yield_stds: [f64; 7],
    pub betas: [f64; 7],
    pub w: [f64; 7],
    pub catalogue: Catalogue,
    pub costs: [f64; 7],
    pub deviation_factor: f64,
    pub budget_gammas: [f64; 7],
}

impl Default for TrussSpec {
    fn default() -> Self {
        let s3 = 3.0f64.sqrt();
        Self {
            n_blocks: 1,
            p: 100.0,
            sigma_p: 40.0,
            yield_means: [-100.0, -100.0, -200.0, -200.0, -200.0, -200.0, -200.0],
            yield_stds: [15.0, 15.0, 40.0, 40.0, 40.0, 40.0, 40.0],
            betas: [3.09; 7],
            w: [0.5 / s3, 0.5 / s3, 1.0 / s3, 1.0 / s3, 1.0 / s3, 1.0 / s3, 1.0 / s3],
            catalogue: Catalogue {
                start: 0.5,
                step: 0.1,
                count: 16,
            },
            costs: [1.0; 7],
            deviation_factor: 2.5,
            budget_gammas: [2.0, 2.0, 1.8, 1.8, 1.8, 1.8, 1.8],
        }
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("bad spec: {0}")]
    BadSpec(&'static str),
}

fn check_spec(spec: &TrussSpec) -> Result<(), GeneratorError> {
    use GeneratorError::BadSpec;
    if spec.n_blocks < 1 {
        return Err(BadSpec("n_blocks must be at least 1"));
    }
    if !(spec.sigma_p >= 0.0) || spec.yield_stds.iter().any(|s| !(*s >= 0.0)) {
        return Err(BadSpec("stds must be nonnegative"));
    }
    if spec.betas.iter().any(|b| !(*b >= 0.0)) {
        return Err(BadSpec("protection levels must be nonnegative"));
    }
    if spec.catalogue.count < 1 {
        return Err(BadSpec("catalogue must hold at least one value"));
    }
    if !(spec.catalogue.step > 0.0) || !spec.catalogue.start.is_finite() {
        return Err(BadSpec("catalogue must be an increasing arithmetic sequence"));
    }
    if !(spec.deviation_factor >= 0.0) {
        return Err(BadSpec("deviation factor must be nonnegative"));
    }
    let finite = spec.p.is_finite()
        && spec.sigma_p.is_finite()
        && spec.yield_means.iter().all(|v| v.is_finite())
        && spec.yield_stds.iter().all(|v| v.is_finite())
        && spec.w.iter().all(|v| v.is_finite())
        && spec.costs.iter().all(|v| v.is_finite())
        && spec.budget_gammas.iter().all(|v| v.is_finite());
    if !finite {
        return Err(BadSpec("spec values must be finite"));
    }
    Ok(())
}

/// The 2-variable maximization example: c = (3,3), two uncertain rows with
/// nominal A = [[1,2],[2,1]], b = (7,7), β = 4.5, and the printed covariances.
pub fn gen_illustrative() -> RobustProblem {
    let sigma1 = SymMatrix::from_rows(&[vec![0.01, 0.016], vec![0.016, 0.04]])
        .expect("symmetric by construction");
    let sigma2 = SymMatrix::from_rows(&[vec![0.04, -0.01], vec![-0.01, 0.01]])
        .expect("symmetric by construction");
    RobustProblem {
        name: "illustrative".to_string(),
        sense: Sense::Maximize,
        c: vec![3.0, 3.0],
        lb: vec![0.0, 0.0],
        ub: vec![10.0, 10.0],
        kinds: vec![VarKind::Integer, VarKind::Integer],
        rows: vec![
            EllipsoidalRow::new(vec![0, 1], vec![1.0, 2.0], 7.0, 4.5, sigma1),
            EllipsoidalRow::new(vec![0, 1], vec![2.0, 1.0], 7.0, 4.5, sigma2),
        ],
    }
}

/// One stress row in code space. With x = start + step·k and the pin fixed at
/// 1, the affine substitution folds the catalogue offset into the pin column,
/// so conic_lhs over (pin, k) equals wᵢp + aᵢx + β√((wᵢσ_p)² + (σᵢx)²).
fn truss_row(spec: &TrussSpec, bar: usize, pin_col: usize, code_col: usize) -> EllipsoidalRow {
    let (start, step) = (spec.catalogue.start, spec.catalogue.step);
    let (wi, a, sd) = (spec.w[bar], spec.yield_means[bar], spec.yield_stds[bar]);
    let var_p = (wi * spec.sigma_p).powi(2);
    let var_a = sd * sd;
    let sigma = SymMatrix::from_rows(&[
        vec![var_p + start * start * var_a, start * step * var_a],
        vec![start * step * var_a, step * step * var_a],
    ])
    .expect("symmetric by construction");
    EllipsoidalRow::new(
        vec![pin_col, code_col],
        vec![wi * spec.p + start * a, step * a],
        0.0,
        spec.betas[bar],
        sigma,
    )
}

/// Shared variable layout for the truss family: integer section codes in
/// block-major order, one fixed continuous pin column last. The pin carries
/// every row's load term and the constant part of the cost, so the engine
/// objective equals the decoded catalogue cost.
fn truss_columns(spec: &TrussSpec) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<VarKind>, usize) {
    let nb = spec.n_blocks;
    let n = 7 * nb + 1;
    let pin = n - 1;
    let mut c = vec![0.0; n];
    let mut lb = vec![0.0; n];
    let mut ub = vec![spec.catalogue.max_code() as f64; n];
    let mut kinds = vec![VarKind::Integer; n];
    for block in 0..nb {
        for bar in 0..7 {
            c[7 * block + bar] = spec.costs[bar] * spec.catalogue.step;
        }
    }
    let per_block: f64 = spec.costs.iter().sum::<f64>() * spec.catalogue.start;
    c[pin] = nb as f64 * per_block;
    lb[pin] = 1.0;
    ub[pin] = 1.0;
    kinds[pin] = VarKind::Continuous;
    (c, lb, ub, kinds, pin)
}

/// Ellipsoidal truss problem with 7·n_blocks catalogue variables plus the pin.
pub fn gen_truss(spec: &TrussSpec) -> Result<RobustProblem, GeneratorError> {
    check_spec(spec)?;
    let (c, lb, ub, kinds, pin) = truss_columns(spec);
    let mut rows = Vec::with_capacity(7 * spec.n_blocks);
    for block in 0..spec.n_blocks {
        for bar in 0..7 {
            rows.push(truss_row(spec, bar, pin, 7 * block + bar));
        }
    }
    Ok(RobustProblem {
        name: format!("truss_nb{}", spec.n_blocks),
        sense: Sense::Minimize,
        c,
        lb,
        ub,
        kinds,
        rows,
    })
}

/// One-bar slice of the truss: section code in column 0, pin in column 1.
/// Rows share no catalogue variables across bars, so per-bar minima compose
/// to the full truss optimum.
pub fn gen_truss_single_bar(spec: &TrussSpec, bar: usize) -> Result<RobustProblem, GeneratorError> {
    check_spec(spec)?;
    if bar >= 7 {
        return Err(GeneratorError::BadSpec("bar index must be below 7"));
    }
    Ok(RobustProblem {
        name: format!("truss_bar{}", bar + 1),
        sense: Sense::Minimize,
        c: vec![
            spec.costs[bar] * spec.catalogue.step,
            spec.costs[bar] * spec.catalogue.start,
        ],
        lb: vec![0.0, 1.0],
        ub: vec![spec.catalogue.max_code() as f64, 1.0],
        kinds: vec![VarKind::Integer, VarKind::Continuous],
        rows: vec![truss_row(spec, bar, 1, 0)],
    })
}

/// Budget-of-uncertainty variant of the truss. The load and strength
/// deviations (deviation_factor stds each) are expressed per column of the
/// code-space row: the pin column absorbs the load deviation plus the
/// catalogue-offset share of the strength deviation.
pub fn gen_truss_budget(spec: &TrussSpec) -> Result<BudgetProblem, GeneratorError> {
    check_spec(spec)?;
    let (c, lb, ub, kinds, pin) = truss_columns(spec);
    let (start, step) = (spec.catalogue.start, spec.catalogue.step);
    let delta_p = spec.deviation_factor * spec.sigma_p;
    let mut rows = Vec::with_capacity(7 * spec.n_blocks);
    for block in 0..spec.n_blocks {
        for bar in 0..7 {
            let delta_a = spec.deviation_factor * spec.yield_stds[bar];
            rows.push(BudgetRow::new(
                vec![pin, 7 * block + bar],
                vec![
                    spec.w[bar] * spec.p + start * spec.yield_means[bar],
                    step * spec.yield_means[bar],
                ],
                0.0,
                vec![spec.w[bar] * delta_p + start * delta_a, step * delta_a],
                spec.budget_gammas[bar],
            ));
        }
    }
    Ok(BudgetProblem {
        name: format!("truss_budget_nb{}", spec.n_blocks),
        sense: Sense::Minimize,
        c,
        lb,
        ub,
        kinds,
        rows,
    })
}

/// Maps an integer section code (possibly float-typed) back to its catalogue
/// value.
pub fn decode_catalogue(cat: &Catalogue, code: f64) -> f64 {
    cat.start + cat.step * code.round()
}

/// Decodes the catalogue variables of a truss solution vector, dropping the
/// pin.
pub fn decode_truss_solution(spec: &TrussSpec, x: &[f64]) -> Vec<f64> {
    x[..7 * spec.n_blocks]
        .iter()
        .map(|&k| decode_catalogue(&spec.catalogue, k))
        .collect()
}

pub const DEFAULT_LATTICE_CAP: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum BruteForceOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
}

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("variable {index} is continuous with an open range; only fixed continuous variables can be enumerated")]
    NotEnumerable { index: usize },
    #[error("integer variable {index} has an unbounded domain")]
    UnboundedDomain { index: usize },
    #[error("lattice holds {size} points, more than the cap of {cap}")]
    LatticeTooLarge { size: u128, cap: u64 },
}

/// Exhaustive lattice search over the integer variables (continuous variables
/// must be pinned by equal bounds). Keeps conic-feasible points under the
/// default feasibility tolerance and returns the best objective; among ties
/// the lexicographically smallest vector wins because enumeration ascends
/// lexicographically and only strict improvements replace the incumbent.
pub fn brute_force(
    problem: &RobustProblem,
    cap: u64,
) -> Result<BruteForceOutcome, BruteForceError> {
    model::validate(problem).into_result()?;
    let n = problem.num_vars();
    let mut lo = vec![0i64; n];
    let mut width = vec![1u64; n];
    let mut enumerated = vec![false; n];
    let mut x = vec![0.0; n];
    let mut size: u128 = 1;
    for j in 0..n {
        let (l, u) = (problem.lb[j], problem.ub[j]);
        match problem.kinds[j] {
            VarKind::Continuous => {
                if l == u {
                    x[j] = l;
                } else {
                    return Err(BruteForceError::NotEnumerable { index: j });
                }
            }
            VarKind::Integer => {
                if !l.is_finite() || !u.is_finite() {
                    return Err(BruteForceError::UnboundedDomain { index: j });
                }
                let (lj, uj) = (l.ceil() as i64, u.floor() as i64);
                if lj > uj {
                    return Ok(BruteForceOutcome::Infeasible);
                }
                lo[j] = lj;
                width[j] = (uj - lj + 1) as u64;
                enumerated[j] = true;
                size = size.saturating_mul(width[j] as u128);
            }
        }
    }
    if size > cap as u128 {
        return Err(BruteForceError::LatticeTooLarge { size, cap });
    }

    let feas_tol = SolverConfig::default().feas_tol;
    let mut offsets = vec![0u64; n];
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        for j in 0..n {
            if enumerated[j] {
                x[j] = (lo[j] + offsets[j] as i64) as f64;
            }
        }
        let feasible = problem
            .rows
            .iter()
            .all(|row| reliability::conic_lhs(row, &x) <= row.b + feas_tol * (1.0 + row.b.abs()));
        if feasible {
            let objective = linalg::dot(&problem.c, &x);
            let improves = match &best {
                None => true,
                Some((_, incumbent)) => match problem.sense {
                    Sense::Maximize => objective > *incumbent,
                    Sense::Minimize => objective < *incumbent,
                },
            };
            if improves {
                best = Some((x.clone(), objective));
            }
        }
        // Odometer advance, last enumerated coordinate fastest.
        let mut pos = n;
        let exhausted = loop {
            if pos == 0 {
                break true;
            }
            pos -= 1;
            if !enumerated[pos] {
                continue;
            }
            offsets[pos] += 1;
            if offsets[pos] < width[pos] {
                break false;
            }
            offsets[pos] = 0;
        };
        if exhausted {
            break;
        }
    }
    Ok(match best {
        Some((x, objective)) => BruteForceOutcome::Optimal { x, objective },
        None => BruteForceOutcome::Infeasible,
    })
}
