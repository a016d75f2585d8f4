//! FOSM reliability layer: conic left-hand sides, signed reliability
//! indices, exact normal tail probabilities, and the distribution-free
//! exponential bound.

use thiserror::Error;

use crate::linalg::{self, dot};
use crate::model::{EllipsoidalRow, RobustProblem, SolverConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ReliabilityError {
    #[error("probability bound requires beta >= 0, got {beta}")]
    NegativeBeta { beta: f64 },
}

/// Robust left-hand side `aᵀx + β·√(xᵀΣx)` of one row at `x`.
///
/// With `β = 0` this is exactly the nominal `aᵀx`.
pub fn conic_lhs(row: &EllipsoidalRow, x: &[f64]) -> f64 {
    let xs = row.gather(x);
    let nominal = dot(&row.a_nominal, &xs);
    if row.beta == 0.0 {
        return nominal;
    }
    let q = linalg::quad_form(&row.sigma, &xs).expect("row shape validated");
    nominal + row.beta * q.sqrt()
}

/// Signed reliability index `(b − aᵀx)/√(xᵀΣx)`: the distance from the
/// nominal parameters to the limit state in standard-normal units,
/// negative when the nominal constraint is already violated at `x`.
///
/// Zero variance at `x` makes the row deterministic: `+∞` when the
/// nominal constraint holds, `−∞` when it does not.
pub fn reliability_index(row: &EllipsoidalRow, x: &[f64]) -> f64 {
    let xs = row.gather(x);
    let margin = row.b - dot(&row.a_nominal, &xs);
    let q = linalg::quad_form(&row.sigma, &xs).expect("row shape validated");
    if q <= 0.0 {
        return if margin >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    margin / q.sqrt()
}

/// Distribution-free bound `e^{−β²/2}` on the violation probability.
pub fn probability_bound(beta: f64) -> Result<f64, ReliabilityError> {
    if !(beta >= 0.0) {
        return Err(ReliabilityError::NegativeBeta { beta });
    }
    Ok((-0.5 * beta * beta).exp())
}

/// Standard normal CDF `Φ(t)`, absolute error below 1e-12 for |t| ≤ 8.
///
/// Computed through `erfc(x) = Q(1/2, x²)`, the upper regularized
/// incomplete gamma function: power series below x² = 1.5, Legendre
/// continued fraction (modified Lentz) beyond. Evaluating at `|t|` and
/// folding keeps `Φ(−t) = 1 − Φ(t)` within one ulp.
pub fn normal_cdf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let tail = 0.5 * erfc_nonneg(t.abs() / std::f64::consts::SQRT_2);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 500;

fn erfc_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let t = x * x;
    if t < 1.5 {
        1.0 - gamma_p_half(t)
    } else {
        gamma_q_half(t)
    }
}

/// `e^{−t}·√(t/π)`, the prefactor shared by both incomplete-gamma forms.
fn gamma_prefactor(t: f64) -> f64 {
    (-t + 0.5 * t.ln() - 0.5 * std::f64::consts::PI.ln()).exp()
}

/// Lower regularized incomplete gamma `P(1/2, t)` by power series.
fn gamma_p_half(t: f64) -> f64 {
    let a = 0.5;
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= t / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            return sum * gamma_prefactor(t);
        }
    }
    debug_assert!(false, "gamma series did not converge at t = {t}");
    sum * gamma_prefactor(t)
}

/// Upper regularized incomplete gamma `Q(1/2, t)` by continued fraction.
fn gamma_q_half(t: f64) -> f64 {
    let a = 0.5;
    let fpmin = f64::MIN_POSITIVE / f64::EPSILON;
    let mut b = t + 1.0 - a;
    let mut c = 1.0 / fpmin;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = b + an / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            return gamma_prefactor(t) * h;
        }
    }
    debug_assert!(false, "gamma continued fraction did not converge at t = {t}");
    gamma_prefactor(t) * h
}

/// Reliability figures for one row at a fixed candidate point.
#[derive(Debug, Clone)]
pub struct RowReliability {
    pub row_index: usize,
    pub conic_lhs: f64,
    pub beta_true: f64,
    /// Exact violation probability `Φ(−β_true)`.
    pub p_exact: f64,
    /// `e^{−β_true²/2}` when `β_true ≥ 0`; 1 otherwise, since the
    /// exponential bound only holds for nonnegative indices.
    pub p_bound: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct ReliabilityReport {
    pub rows: Vec<RowReliability>,
}

impl ReliabilityReport {
    pub fn all_feasible(&self) -> bool {
        self.rows.iter().all(|r| r.feasible)
    }
}

/// Reliability report at `x` under the default feasibility tolerance.
pub fn report(problem: &RobustProblem, x: &[f64]) -> ReliabilityReport {
    report_with_tol(problem, x, SolverConfig::default().feas_tol)
}

/// One entry per row; a row counts as feasible when its conic left-hand
/// side is within `feas_tol·(1+|b|)` of `b`.
pub fn report_with_tol(
    problem: &RobustProblem,
    x: &[f64],
    feas_tol: f64,
) -> ReliabilityReport {
    let rows = problem
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let lhs = conic_lhs(row, x);
            let beta_true = reliability_index(row, x);
            let p_bound = if beta_true >= 0.0 {
                (-0.5 * beta_true * beta_true).exp()
            } else {
                1.0
            };
            RowReliability {
                row_index: i,
                conic_lhs: lhs,
                beta_true,
                p_exact: normal_cdf(-beta_true),
                p_bound,
                feasible: lhs <= row.b + feas_tol * (1.0 + row.b.abs()),
            }
        })
        .collect();
    ReliabilityReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::model::{Sense, VarKind};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sym(rows: &[Vec<f64>]) -> SymMatrix {
        SymMatrix::from_rows(rows).unwrap()
    }

    fn row1() -> EllipsoidalRow {
        EllipsoidalRow::new(
            vec![0, 1],
            vec![1.0, 2.0],
            7.0,
            4.5,
            sym(&[vec![0.01, 0.016], vec![0.016, 0.04]]),
        )
    }

    fn row2() -> EllipsoidalRow {
        EllipsoidalRow::new(
            vec![0, 1],
            vec![2.0, 1.0],
            7.0,
            4.5,
            sym(&[vec![0.04, -0.01], vec![-0.01, 0.01]]),
        )
    }

    fn two_row_problem() -> RobustProblem {
        RobustProblem {
            name: "illustrative".into(),
            sense: Sense::Maximize,
            c: vec![3.0, 3.0],
            lb: vec![0.0, 0.0],
            ub: vec![10.0, 10.0],
            kinds: vec![VarKind::Integer, VarKind::Integer],
            rows: vec![row1(), row2()],
        }
    }

    /// Φ at reference points, 17 significant digits.
    const PHI_TABLE: &[(f64, f64)] = &[
        (-8.0, 6.2209605742717841e-16),
        (-6.0, 9.8658764503769814e-10),
        (-4.5, 3.3976731247300604e-6),
        (-4.0, 3.1671241833119921e-5),
        (-3.09, 1.0007824766140104e-3),
        (-2.5, 6.2096653257761352e-3),
        (-2.0, 2.2750131948179207e-2),
        (-1.5, 6.6807201268858066e-2),
        (-1.0, 0.15865525393145705),
        (-0.5, 0.30853753872598690),
        (0.0, 0.5),
        (0.5, 0.69146246127401310),
        (1.0, 0.84134474606854295),
        (1.5, 0.93319279873114193),
        (2.0, 0.97724986805182079),
        (2.5, 0.99379033467422386),
        (3.09, 0.99899921752338599),
        (4.0, 0.99996832875816688),
        (4.5, 0.99999660232687527),
        (6.0, 0.99999999901341235),
    ];

    #[test]
    fn cdf_matches_reference_table() {
        for &(t, want) in PHI_TABLE {
            let got = normal_cdf(t);
            assert!(
                (got - want).abs() < 1e-12,
                "phi({t}): got {got}, want {want}"
            );
        }
    }

    #[test]
    fn cdf_tail_relative_accuracy() {
        for &(t, want) in PHI_TABLE.iter().filter(|&&(t, _)| t <= -1.0) {
            let got = normal_cdf(t);
            assert!(
                (got - want).abs() <= 1e-13 * want,
                "phi({t}) relative error too large: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        assert_eq!(normal_cdf(0.0), 0.5);
        let mut prev = 0.0;
        let mut t = -9.0;
        while t <= 9.0 {
            let v = normal_cdf(t);
            assert!((normal_cdf(-t) - (1.0 - v)).abs() <= 1e-15, "t = {t}");
            assert!(v >= prev, "not monotone at t = {t}");
            prev = v;
            t += 0.0625;
        }
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
        assert!(normal_cdf(f64::NAN).is_nan());
    }

    #[test]
    fn conic_lhs_reference_values() {
        assert!((conic_lhs(&row1(), &[2.0, 1.0]) - 5.7076299364909248).abs() < 1e-12);
        assert!((conic_lhs(&row1(), &[1.0, 3.0]) - 10.071888669857682).abs() < 1e-12);
        assert!((conic_lhs(&row2(), &[2.0, 1.0]) - 6.6224980739587952).abs() < 1e-12);

        let mut deterministic = row1();
        deterministic.beta = 0.0;
        assert_eq!(conic_lhs(&deterministic, &[2.0, 1.0]), 4.0);
    }

    #[test]
    fn reliability_index_reference_values() {
        assert!(
            (reliability_index(&row1(), &[2.0, 1.0]) - 7.9056941504209483).abs() < 1e-12
        );
        assert!(
            (reliability_index(&row2(), &[2.0, 1.0]) - 5.5470019622522912).abs() < 1e-12
        );
        // (1,3) lies exactly on row 1's nominal limit state
        assert_eq!(reliability_index(&row1(), &[1.0, 3.0]), 0.0);
        assert!(reliability_index(&row1(), &[5.0, 5.0]) < 0.0);
        assert!(reliability_index(&row2(), &[5.0, 5.0]) < 0.0);
    }

    #[test]
    fn reliability_index_zero_variance_conventions() {
        let row = EllipsoidalRow::new(
            vec![0, 1],
            vec![1.0, 1.0],
            3.0,
            2.0,
            sym(&[vec![0.0, 0.0], vec![0.0, 0.0]]),
        );
        assert_eq!(reliability_index(&row, &[1.0, 1.0]), f64::INFINITY);
        // tie a·x = b counts as satisfied
        assert_eq!(reliability_index(&row, &[1.0, 2.0]), f64::INFINITY);
        assert_eq!(reliability_index(&row, &[2.0, 2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn probability_bound_values_and_rejection() {
        assert_eq!(probability_bound(0.0).unwrap(), 1.0);
        assert!(
            (probability_bound(4.5).unwrap() - 4.0065297392951068e-5).abs() < 1e-18
        );
        assert!(
            (probability_bound(3.09).unwrap() - 8.4461040762261104e-3).abs() < 1e-15
        );
        assert!(matches!(
            probability_bound(-0.1),
            Err(ReliabilityError::NegativeBeta { .. })
        ));
        assert!(probability_bound(f64::NAN).is_err());
    }

    #[test]
    fn exponential_bound_dominates_exact_tail() {
        for beta in [1.0, 1.5, 2.0, 3.09, 4.5, 6.0] {
            let exact = normal_cdf(-beta);
            let bound = probability_bound(beta).unwrap();
            assert!(exact <= bound, "beta = {beta}");
        }
    }

    #[test]
    fn equivalence_of_forms_on_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0011);
        let mut checked = 0usize;
        for _ in 0..500 {
            let n = rng.gen_range(2..=4usize);
            let row = random_pd_row(&mut rng, n);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let lhs = conic_lhs(&row, &x);
            if (lhs - row.b).abs() <= 1e-9 * (1.0 + row.b.abs()) {
                continue;
            }
            let feasible_conic = lhs <= row.b;
            let feasible_index = reliability_index(&row, &x) >= row.beta;
            assert_eq!(feasible_conic, feasible_index, "row {row:?} at {x:?}");
            checked += 1;
        }
        assert!(checked > 400);
    }

    /// Minimum-norm point on the limit-state plane {z : (a + Lz)ᵀx = b},
    /// found by shrink-and-project iterations rather than the closed form.
    fn min_norm_distance(w: &[f64], margin: f64, rng: &mut ChaCha8Rng) -> f64 {
        let ww = dot(w, w);
        let mut z: Vec<f64> = (0..w.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for _ in 0..300 {
            let gap = (margin - dot(&z, w)) / ww;
            for (zi, wi) in z.iter_mut().zip(w) {
                *zi += gap * wi;
            }
            for zi in z.iter_mut() {
                *zi *= 0.5;
            }
        }
        let gap = (margin - dot(&z, w)) / ww;
        for (zi, wi) in z.iter_mut().zip(w) {
            *zi += gap * wi;
        }
        dot(&z, &z).sqrt()
    }

    #[test]
    fn closed_form_matches_numerical_minimization() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0012);
        for _ in 0..100 {
            let n = rng.gen_range(2..=4usize);
            let row = random_pd_row(&mut rng, n);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w = row.chol().unwrap().transpose_vec(&x).unwrap();
            if dot(&w, &w) < 1e-6 {
                continue;
            }
            let margin = row.b - dot(&row.a_nominal, &x);
            let distance = min_norm_distance(&w, margin, &mut rng);
            let index = reliability_index(&row, &x);
            assert!(
                (distance - index.abs()).abs() < 1e-6,
                "distance {distance} vs |beta_true| {}",
                index.abs()
            );
            assert_eq!(index >= 0.0, margin >= 0.0);
        }
    }

    fn random_pd_row(rng: &mut ChaCha8Rng, n: usize) -> EllipsoidalRow {
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..i {
                l[i][j] = rng.gen_range(-1.0..1.0);
            }
            l[i][i] = rng.gen_range(0.5..1.5);
        }
        let mut s = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..n).map(|k| l[i][k] * l[j][k]).sum();
                s[i][j] = v;
                s[j][i] = v;
            }
        }
        EllipsoidalRow::new(
            (0..n).collect(),
            (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect(),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(0.0..5.0),
            SymMatrix::from_rows(&s).unwrap(),
        )
    }

    #[test]
    fn report_at_robust_feasible_point() {
        let problem = two_row_problem();
        let rep = report(&problem, &[2.0, 1.0]);
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.all_feasible());
        assert!((rep.rows[0].beta_true - 7.9056941504209483).abs() < 1e-12);
        assert!((rep.rows[1].beta_true - 5.5470019622522912).abs() < 1e-12);
        assert!((rep.rows[0].p_exact - 1.3322231946179646e-15).abs() < 1e-24);
        assert!((rep.rows[1].p_exact - 1.4530474100349119e-8).abs() < 1e-17);
        for r in &rep.rows {
            assert!(r.p_bound > 0.0 && r.p_bound <= 1.0);
            assert!(r.p_exact <= r.p_bound);
        }
    }

    #[test]
    fn report_at_violated_point() {
        let problem = two_row_problem();
        let rep = report(&problem, &[5.0, 5.0]);
        assert!(!rep.all_feasible());
        for r in &rep.rows {
            assert!(!r.feasible);
            assert!(r.beta_true < 0.0);
            assert!(r.p_exact > 0.5);
            assert_eq!(r.p_bound, 1.0);
        }
    }

    #[test]
    fn report_zero_variance_point() {
        let problem = two_row_problem();
        // x = 0 kills both quadratic forms; b = 7 > 0 keeps rows feasible
        let rep = report(&problem, &[0.0, 0.0]);
        assert!(rep.all_feasible());
        for r in &rep.rows {
            assert_eq!(r.beta_true, f64::INFINITY);
            assert_eq!(r.p_exact, 0.0);
            assert_eq!(r.p_bound, 0.0);
        }
    }
}
