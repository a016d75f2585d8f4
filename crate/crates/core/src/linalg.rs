//! Dense symmetric linear algebra over small row supports: Cholesky
//! factorization with zero-pivot continuation, quadratic forms, and the
//! affine map between standard-normal space and parameter space.

use thiserror::Error;

/// Relative tolerance for symmetry checks and Cholesky pivots.
pub const SYM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive semidefinite (pivot {pivot:.3e} at column {col})")]
    NotPositiveSemidefinite { col: usize, pivot: f64 },
    #[error("matrix is not symmetric (|a[{i}][{j}] - a[{j}][{i}]| = {diff:.3e})")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },
}

/// Dense symmetric matrix, stored as the full square in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from nested rows, checking squareness and symmetry
    /// (within `SYM_TOL` relative to the largest entry).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(LinalgError::NotSquare {
                    rows: n,
                    row: i,
                    cols: r.len(),
                });
            }
        }
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend_from_slice(r);
        }
        let m = Self { n, data };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Diagonal matrix with the given variances.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (j, &v) in diag.iter().enumerate() {
            data[j * n + j] = v;
        }
        Self { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// Matrix-vector product `Σx`.
    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    fn check_symmetric(&self) -> Result<(), LinalgError> {
        let scale = 1.0 + self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let diff = (self.get(i, j) - self.get(j, i)).abs();
                if diff > SYM_TOL * scale {
                    return Err(LinalgError::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lower-triangular factor, packed row-major: row i contributes i+1 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    entries: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.entries[i * (i + 1) / 2 + j]
        }
    }

    /// `L·z`.
    pub fn mat_vec(&self, z: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if z.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| (0..=i).map(|j| self.get(i, j) * z[j]).sum())
            .collect())
    }

    /// `Lᵀ·x`.
    pub fn transpose_vec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok((0..self.n)
            .map(|j| (j..self.n).map(|i| self.get(i, j) * x[i]).sum())
            .collect())
    }

    /// Forward substitution for `L z = v`. Zero pivots propagate zeros in z,
    /// which is the consistent solution for factors of singular PSD matrices
    /// whenever the system is solvable.
    pub fn solve_lower(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        let mut z = vec![0.0; self.n];
        for i in 0..self.n {
            let mut s = v[i];
            for j in 0..i {
                s -= self.get(i, j) * z[j];
            }
            let d = self.get(i, i);
            z[i] = if d.abs() > 0.0 { s / d } else { 0.0 };
        }
        Ok(z)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Cholesky factorization `Σ = L·Lᵀ` for symmetric PSD matrices.
///
/// Plain (non-pivoted) elimination; a pivot within the tolerance band around
/// zero zeroes out its whole column and continues, so semidefinite inputs
/// (zero-variance coordinates, rank-deficient covariances) factor cleanly.
/// A pivot below `-tol` reports `NotPositiveSemidefinite`.
pub fn cholesky(sigma: &SymMatrix) -> Result<LowerTriangular, LinalgError> {
    sigma.check_symmetric()?;
    let n = sigma.dim();
    let max_diag = (0..n).fold(0.0f64, |m, j| m.max(sigma.get(j, j).abs()));
    let tol = SYM_TOL * max_diag.max(1.0);

    let mut l = LowerTriangular {
        n,
        entries: vec![0.0; n * (n + 1) / 2],
    };
    for j in 0..n {
        let mut d = sigma.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d < -tol {
            return Err(LinalgError::NotPositiveSemidefinite { col: j, pivot: d });
        }
        if d <= tol {
            // semidefinite direction: the column vanishes
            continue;
        }
        let djj = d.sqrt();
        l.entries[j * (j + 1) / 2 + j] = djj;
        for i in (j + 1)..n {
            let mut s = sigma.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.entries[i * (i + 1) / 2 + j] = s / djj;
        }
    }
    Ok(l)
}

/// Quadratic form `xᵀΣx`, evaluated from the symmetric matrix directly.
/// Round-off slightly below zero is clamped to zero.
pub fn quad_form(sigma: &SymMatrix, x: &[f64]) -> Result<f64, LinalgError> {
    if x.len() != sigma.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: sigma.dim(),
            found: x.len(),
        });
    }
    let n = sigma.dim();
    let mut q = 0.0;
    for i in 0..n {
        let xi = x[i];
        q += sigma.get(i, i) * xi * xi;
        for j in (i + 1)..n {
            q += 2.0 * sigma.get(i, j) * xi * x[j];
        }
    }
    if q < 0.0 && q > -SYM_TOL {
        q = 0.0;
    }
    Ok(q)
}

/// Dot product over equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Affine map `center + L·z` taking a standard-normal point to parameter space.
pub fn affine_map(center: &[f64], l: &LowerTriangular, z: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if center.len() != l.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: l.dim(),
            found: center.len(),
        });
    }
    let lz = l.mat_vec(z)?;
    Ok(center.iter().zip(&lz).map(|(c, v)| c + v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma1() -> SymMatrix {
        SymMatrix::from_rows(&[vec![0.01, 0.016], vec![0.016, 0.04]]).unwrap()
    }

    fn sigma2() -> SymMatrix {
        SymMatrix::from_rows(&[vec![0.04, -0.01], vec![-0.01, 0.01]]).unwrap()
    }

    #[test]
    fn cholesky_of_first_example_covariance() {
        let l = cholesky(&sigma1()).unwrap();
        assert!((l.get(0, 0) - 0.1).abs() < 1e-12);
        assert!((l.get(1, 0) - 0.16).abs() < 1e-12);
        assert!((l.get(1, 1) - 0.12).abs() < 1e-12);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_reconstructs_within_tolerance() {
        for sigma in [sigma1(), sigma2()] {
            let l = cholesky(&sigma).unwrap();
            let mut err = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    let rec: f64 = (0..2).map(|k| l.get(i, k) * l.get(j, k)).sum();
                    err += (rec - sigma.get(i, j)).powi(2);
                }
            }
            assert!(err.sqrt() <= 1e-12 * (1.0 + sigma.frobenius_norm()));
        }
    }

    #[test]
    fn cholesky_identity_is_identity() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(l.get(i, j), want);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match cholesky(&m) {
            Err(LinalgError::NotPositiveSemidefinite { col: 1, .. }) => {}
            other => panic!("expected NotPositiveSemidefinite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_diagonal_is_sqrt() {
        let l = cholesky(&SymMatrix::diagonal(&[4.0, 0.25, 9.0])).unwrap();
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(1, 1), 0.5);
        assert_eq!(l.get(2, 2), 3.0);
    }

    #[test]
    fn cholesky_semidefinite_zero_pivot_continues() {
        // rank-1 matrix vvᵀ with v = (1, 2)
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert!((l.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((l.get(1, 0) - 2.0).abs() < 1e-14);
        assert_eq!(l.get(1, 1), 0.0);
    }

    #[test]
    fn quad_form_matches_hand_expansion() {
        let q = quad_form(&sigma1(), &[1.0, 3.0]).unwrap();
        assert!((q - 0.466).abs() < 1e-12);
        let q2 = quad_form(&sigma2(), &[1.0, 3.0]).unwrap();
        assert!((q2 - 0.07).abs() < 1e-12);
    }

    #[test]
    fn quad_form_zero_vector() {
        assert_eq!(quad_form(&sigma1(), &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn quad_form_dimension_mismatch() {
        assert!(matches!(
            quad_form(&sigma1(), &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn affine_map_at_origin_returns_center() {
        let l = cholesky(&sigma1()).unwrap();
        let out = affine_map(&[1.0, 2.0], &l, &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn affine_map_unit_direction() {
        let l = cholesky(&sigma1()).unwrap();
        let out = affine_map(&[1.0, 2.0], &l, &[1.0, 0.0]).unwrap();
        assert!((out[0] - 1.1).abs() < 1e-12);
        assert!((out[1] - 2.16).abs() < 1e-12);
    }

    #[test]
    fn affine_map_round_trip() {
        let l = cholesky(&sigma1()).unwrap();
        let center = [1.0, 2.0];
        let target = [1.3, 2.5];
        let rhs: Vec<f64> = target.iter().zip(&center).map(|(t, c)| t - c).collect();
        let z = l.solve_lower(&rhs).unwrap();
        let back = affine_map(&center, &l, &z).unwrap();
        for (b, t) in back.iter().zip(&target) {
            assert!((b - t).abs() < 1e-12);
        }
    }

    #[test]
    fn quad_form_equals_factor_norm() {
        // xᵀΣx = ‖Lᵀx‖² ties the factored and matrix forms together
        let cases = [
            (sigma1(), vec![1.0, 3.0]),
            (sigma2(), vec![-2.0, 5.0]),
            (SymMatrix::diagonal(&[0.0, 2.0]), vec![7.0, 1.5]),
        ];
        for (sigma, x) in cases {
            let l = cholesky(&sigma).unwrap();
            let ltx = l.transpose_vec(&x).unwrap();
            let norm_sq: f64 = ltx.iter().map(|v| v * v).sum();
            let q = quad_form(&sigma, &x).unwrap();
            let scale = 1.0 + q.abs();
            assert!((q - norm_sq).abs() <= 1e-10 * scale);
        }
    }
}
