use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on `|M - Mᵀ|` accepted by [`PsdFactor::new`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Lower Cholesky factor `L` of a symmetric positive-definite matrix, `M = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    l: DMatrix<f64>,
}

impl PsdFactor {
    /// Factorizes `m`. On failure the error carries the index of the first
    /// non-positive pivot so the caller can retry with more jitter.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Usage(format!("cannot factor a {}x{} matrix", n, m.ncols())));
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for j in 0..n {
            for i in (j + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Usage(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Decomposition { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(PsdFactor { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `2·Σ log L_ii`.
    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L·y = b` in place for every column of `b`.
    pub fn solve_lower_mut(&self, b: &mut DMatrix<f64>) {
        self.l.solve_lower_triangular_unchecked_mut(b);
    }

    /// Solves `Lᵀ·x = y` in place for every column.
    pub fn solve_upper_mut(&self, b: &mut DMatrix<f64>) {
        self.l.tr_solve_lower_triangular_unchecked_mut(b);
    }

    pub fn solve_mat(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.dim() {
            return Err(Error::Usage(format!(
                "right-hand side has {} rows, factor has dimension {}",
                rhs.nrows(),
                self.dim()
            )));
        }
        let mut x = rhs.clone();
        self.solve_lower_mut(&mut x);
        self.solve_upper_mut(&mut x);
        Ok(x)
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        Ok(self.solve_mat(&m)?.column(0).into_owned())
    }

    /// `L⁻¹`, lower triangular.
    pub fn lower_inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut x = DMatrix::identity(n, n);
        self.solve_lower_mut(&mut x);
        x
    }

    /// `M⁻¹`, built column by column from triangular solves.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut x = DMatrix::identity(n, n);
        self.solve_lower_mut(&mut x);
        self.solve_upper_mut(&mut x);
        symmetrize(&mut x);
        x
    }

    /// Reconstructs `L·Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

pub fn factor_psd(m: &DMatrix<f64>) -> Result<PsdFactor> {
    PsdFactor::new(m)
}

pub fn solve_psd(factor: &PsdFactor, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    factor.solve_mat(rhs)
}

pub fn logdet(factor: &PsdFactor) -> f64 {
    factor.logdet()
}

/// Replaces `m` with `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_pd(n: usize, entries: &[f64]) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |i, j| entries[(i * n + j) % entries.len()]);
        &g * g.transpose() + DMatrix::identity(n, n) * (n as f64) * 0.1
    }

    #[test]
    fn identity_and_diagonal() {
        let f = factor_psd(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.logdet(), 0.0);
        let r = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(f.solve_vec(&r).unwrap(), r);

        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let f = factor_psd(&d).unwrap();
        assert_relative_eq!(f.logdet(), 36f64.ln(), epsilon = 1e-14);
        let x = f.solve_vec(&DVector::from_vec(vec![4.0, 9.0])).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-15);

        let e = DMatrix::from_row_slice(2, 2, &[std::f64::consts::E, 0.0, 0.0, 1.0]);
        assert_relative_eq!(factor_psd(&e).unwrap().logdet(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factor_psd(&m) {
            Err(Error::Decomposition { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected decomposition error, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_and_mismatch_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(factor_psd(&m), Err(Error::Usage(_))));
        let f = factor_psd(&DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(f.solve_mat(&DMatrix::zeros(2, 1)), Err(Error::Usage(_))));
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let m = random_pd(4, &[0.3, -1.2, 0.8, 0.5, 2.0, -0.7, 0.1, 1.1, -0.4]);
        let eig = m.clone().symmetric_eigen();
        let oracle: f64 = eig.eigenvalues.iter().map(|v| v.ln()).sum();
        assert_relative_eq!(factor_psd(&m).unwrap().logdet(), oracle, epsilon = 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn round_trip(n in 1usize..30, entries in proptest::collection::vec(-2.0f64..2.0, 7..40),
                      rhs in proptest::collection::vec(-5.0f64..5.0, 30)) {
            let m = random_pd(n, &entries);
            let f = factor_psd(&m).unwrap();
            let rec = f.reconstruct();
            prop_assert!((&rec - &m).norm() <= 1e-10 * m.norm());
            let r = DVector::from_column_slice(&rhs[..n]);
            let x = f.solve_vec(&r).unwrap();
            let back = &m * &x;
            prop_assert!((&back - &r).norm() <= 1e-8 * r.norm().max(1.0));
        }
    }
}
