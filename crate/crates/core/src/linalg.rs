//! Dense linear algebra on the mean-zero strain space `{w : sum w = 0}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Orthonormal basis of the complement of the constants, realised by the
/// Householder reflector `H = I - beta v v^T` with `v = 1 + sqrt(N) e_1`.
/// `H` maps the constant vector onto `-sqrt(N) e_1`, so its columns 2..N span
/// the mean-zero subspace.
#[derive(Debug, Clone)]
pub struct MeanZeroBasis {
    v: DVector<f64>,
    beta: f64,
}

impl MeanZeroBasis {
    pub fn new(n: usize) -> Self {
        let mut v = DVector::from_element(n, 1.0);
        v[0] += (n as f64).sqrt();
        let beta = 2.0 / v.norm_squared();
        Self { v, beta }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    fn reflect(&self, x: &DVector<f64>) -> DVector<f64> {
        let c = self.beta * self.v.dot(x);
        x - &self.v * c
    }

    /// Coordinates of the projection of `g` onto the mean-zero subspace.
    pub fn reduce_vector(&self, g: &[f64]) -> DVector<f64> {
        let hg = self.reflect(&DVector::from_column_slice(g));
        hg.rows(1, self.n() - 1).into_owned()
    }

    /// The mean-zero vector with coordinates `z`.
    pub fn expand(&self, z: &DVector<f64>) -> Vec<f64> {
        let mut x = DVector::zeros(self.n());
        x.rows_mut(1, self.n() - 1).copy_from(z);
        self.reflect(&x).as_slice().to_vec()
    }

    /// `Q^T M Q` for symmetric `M`, computed as the trailing block of `H M H`.
    pub fn reduce_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mv = m * &self.v;
        let vmv = self.v.dot(&mv);
        let b = self.beta;
        let mut out = m.clone();
        // H M H = M - b v (Mv)^T - b (Mv) v^T + b^2 (v^T M v) v v^T
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += -b * self.v[i] * mv[j] - b * mv[i] * self.v[j]
                    + b * b * vmv * self.v[i] * self.v[j];
            }
        }
        let r = out.view((1, 1), (n - 1, n - 1)).into_owned();
        // Symmetrize away rounding asymmetry.
        (&r + r.transpose()) * 0.5
    }
}

/// Eigenpairs of `H x = lambda G x` for symmetric `H` and symmetric positive
/// definite `G`, via the Cholesky factor `G = L L^T` and the standard problem
/// `L^-1 H L^-T`. Eigenvalues ascend; eigenvectors are `G`-orthonormal columns.
pub fn generalized_symmetric_eigen(
    h: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let c = &linv * h * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lt_inv = linv.transpose();
    let mut vectors = DMatrix::zeros(h.nrows(), h.ncols());
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &(&lt_inv * eig.eigenvectors.column(i)));
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_mean_zero() {
        let b = MeanZeroBasis::new(7);
        let mut q = DMatrix::zeros(7, 6);
        for j in 0..6 {
            let mut z = DVector::zeros(6);
            z[j] = 1.0;
            let col = b.expand(&z);
            assert!(col.iter().sum::<f64>().abs() < 1e-14);
            q.set_column(j, &DVector::from_vec(col));
        }
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(6, 6)).abs().max() < 1e-14);
        let m = DMatrix::from_fn(7, 7, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let direct = q.transpose() * &m * &q;
        assert!((direct - b.reduce_matrix(&m)).abs().max() < 1e-13);
        let g: Vec<f64> = (0..7).map(|k| k as f64 * 0.3).collect();
        let z = b.reduce_vector(&g);
        let qz = q.transpose() * DVector::from_vec(g);
        assert!((z - qz).abs().max() < 1e-14);
    }

    #[test]
    fn generalized_eigen_matches_definition() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = generalized_symmetric_eigen(&h, &g).unwrap();
        for (k, lam) in vals.iter().enumerate() {
            let x = vecs.column(k);
            let r = &h * x - &g * x * *lam;
            assert!(r.norm() < 1e-12);
            assert!(((x.transpose() * &g * x)[0] - 1.0).abs() < 1e-12);
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(generalized_symmetric_eigen(&h, &(-g)).is_err());
    }
}
