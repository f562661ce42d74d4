//! Second variations as symmetric bilinear forms in strain coordinates.
//!
//! Every Hessian of the chain couples only neighbouring bonds, so it is stored
//! as a periodic tridiagonal matrix `M` with
//! `D^2[u, v] = eps * sum_k (M_kk u'_k v'_k + M_k,k+1 (u'_k v'_{k+1} + u'_{k+1} v'_k))`.

use nalgebra::DMatrix;

use crate::calculus::BondFunctional;

#[derive(Debug, Clone, PartialEq)]
pub struct StrainHessian {
    diag: Vec<f64>,
    /// `upper[k]` couples bond `k` with bond `k + 1 (mod N)` (0-based).
    upper: Vec<f64>,
    eps: f64,
}

impl StrainHessian {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            eps: 1.0 / n as f64,
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Adds `c |u'_k|^2`.
    pub fn add_diagonal(&mut self, k: usize, c: f64) {
        self.diag[k] += c;
    }

    /// Adds `c |u'_k + u'_{k+1}|^2`.
    pub fn add_pair_sum(&mut self, k: usize, c: f64) {
        let n = self.n();
        self.diag[k] += c;
        self.diag[(k + 1) % n] += c;
        self.upper[k] += c;
    }

    /// Adds `c |u'_{k+1} - u'_k|^2`, i.e. `c eps^2 |u''|^2` at the atom between
    /// the two bonds.
    pub fn add_pair_difference(&mut self, k: usize, c: f64) {
        let n = self.n();
        self.diag[k] += c;
        self.diag[(k + 1) % n] += c;
        self.upper[k] -= c;
    }

    /// `v -> D^2[., v]` as a bond functional: coefficients `M v'`.
    pub fn apply(&self, v_prime: &[f64]) -> BondFunctional {
        let n = self.n();
        BondFunctional::new(
            (0..n)
                .map(|k| {
                    let km = (k + n - 1) % n;
                    let kp = (k + 1) % n;
                    self.diag[k] * v_prime[k]
                        + self.upper[k] * v_prime[kp]
                        + self.upper[km] * v_prime[km]
                })
                .collect(),
        )
    }

    pub fn form(&self, u_prime: &[f64], v_prime: &[f64]) -> f64 {
        self.apply(v_prime).apply(u_prime, self.eps)
    }

    pub fn quadratic(&self, u_prime: &[f64]) -> f64 {
        self.form(u_prime, u_prime)
    }

    /// Dense `M` (without the factor `eps`).
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] += self.diag[k];
            let kp = (k + 1) % n;
            m[(k, kp)] += self.upper[k];
            m[(kp, k)] += self.upper[k];
        }
        m
    }

    /// Largest absolute entry of `M`, used as the scale for relative comparisons.
    pub fn max_abs_entry(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.upper)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_apply_agree() {
        let mut h = StrainHessian::zeros(5);
        for k in 0..5 {
            h.add_diagonal(k, 1.0 + k as f64);
            h.add_pair_sum(k, 0.3 * k as f64 - 0.5);
            h.add_pair_difference(k, 0.1);
        }
        let m = h.dense();
        let v = [0.2, -0.4, 1.0, 0.5, -1.3];
        let mv = h.apply(&v);
        for i in 0..5 {
            let row: f64 = (0..5).map(|j| m[(i, j)] * v[j]).sum();
            assert!((row - mv.coeffs()[i]).abs() < 1e-14);
        }
        assert!((m.clone() - m.transpose()).abs().max() == 0.0);
    }
}
