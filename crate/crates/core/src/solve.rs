//! Equilibria under dead loads and stability constants, both computed on the
//! mean-zero strain space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{dual_norm, load_to_bond_form, BondFunctional, NormIndex, PeriodicField};
use crate::chain::deformation::displacement_from_strain_increments;
use crate::chain::{energy_atomistic, grad_atomistic, hessian_atomistic, Deformation, Potential};
use crate::error::{Error, Result};
use crate::hessian::StrainHessian;
use crate::linalg::{generalized_symmetric_eigen, MeanZeroBasis};
use crate::qc::{energy_qnl, grad_qnl, hessian_qnl, RegionPartition};

/// Which stored energy is being minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model<'a> {
    Atomistic,
    Qnl(&'a RegionPartition),
    CauchyBorn,
}

impl Model<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Atomistic => "atomistic",
            Model::Qnl(_) => "qnl",
            Model::CauchyBorn => "cauchy-born",
        }
    }

    pub fn energy(&self, y: &Deformation, pot: &Potential) -> Result<f64> {
        match self {
            Model::Atomistic => energy_atomistic(y, pot),
            Model::Qnl(p) => energy_qnl(y, pot, p),
            Model::CauchyBorn => energy_qnl(y, pot, &RegionPartition::empty(y.n())),
        }
    }

    pub fn grad(&self, y: &Deformation, pot: &Potential) -> Result<BondFunctional> {
        match self {
            Model::Atomistic => grad_atomistic(y, pot),
            Model::Qnl(p) => grad_qnl(y, pot, p),
            Model::CauchyBorn => grad_qnl(y, pot, &RegionPartition::empty(y.n())),
        }
    }

    pub fn hessian(&self, y: &Deformation, pot: &Potential) -> Result<StrainHessian> {
        match self {
            Model::Atomistic => hessian_atomistic(y, pot),
            Model::Qnl(p) => hessian_qnl(y, pot, p),
            Model::CauchyBorn => hessian_qnl(y, pot, &RegionPartition::empty(y.n())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Lower bound kept by the line search; `None` means 0.1 times the smallest
    /// initial strain.
    pub strain_floor: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_iter: 100,
            strain_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub y: Deformation,
    pub iterations: usize,
    pub residual: f64,
    /// Residual before each iteration, then the final one.
    pub history: Vec<f64>,
}

/// `DPhi(y) - f` as bond coefficients.
pub fn residual_functional(
    model: Model<'_>,
    pot: &Potential,
    y: &Deformation,
    f: &PeriodicField,
) -> Result<BondFunctional> {
    let load = load_to_bond_form(f, y.eps())?;
    Ok(model.grad(y, pot)?.sub(&load))
}

/// `||DPhi(y) - f||_{U^{-1,2}}`.
pub fn equilibrium_residual(
    model: Model<'_>,
    pot: &Potential,
    y: &Deformation,
    f: &PeriodicField,
) -> Result<f64> {
    Ok(dual_norm(
        &residual_functional(model, pot, y, f)?,
        NormIndex::TWO,
        y.eps(),
    ))
}

fn residual_with(
    load: &BondFunctional,
    model: Model<'_>,
    pot: &Potential,
    y: &Deformation,
) -> Result<(BondFunctional, f64)> {
    let r = model.grad(y, pot)?.sub(load);
    let norm = dual_norm(&r, NormIndex::TWO, y.eps());
    Ok((r, norm))
}

/// Solves `R z = b` for symmetric `R`, preferring Cholesky and falling back to
/// an eigendecomposition for indefinite but nonsingular matrices.
fn symmetric_solve(r: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = r.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let eig = r.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let smallest = eig
        .eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if smallest.abs() <= 1e-12 * scale.max(1.0) {
        let signed_min = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        return Err(Error::SingularHessian {
            smallest_eigenvalue: signed_min,
        });
    }
    let qtb = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        qtb.len(),
        qtb.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c / l),
    );
    Ok(&eig.eigenvectors * scaled)
}

/// Damped Newton iteration for `DPhi(y)[v] = <f, v>` for all `v` in `U`.
pub fn newton_solve(
    model: Model<'_>,
    pot: &Potential,
    y0: &Deformation,
    f: &PeriodicField,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    y0.check_admissible()?;
    if f.len() != y0.n() {
        return Err(Error::LengthMismatch {
            expected: y0.n(),
            got: f.len(),
        });
    }
    let load = load_to_bond_form(f, y0.eps())?;
    let floor = opts.strain_floor.unwrap_or(0.1 * y0.min_strain());
    let basis = MeanZeroBasis::new(y0.n());
    let eps = y0.eps();

    let mut y = y0.clone();
    let (mut r, mut norm) = residual_with(&load, model, pot, &y)?;
    let mut history = vec![norm];
    let mut iterations = 0;
    while norm > opts.tol_residual {
        if iterations == opts.max_iter {
            return Err(Error::MaxIterations {
                iterations,
                residual: norm,
            });
        }
        let reduced = basis.reduce_matrix(&model.hessian(&y, pot)?.dense());
        let rhs = -basis.reduce_vector(r.coeffs());
        let z = symmetric_solve(reduced, &rhs)?;
        let d = basis.expand(&z);
        let w = displacement_from_strain_increments(&d, eps);

        let mut t = 1.0;
        let mut accepted = None;
        let mut met_floor = false;
        for _ in 0..60 {
            let trial = y.perturbed(&w, t);
            if trial.min_strain() >= floor {
                met_floor = true;
                let (rt, nt) = residual_with(&load, model, pot, &trial)?;
                if nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                y = trial;
                r = rt;
                norm = nt;
            }
            None if !met_floor => {
                return Err(Error::StrainFloor {
                    floor,
                    min_strain: y.min_strain(),
                });
            }
            None => {
                return Err(Error::MaxIterations {
                    iterations,
                    residual: norm,
                })
            }
        }
        iterations += 1;
        history.push(norm);
    }
    Ok(SolveOutcome {
        y,
        iterations,
        residual: norm,
        history,
    })
}

/// Smallest generalized eigenvalue of the Hessian against the strain Gram
/// form on `U`, with a normalized eigenmode and the full spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub constant: f64,
    /// Mean-zero displacement with `||u'||_{l^2_eps} = 1`.
    pub eigenmode: Vec<f64>,
    /// Strains of the eigenmode.
    pub eigenmode_strains: Vec<f64>,
    /// All `N - 1` eigenvalues in ascending order.
    pub spectrum: Vec<f64>,
}

/// `c(y) = inf_{||u'||=1} D^2 Phi(y)[u, u]` for the chosen model.
pub fn stability_constant(
    model: Model<'_>,
    pot: &Potential,
    y: &Deformation,
) -> Result<StabilityResult> {
    stability_of_hessian(&model.hessian(y, pot)?)
}

pub fn stability_of_hessian(h: &StrainHessian) -> Result<StabilityResult> {
    let n = h.n();
    let eps = h.eps();
    let basis = MeanZeroBasis::new(n);
    let reduced = basis.reduce_matrix(&h.dense()) * eps;
    let gram = DMatrix::identity(n - 1, n - 1) * eps;
    let (values, vectors) = generalized_symmetric_eigen(&reduced, &gram)?;
    let strains = basis.expand(&vectors.column(0).into_owned());
    let mode = displacement_from_strain_increments(&strains, eps);
    Ok(StabilityResult {
        constant: values[0],
        eigenmode: mode,
        eigenmode_strains: strains,
        spectrum: values,
    })
}

/// `D^2 Phi(y)[u, u] / ||u'||^2_{l^2_eps}` for a mean-zero displacement `u`.
pub fn rayleigh_quotient(
    model: Model<'_>,
    pot: &Potential,
    y: &Deformation,
    u: &[f64],
) -> Result<f64> {
    if u.len() != y.n() {
        return Err(Error::LengthMismatch {
            expected: y.n(),
            got: u.len(),
        });
    }
    crate::calculus::check_mean_zero(u)?;
    let n = u.len();
    let eps = y.eps();
    let u_prime: Vec<f64> = (0..n).map(|k| (u[k] - u[(k + n - 1) % n]) / eps).collect();
    rayleigh_quotient_strains(&model.hessian(y, pot)?, &u_prime)
}

/// Quotient for a displacement given through its strains `u'`.
pub fn rayleigh_quotient_strains(h: &StrainHessian, u_prime: &[f64]) -> Result<f64> {
    let norm2 = h.eps() * u_prime.iter().map(|x| x * x).sum::<f64>();
    if norm2 == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(h.quadratic(u_prime) / norm2)
}
