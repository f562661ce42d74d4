//! Consistency and stability estimators for the coupled model, the uniform
//! spectrum, the crack state, and random admissible states for verification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{dual_norm, lp_norm, BondFunctional, NormIndex};
use crate::chain::{grad_atomistic, ChainConfig, Deformation, Potential};
use crate::error::{Error, Result};
use crate::qc::{grad_qnl, hessian_coeffs, RegionPartition};
use crate::solve::{rayleigh_quotient, stability_constant, Model};

/// `DPhi(y) - DPhi_qc(y)` assembled bond by bond over the continuum atoms.
pub fn truncation_functional(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<BondFunctional> {
    check(y, part)?;
    let s = y.strains();
    let n = s.len();
    let mut t = vec![0.0; n];
    for &xi in part.continuum().members() {
        let k = xi - 1;
        let kp = xi % n;
        let pair = pot.d1(s[k] + s[kp]);
        t[k] += pair - pot.d1(2.0 * s[k]);
        t[kp] += pair - pot.d1(2.0 * s[kp]);
    }
    Ok(BondFunctional::new(t))
}

/// The same functional grouped into interface bonds and interior continuum
/// bonds, where each interior coefficient is a centred second difference of
/// `phi'` and so is `O(eps^2)` on smooth states.
pub fn truncation_functional_grouped(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<BondFunctional> {
    check(y, part)?;
    let s = y.strains();
    let n = s.len();
    let mut t = vec![0.0; n];
    for &xi in part.interface_left().members() {
        let k = xi - 1;
        let kp = xi % n;
        t[kp] += pot.d1(s[k] + s[kp]) - pot.d1(2.0 * s[kp]);
    }
    for &xi in part.interface_right().members() {
        let k = xi - 1;
        let kp = xi % n;
        t[k] += pot.d1(s[k] + s[kp]) - pot.d1(2.0 * s[k]);
    }
    for &xi in part.continuum_interior_bonds().members() {
        let k = xi - 1;
        let km = (k + n - 1) % n;
        let kp = xi % n;
        t[k] += pot.d1(s[km] + s[k]) + pot.d1(s[k] + s[kp]) - 2.0 * pot.d1(2.0 * s[k]);
    }
    Ok(BondFunctional::new(t))
}

fn check(y: &Deformation, part: &RegionPartition) -> Result<()> {
    if y.n() != part.n() {
        return Err(Error::LengthMismatch {
            expected: y.n(),
            got: part.n(),
        });
    }
    y.check_admissible()
}

/// `(C_2, C_3)` evaluated at `2 min_{C'} y'`; both zero when `C'` is empty.
pub fn continuum_constants(y: &Deformation, pot: &Potential, part: &RegionPartition) -> (f64, f64) {
    let m = y.min_strain_on(part.continuum_bonds());
    if m.is_infinite() {
        return (0.0, 0.0);
    }
    (pot.sup_abs(2, 2.0 * m), pot.sup_abs(3, 2.0 * m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTerms {
    /// `eps C_2 ||y''||_{l^p_eps(I)}`
    pub interface: f64,
    /// `eps^2 C_3 ||y'''||_{l^p_eps(C' \ I')}`
    pub third_diff: f64,
    /// `eps^2 C_3 ||y''||^2_{l^2p_eps(C)}`
    pub quadratic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub p: NormIndex,
    /// `||DPhi(y) - DPhi_qc(y)||_{U^{-1,p}}`
    pub measured: f64,
    pub bound: f64,
    pub terms: ConsistencyTerms,
    pub c2_bar: f64,
    pub c3_bar: f64,
    /// `eps^{1+1/p} C_2 (#I)^{1/p} ||y''||_{l^inf(I)}`, an upper bound for the
    /// interface term.
    pub coarse_interface: f64,
}

pub fn consistency_report(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
    p: NormIndex,
) -> Result<ConsistencyReport> {
    let t = truncation_functional(y, pot, part)?;
    let eps = y.eps();
    let measured = dual_norm(&t, p, eps);
    let (c2, c3) = continuum_constants(y, pot, part);
    let y2 = y.second_difference();
    let y3 = y.third_difference();
    let interface = part.interface();
    let terms = ConsistencyTerms {
        interface: eps * c2 * lp_norm(&y2, p, eps, &interface),
        third_diff: eps * eps * c3 * lp_norm(&y3, p, eps, &part.continuum_interior_bonds()),
        quadratic: eps * eps * c3 * lp_norm(&y2, p.doubled(), eps, part.continuum()).powi(2),
    };
    let y2_inf = lp_norm(&y2, NormIndex::INF, eps, &interface);
    let coarse_interface = if p.is_inf() {
        eps * c2 * y2_inf
    } else {
        let q = 1.0 / p.value();
        eps.powf(1.0 + q) * c2 * (interface.len() as f64).powf(q) * y2_inf
    };
    Ok(ConsistencyReport {
        p,
        measured,
        bound: terms.interface + terms.third_diff + terms.quadratic,
        terms,
        c2_bar: c2,
        c3_bar: c3,
        coarse_interface,
    })
}

/// `||y''||_{l^inf(C)}`
pub fn continuum_curvature(y: &Deformation, part: &RegionPartition) -> f64 {
    lp_norm(
        &y.second_difference(),
        NormIndex::INF,
        y.eps(),
        part.continuum(),
    )
}

/// `4 eps C_3 ||y''||_{l^inf(C)}`, bounding `max |A_xi - A~_xi|`.
pub fn coefficient_gap_bound(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<f64> {
    check(y, part)?;
    let (_, c3) = continuum_constants(y, pot, part);
    Ok(4.0 * y.eps() * c3 * continuum_curvature(y, part))
}

/// `max_{xi in C} phi''(y'_xi + y'_{xi+1})`, or `-inf` without continuum.
pub fn continuum_max_pair_stiffness(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> f64 {
    let s = y.strains();
    let n = s.len();
    part.continuum()
        .members()
        .iter()
        .map(|&xi| pot.d2(s[xi - 1] + s[xi % n]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `phi''(y'_xi + y'_{xi+1}) <= 0` for every continuum atom.
pub fn continuum_concavity(y: &Deformation, pot: &Potential, part: &RegionPartition) -> bool {
    continuum_max_pair_stiffness(y, pot, part) <= 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityGapReport {
    pub c_atomistic: f64,
    pub c_qc: f64,
    /// `4 eps C_3 ||y''||_{l^inf(C)}`
    pub gap: f64,
    /// `c_qc - gap`, a lower bound for `c_atomistic` when `concavity_ok`.
    pub apost_bound: f64,
    pub concavity_ok: bool,
    pub min_a: f64,
    pub min_a_tilde: f64,
    pub max_coefficient_gap: f64,
    /// `min y' >= r_*/2`, under which `c >= min A` and `c_qc >= min A~`.
    pub elastic: bool,
}

impl StabilityGapReport {
    /// `c >= c_qc - gap` (checked only under the concavity hypothesis).
    pub fn apost_holds(&self) -> Option<bool> {
        self.concavity_ok
            .then(|| self.c_atomistic >= self.apost_bound - 1e-9 * self.c_qc.abs().max(1.0))
    }

    /// `c >= min A` and `c_qc >= min A~` (checked only for elastic states).
    pub fn elastic_bounds_hold(&self) -> Option<bool> {
        let tol = 1e-9 * self.min_a.abs().max(1.0);
        self.elastic
            .then_some(self.c_atomistic >= self.min_a - tol && self.c_qc >= self.min_a_tilde - tol)
    }
}

pub fn apost_stability_report(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<StabilityGapReport> {
    let coeffs = hessian_coeffs(y, pot, part)?;
    let c_atomistic = stability_constant(Model::Atomistic, pot, y)?.constant;
    let c_qc = stability_constant(Model::Qnl(part), pot, y)?.constant;
    let gap = coefficient_gap_bound(y, pot, part)?;
    Ok(StabilityGapReport {
        c_atomistic,
        c_qc,
        gap,
        apost_bound: c_qc - gap,
        concavity_ok: continuum_concavity(y, pot, part),
        min_a: coeffs.min_a(),
        min_a_tilde: coeffs.min_a_tilde(),
        max_coefficient_gap: coeffs.max_gap(),
        elastic: y.min_strain() >= 0.5 * pot.r_star(),
    })
}

/// `A = phi''(F) + 4 phi''(2F)` and `B = -phi''(2F)`.
pub fn uniform_coefficients(f: f64, pot: &Potential) -> (f64, f64) {
    (pot.d2(f) + 4.0 * pot.d2(2.0 * f), -pot.d2(2.0 * f))
}

/// `{A + B mu_j : j = 1..N-1}` with `mu_j = 4 sin^2(j pi eps)`, ascending: the
/// exact spectrum of the uniform atomistic Hessian on mean-zero strains.
pub fn uniform_spectrum(f: f64, pot: &Potential, n: usize) -> Result<Vec<f64>> {
    uniform_spectrum_with(f, pot, n, 1.0)
}

/// `{A + 4B sin^2(j pi eps / 2) : j = 1..N-1}`. The half-angle variant; it
/// does not match the computed spectrum (kept for comparison reports).
pub fn uniform_spectrum_half_angle(f: f64, pot: &Potential, n: usize) -> Result<Vec<f64>> {
    uniform_spectrum_with(f, pot, n, 0.5)
}

fn uniform_spectrum_with(f: f64, pot: &Potential, n: usize, angle: f64) -> Result<Vec<f64>> {
    ChainConfig::new(n, f)?;
    let (a, b) = uniform_coefficients(f, pot);
    let eps = 1.0 / n as f64;
    let mut out: Vec<f64> = (1..n)
        .map(|j| {
            a + b
                * 4.0
                * (angle * j as f64 * std::f64::consts::PI * eps)
                    .sin()
                    .powi(2)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Largest deviation between two spectra compared as sorted multisets.
pub fn multiset_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// The single-crack state and its test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackDemo {
    pub n: usize,
    pub f: f64,
    pub crack_bond: usize,
    pub crack_strain: f64,
    /// `A` at the crack bond.
    pub a_crack: f64,
    /// `phi''(1) + 4 phi''(2)`
    pub a_hat: f64,
    pub eps_a_hat: f64,
    /// `||u'||_{l^2_eps}` of the test function.
    pub test_norm: f64,
    /// Rayleigh quotient of the test function for the atomistic Hessian.
    pub quotient: f64,
    /// Same quotient for the coupled Hessian.
    pub quotient_qc: f64,
    /// Closed form `eps (A_hat - 4 phi''(2) / (N - 1))` of `quotient`.
    pub quotient_closed_form: f64,
    pub c_atomistic: f64,
    pub c_qc: f64,
    pub quotient_le_eps_a_hat: bool,
    pub c_atomistic_le_eps_a_hat: bool,
    pub c_qc_le_eps_a_hat: bool,
    #[serde(skip)]
    pub y_hat: Option<Deformation>,
    #[serde(skip)]
    pub u_hat: Vec<f64>,
}

/// Smallest `N >= 4` whose crack strain `F + (N-1)(F-1)` reaches `r_cut`.
pub fn crack_min_n(f: f64, r_cut: f64) -> usize {
    let mut n = 4usize;
    while f + (n as f64 - 1.0) * (f - 1.0) < r_cut {
        n += 1;
    }
    n
}

/// Strains `1` off the crack bond and `F + (N-1)(F-1)` on it.
pub fn crack_state(f: f64, n: usize, crack_bond: usize) -> Result<Deformation> {
    if crack_bond == 0 || crack_bond > n {
        return Err(Error::IndexOutOfRange {
            index: crack_bond,
            n,
        });
    }
    let mut strains = vec![1.0; n];
    strains[crack_bond - 1] = f + (n as f64 - 1.0) * (f - 1.0);
    Deformation::from_strains(strains)
}

pub fn crack_demo(
    f: f64,
    pot: &Potential,
    n: usize,
    crack_bond: usize,
    part: &RegionPartition,
) -> Result<CrackDemo> {
    let r_cut = pot.r_cut().ok_or_else(|| Error::CrackPrecondition {
        reason: "potential has no cutoff".into(),
        min_n: 0,
    })?;
    if f.is_nan() || f <= 1.0 {
        return Err(Error::CrackPrecondition {
            reason: format!("F = {f} must exceed 1"),
            min_n: 0,
        });
    }
    let min_n = crack_min_n(f, r_cut);
    if n < min_n {
        return Err(Error::CrackPrecondition {
            reason: format!(
                "crack strain {} is below the cutoff {r_cut}",
                f + (n as f64 - 1.0) * (f - 1.0)
            ),
            min_n,
        });
    }
    if part.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: part.n(),
        });
    }
    let y = crack_state(f, n, crack_bond)?;
    let coeffs = hessian_coeffs(&y, pot, part)?;
    let a_crack = coeffs.a[crack_bond - 1];
    if a_crack > 0.0 {
        return Err(Error::CrackPrecondition {
            reason: format!("A at the crack is {a_crack} > 0"),
            min_n,
        });
    }
    let eps = y.eps();
    let m = n as f64 - 1.0;
    let mut u_prime = vec![-1.0 / m.sqrt(); n];
    u_prime[crack_bond - 1] = m.sqrt();
    let test_norm = (eps * u_prime.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let u = crate::chain::deformation::displacement_from_strain_increments(&u_prime, eps);
    let quotient = rayleigh_quotient(Model::Atomistic, pot, &y, &u)?;
    let quotient_qc = rayleigh_quotient(Model::Qnl(part), pot, &y, &u)?;
    let a_hat = pot.d2(1.0) + 4.0 * pot.d2(2.0);
    let eps_a_hat = eps * a_hat;
    // Round-off allowance; c_qc equals eps * A_hat in exact arithmetic.
    let tol = 1e-12 * eps_a_hat.abs();
    let c_atomistic = stability_constant(Model::Atomistic, pot, &y)?.constant;
    let c_qc = stability_constant(Model::Qnl(part), pot, &y)?.constant;
    Ok(CrackDemo {
        n,
        f,
        crack_bond,
        crack_strain: y.strains()[crack_bond - 1],
        a_crack,
        a_hat,
        eps_a_hat,
        test_norm,
        quotient,
        quotient_qc,
        quotient_closed_form: eps * (a_hat - 4.0 * pot.d2(2.0) / m),
        c_atomistic,
        c_qc,
        quotient_le_eps_a_hat: quotient <= eps_a_hat + tol,
        c_atomistic_le_eps_a_hat: c_atomistic <= eps_a_hat + tol,
        c_qc_le_eps_a_hat: c_qc <= eps_a_hat + tol,
        y_hat: Some(y),
        u_hat: u,
    })
}

/// Smoothed random strain fields with a prescribed lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomStateSpec {
    pub lo: f64,
    pub hi: f64,
    /// Passes of three-point averaging applied after sampling.
    pub smoothing_passes: usize,
}

impl RandomStateSpec {
    /// Strains in `[max(r_*/2, 0.8), 1.3]`, the elastic regime.
    pub fn elastic(pot: &Potential, smoothing_passes: usize) -> Self {
        Self {
            lo: (0.5 * pot.r_star()).max(0.8),
            hi: 1.3,
            smoothing_passes,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Deformation> {
        let mut s: Vec<f64> = (0..n)
            .map(|_| rng.random_range(self.lo..=self.hi))
            .collect();
        for _ in 0..self.smoothing_passes {
            s = (0..n)
                .map(|k| (s[(k + n - 1) % n] + s[k] + s[(k + 1) % n]) / 3.0)
                .collect();
        }
        Deformation::from_strains(s)
    }
}

/// A random atomistic interval leaving at least two continuum atoms.
pub fn random_partition<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RegionPartition> {
    let len = rng.random_range(0..=n - 2);
    if len == 0 {
        return Ok(RegionPartition::empty(n));
    }
    let start = rng.random_range(1..=n);
    let end = (start + len - 2) % n + 1;
    RegionPartition::interval(n, start, end)
}

/// `DPhi - DPhi_qc` by subtracting the two assembled gradients.
pub fn truncation_by_subtraction(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<BondFunctional> {
    Ok(grad_atomistic(y, pot)?.sub(&grad_qnl(y, pot, part)?))
}
