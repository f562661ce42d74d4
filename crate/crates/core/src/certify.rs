//! Existence certificates for the coupled and the atomistic problem built from
//! the quantitative inverse function theorem: with residual `eta`, inverse
//! bound `sigma` and Hessian Lipschitz constant `L`, `2 L sigma^2 eta < 1`
//! yields a root within `2 eta sigma`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calculus::{lp_norm, NormIndex, PeriodicField};
use crate::chain::{Deformation, Potential, PotentialSpec};
use crate::error::{Error, Result};
use crate::estimate::{
    consistency_report, continuum_constants, continuum_curvature, continuum_max_pair_stiffness,
};
use crate::qc::{hessian_coeffs, RegionPartition};
use crate::solve::{equilibrium_residual, newton_solve, stability_constant, Model, SolveOptions};

/// Slack applied to strict inequalities evaluated in floating point.
pub const STRICT_SLACK: f64 = 1e-9;

/// Number of Hessian terms that can share one strain perturbation: one
/// nearest-neighbour term plus at most eight from a second-neighbour or
/// Cauchy-Born assembly.
pub const LIPSCHITZ_TERM_COUNT: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Fraction of the smallest strain the ball may consume is `1 - delta`.
    pub delta: f64,
    /// Residual below which the input is accepted as an equilibrium.
    pub equilibrium_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            delta: 0.5,
            equilibrium_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Modulus with respect to `||(w1 - w2)'||_{l^inf}`.
    pub l_prime: f64,
    /// `eps^{-1/2} l_prime`, modulus with respect to the `U^{1,2}` norm.
    pub l: f64,
    pub delta: f64,
    /// Smallest strain anywhere in the ball.
    pub r_lb: f64,
    /// `eps^{-1/2} radius`, the largest `l^inf` strain perturbation in the ball.
    pub linf_radius: f64,
}

/// Hessian Lipschitz constant on the `U^{1,2}` ball of the given radius around
/// `y`, valid for both the atomistic and the coupled Hessian.
pub fn lipschitz_estimate(
    y: &Deformation,
    pot: &Potential,
    radius: f64,
    delta: f64,
) -> Result<LipschitzEstimate> {
    let inv_sqrt_eps = y.eps().sqrt().recip();
    let linf = inv_sqrt_eps * radius;
    let allowed = (1.0 - delta) * y.min_strain();
    if linf.is_nan() || linf > allowed {
        return Err(Error::BallInadmissible {
            radius,
            linf,
            allowed,
        });
    }
    let r_lb = y.min_strain() - linf;
    let l_prime = LIPSCHITZ_TERM_COUNT * pot.sup_abs(3, r_lb);
    Ok(LipschitzEstimate {
        l_prime,
        l: inv_sqrt_eps * l_prime,
        delta,
        r_lb,
        linf_radius: linf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IftCheck {
    pub eta: f64,
    pub sigma: f64,
    pub l: f64,
    /// `2 L sigma^2 eta`
    pub contraction: f64,
    /// `2 eta sigma`
    pub radius: f64,
    pub admissible_radius: f64,
    pub contraction_ok: bool,
    pub radius_ok: bool,
    pub certified: bool,
}

pub fn ift_check(eta: f64, sigma: f64, l: f64, admissible_radius: f64) -> IftCheck {
    let contraction = if eta == 0.0 {
        0.0
    } else {
        2.0 * l * sigma * sigma * eta
    };
    let radius = if eta == 0.0 { 0.0 } else { 2.0 * eta * sigma };
    let contraction_ok = contraction < 1.0 - STRICT_SLACK;
    let radius_ok = radius <= admissible_radius;
    IftCheck {
        eta,
        sigma,
        l,
        contraction,
        radius,
        admissible_radius,
        contraction_ok,
        radius_ok,
        certified: contraction_ok && radius_ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    /// Failure category reported in the verdict.
    pub category: String,
    pub holds: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Condition {
    fn new(name: &str, category: &str, holds: bool, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            category: category.into(),
            holds,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    NotCertified { reason: String, detail: String },
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified)
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Verdict::Certified => None,
            Verdict::NotCertified { reason, .. } => Some(reason),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    /// Around an atomistic equilibrium, asserting a nearby coupled one.
    APriori,
    /// Around a coupled equilibrium, asserting a nearby atomistic one.
    APosteriori,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub potential: PotentialSpec,
    pub partition: RegionPartition,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "F")]
    pub f: f64,
    /// SHA-256 of the load values as little-endian `f64` bytes.
    pub load_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Residual bound used by the certificate.
    pub eta: f64,
    /// Exact dual norm of the consistency error, for sharpness comparisons.
    pub eta_exact: f64,
    pub sigma: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub lipschitz: Option<LipschitzEstimate>,
    pub contraction: f64,
    pub radius: f64,
    pub admissible_radius: f64,
    pub error_bound: f64,
    pub delta1: f64,
    /// Not computed: its role is played by the ball and contraction checks.
    pub delta2: Option<f64>,
    /// `eps^{1/2}||y''||_{l^2(I)} + eps^{3/2}(||y'''||_{l^2(C'\I')} + ||y''||^2_{l^4(C)})`.
    pub smoothness: f64,
    /// `min A` (a priori) or `c_qc` (a posteriori).
    pub stability_lower: f64,
    /// `4 eps C_3 ||y''||_{l^inf(C)}`
    pub gap: f64,
    pub c2_bar: f64,
    pub c3_bar: f64,
    pub min_strain: f64,
    pub base_residual: f64,
    pub conditions: Vec<Condition>,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

pub fn load_hash(f: &PeriodicField) -> String {
    let mut h = Sha256::new();
    for v in f.values() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn smoothness_indicator(y: &Deformation, part: &RegionPartition) -> f64 {
    let eps = y.eps();
    let y2 = y.second_difference();
    let y3 = y.third_difference();
    eps.sqrt() * lp_norm(&y2, NormIndex::TWO, eps, &part.interface())
        + eps.powf(1.5)
            * (lp_norm(&y3, NormIndex::TWO, eps, &part.continuum_interior_bonds())
                + lp_norm(
                    &y2,
                    NormIndex::new(4.0).expect("4 is a valid index"),
                    eps,
                    part.continuum(),
                )
                .powi(2))
}

struct Inputs<'a> {
    kind: CertificateKind,
    y: &'a Deformation,
    pot: &'a Potential,
    part: &'a RegionPartition,
    f: &'a PeriodicField,
    opts: &'a CertifyOptions,
    base_residual: f64,
    stability_lower: f64,
    sigma: f64,
    delta1: f64,
    conditions: Vec<Condition>,
}

fn finish(inp: Inputs<'_>) -> Result<Certificate> {
    let Inputs {
        kind,
        y,
        pot,
        part,
        f,
        opts,
        base_residual,
        stability_lower,
        sigma,
        delta1,
        mut conditions,
    } = inp;
    let report = consistency_report(y, pot, part, NormIndex::TWO)?;
    let eta = report.bound;
    let gap = 4.0 * y.eps() * report.c3_bar * continuum_curvature(y, part);
    let admissible_radius = y.eps().sqrt() * (1.0 - opts.delta) * y.min_strain();
    let radius = 2.0 * eta * sigma;
    let lipschitz = if sigma.is_finite() {
        lipschitz_estimate(y, pot, radius, opts.delta).ok()
    } else {
        None
    };
    let l = lipschitz.map_or(f64::INFINITY, |e| e.l);
    let ift = ift_check(eta, sigma, l, admissible_radius);
    conditions.push(Condition::new(
        "2 eta sigma <= eps^(1/2) (1 - delta) min y'",
        "ball admissibility",
        lipschitz.is_some() && ift.radius_ok,
        ift.radius,
        admissible_radius,
    ));
    conditions.push(Condition::new(
        "2 L sigma^2 eta < 1",
        "contraction",
        ift.contraction_ok,
        ift.contraction,
        1.0,
    ));
    let verdict = match conditions.iter().find(|c| !c.holds) {
        None => Verdict::Certified,
        Some(c) => Verdict::NotCertified {
            reason: c.category.clone(),
            detail: format!(
                "{} fails: value {:e}, threshold {:e}",
                c.name, c.value, c.threshold
            ),
        },
    };
    Ok(Certificate {
        kind,
        eta,
        eta_exact: report.measured,
        sigma,
        l,
        lipschitz,
        contraction: ift.contraction,
        radius: ift.radius,
        admissible_radius,
        error_bound: ift.radius,
        delta1,
        delta2: None,
        smoothness: smoothness_indicator(y, part),
        stability_lower,
        gap,
        c2_bar: report.c2_bar,
        c3_bar: report.c3_bar,
        min_strain: y.min_strain(),
        base_residual,
        conditions,
        verdict,
        provenance: Provenance {
            potential: pot.spec().clone(),
            partition: part.clone(),
            n: y.n(),
            f: y.gradient(),
            load_hash: load_hash(f),
        },
    })
}

/// Certificate for a coupled equilibrium near the atomistic equilibrium `y`.
/// Hypothesis failures produce a `NotCertified` verdict; an input that is not
/// an equilibrium is an error.
pub fn apriori_certificate(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
    f: &PeriodicField,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    let residual = equilibrium_residual(Model::Atomistic, pot, y, f)?;
    if residual > opts.equilibrium_tol {
        return Err(Error::NotEquilibrium {
            residual,
            tolerance: opts.equilibrium_tol,
        });
    }
    let half_r_star = 0.5 * pot.r_star();
    let a_lower = hessian_coeffs(y, pot, part)?.min_a();
    let (_, c3) = continuum_constants(y, pot, part);
    let delta1 = if c3 > 0.0 {
        a_lower / (8.0 * c3)
    } else {
        f64::INFINITY
    };
    let curvature = y.eps() * continuum_curvature(y, part);
    let conditions = vec![
        Condition::new(
            "min y' >= r_*/2",
            "concavity bound",
            y.min_strain() >= half_r_star,
            y.min_strain(),
            half_r_star,
        ),
        Condition::new("min A > 0", "stability", a_lower > 0.0, a_lower, 0.0),
        Condition::new(
            "eps ||y''||_inf(C) <= delta1",
            "stability",
            curvature <= delta1,
            curvature,
            delta1,
        ),
    ];
    let sigma = if a_lower > 0.0 {
        2.0 / a_lower
    } else {
        f64::INFINITY
    };
    finish(Inputs {
        kind: CertificateKind::APriori,
        y,
        pot,
        part,
        f,
        opts,
        base_residual: residual,
        stability_lower: a_lower,
        sigma,
        delta1,
        conditions,
    })
}

/// Certificate for an atomistic equilibrium near the coupled equilibrium `y_qc`.
pub fn apost_certificate(
    y_qc: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
    f: &PeriodicField,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    let residual = equilibrium_residual(Model::Qnl(part), pot, y_qc, f)?;
    if residual > opts.equilibrium_tol {
        return Err(Error::NotEquilibrium {
            residual,
            tolerance: opts.equilibrium_tol,
        });
    }
    let c_qc = stability_constant(Model::Qnl(part), pot, y_qc)?.constant;
    let (_, c3) = continuum_constants(y_qc, pot, part);
    let delta1 = if c3 > 0.0 {
        c_qc / (8.0 * c3)
    } else {
        f64::INFINITY
    };
    let curvature = y_qc.eps() * continuum_curvature(y_qc, part);
    let gap = 4.0 * c3 * curvature;
    let stiffest = continuum_max_pair_stiffness(y_qc, pot, part);
    let conditions = vec![
        Condition::new(
            "max_C phi''(y'_xi + y'_xi+1) <= 0",
            "concavity",
            stiffest <= 0.0,
            stiffest,
            0.0,
        ),
        Condition::new("c_qc > 0", "stability", c_qc > 0.0, c_qc, 0.0),
        Condition::new(
            "eps ||y''||_inf(C) <= delta1",
            "stability",
            curvature <= delta1,
            curvature,
            delta1,
        ),
    ];
    let lower = c_qc - gap;
    let sigma = if lower > 0.0 {
        1.0 / lower
    } else {
        f64::INFINITY
    };
    finish(Inputs {
        kind: CertificateKind::APosteriori,
        y: y_qc,
        pot,
        part,
        f,
        opts,
        base_residual: residual,
        stability_lower: c_qc,
        sigma,
        delta1,
        conditions,
    })
}

/// Outcome of solving for the counterpart equilibrium a certificate predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub converged: bool,
    pub iterations: usize,
    /// `||(y - y_qc)'||_{l^2_eps}`
    pub error: f64,
    pub error_bound: f64,
    pub within_bound: bool,
    /// Stability constant of the counterpart solution.
    pub counterpart_stability: f64,
    pub solver_error: Option<String>,
}

impl Verification {
    pub fn sound(&self) -> bool {
        self.converged && self.within_bound && self.counterpart_stability > 0.0
    }
}

pub fn strain_distance(a: &Deformation, b: &Deformation) -> f64 {
    let eps = a.eps();
    (eps * a.strain_difference(b).iter().map(|d| d * d).sum::<f64>()).sqrt()
}

fn verify(
    counterpart: Model<'_>,
    cert: &Certificate,
    y: &Deformation,
    pot: &Potential,
    f: &PeriodicField,
    solve: &SolveOptions,
) -> Result<Verification> {
    match newton_solve(counterpart, pot, y, f, solve) {
        Ok(out) => {
            let error = strain_distance(&out.y, y);
            let c = stability_constant(counterpart, pot, &out.y)?.constant;
            Ok(Verification {
                converged: true,
                iterations: out.iterations,
                error,
                error_bound: cert.error_bound,
                within_bound: error <= cert.error_bound,
                counterpart_stability: c,
                solver_error: None,
            })
        }
        Err(e) => Ok(Verification {
            converged: false,
            iterations: 0,
            error: f64::NAN,
            error_bound: cert.error_bound,
            within_bound: false,
            counterpart_stability: f64::NAN,
            solver_error: Some(e.to_string()),
        }),
    }
}

/// Solves the coupled problem from the atomistic equilibrium and compares.
pub fn verify_apriori(
    cert: &Certificate,
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
    f: &PeriodicField,
    solve: &SolveOptions,
) -> Result<Verification> {
    verify(Model::Qnl(part), cert, y, pot, f, solve)
}

/// Solves the atomistic problem from the coupled equilibrium and compares.
pub fn verify_apost(
    cert: &Certificate,
    y_qc: &Deformation,
    pot: &Potential,
    f: &PeriodicField,
    solve: &SolveOptions,
) -> Result<Verification> {
    verify(Model::Atomistic, cert, y_qc, pot, f, solve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainConfig;
    use crate::hessian::StrainHessian;
    use crate::qc::hessian_qnl;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ift_arithmetic() {
        let c = ift_check(1e-3, 2.0, 10.0, 1.0);
        assert!((c.contraction - 0.08).abs() < 1e-15);
        assert!((c.radius - 4e-3).abs() < 1e-15);
        assert!(c.certified);
        let zero = ift_check(0.0, 2.0, f64::INFINITY, 0.0);
        assert!(zero.certified && zero.radius == 0.0);
        let edge = ift_check(0.125, 2.0, 1.0, 10.0);
        assert_eq!(edge.contraction, 1.0);
        assert!(!edge.certified);
    }

    #[test]
    fn lipschitz_arithmetic_and_admissibility() {
        let pot = Potential::lennard_jones();
        let y = Deformation::uniform(ChainConfig::new(64, 1.05).unwrap());
        let e = lipschitz_estimate(&y, &pot, 0.0, 0.5).unwrap();
        assert!((e.l - 8.0 * e.l_prime).abs() < 1e-12 * e.l);
        assert!(matches!(
            lipschitz_estimate(&y, &pot, 1.0, 0.5),
            Err(Error::BallInadmissible { .. })
        ));
    }

    #[test]
    fn lipschitz_dominates_sampled_quotients() {
        let pot = Potential::lennard_jones();
        let n = 16;
        let part = RegionPartition::interval(n, 5, 10).unwrap();
        let y = Deformation::uniform(ChainConfig::new(n, 1.05).unwrap());
        let radius = 0.05;
        let est = lipschitz_estimate(&y, &pot, radius, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = |scale: f64| -> Vec<f64> {
            let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = d.iter().sum::<f64>() / n as f64;
            d.iter_mut().for_each(|x| *x -= m);
            let mx = d.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            d.iter_mut().for_each(|x| *x *= scale / mx);
            d
        };
        let disp =
            |d: &[f64]| crate::chain::deformation::displacement_from_strain_increments(d, y.eps());
        let l2 = |d: &[f64]| (y.eps() * d.iter().map(|x| x * x).sum::<f64>()).sqrt();
        for _ in 0..200 {
            let d1 = draw(est.linf_radius * 0.999);
            let d2 = draw(est.linf_radius * 0.999);
            let u = draw(1.0);
            let v = draw(1.0);
            let y1 = y.perturbed(&disp(&d1), 1.0);
            let y2 = y.perturbed(&disp(&d2), 1.0);
            for h in [
                |a: &Deformation, p: &Potential, q: &RegionPartition| hessian_qnl(a, p, q).unwrap(),
                |a: &Deformation, p: &Potential, _: &RegionPartition| {
                    crate::chain::hessian_atomistic(a, p).unwrap()
                },
            ] {
                let h1: StrainHessian = h(&y1, &pot, &part);
                let h2: StrainHessian = h(&y2, &pot, &part);
                let diff = (h1.form(&u, &v) - h2.form(&u, &v)).abs();
                let dw = y1
                    .strain_difference(&y2)
                    .iter()
                    .fold(0.0f64, |a, x| a.max(x.abs()));
                assert!(diff <= est.l_prime * dw * l2(&u) * l2(&v) * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn uniform_state_is_certified_with_zero_error() {
        let pot = Potential::lennard_jones();
        let n = 32;
        let y = Deformation::uniform(ChainConfig::new(n, 1.05).unwrap());
        let part = RegionPartition::interval(n, 10, 20).unwrap();
        let f = PeriodicField::atoms(vec![0.0; n]);
        let opts = CertifyOptions::default();
        for cert in [
            apriori_certificate(&y, &pot, &part, &f, &opts).unwrap(),
            apost_certificate(&y, &pot, &part, &f, &opts).unwrap(),
        ] {
            assert_eq!(cert.eta, 0.0);
            assert_eq!(cert.error_bound, 0.0);
            assert!(cert.verdict.is_certified(), "{:?}", cert.verdict);
        }
    }

    #[test]
    fn compressed_state_fails_concavity_gate() {
        let pot = Potential::lennard_jones();
        let n = 16;
        let y = Deformation::uniform(ChainConfig::new(n, 0.5).unwrap());
        let part = RegionPartition::interval(n, 5, 8).unwrap();
        let f = PeriodicField::atoms(vec![0.0; n]);
        let cert = apriori_certificate(&y, &pot, &part, &f, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.verdict.reason(), Some("concavity bound"));
    }

    #[test]
    fn non_equilibrium_is_an_error() {
        let pot = Potential::lennard_jones();
        let y = Deformation::from_strains(vec![1.0, 1.1, 0.9, 1.0, 1.05, 0.95]).unwrap();
        let part = RegionPartition::empty(6);
        let f = PeriodicField::atoms(vec![0.0; 6]);
        assert!(matches!(
            apriori_certificate(&y, &pot, &part, &f, &CertifyOptions::default()),
            Err(Error::NotEquilibrium { .. })
        ));
    }

    #[test]
    fn load_hash_is_stable() {
        let h = load_hash(&PeriodicField::atoms(vec![]));
        assert_eq!(
            h,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
