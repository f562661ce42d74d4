//! The fully atomistic chain: nearest and next-nearest neighbour pair
//! interactions on a periodic lattice of spacing `eps = 1/N`.

pub mod deformation;
pub mod potential;

pub use deformation::{AdmissibilityReport, ChainConfig, Deformation};
pub use potential::{Potential, PotentialSpec};

use crate::calculus::{BondFunctional, PeriodicField};
use crate::error::Result;
use crate::hessian::StrainHessian;

/// `Phi(y) = eps * sum (phi(y'_xi) + phi(y'_xi + y'_{xi+1}))`.
pub fn energy_atomistic(y: &Deformation, pot: &Potential) -> Result<f64> {
    y.check_admissible()?;
    let s = y.strains();
    let n = s.len();
    let total: f64 = (0..n)
        .map(|k| pot.value(s[k]) + pot.value(s[k] + s[(k + 1) % n]))
        .sum();
    Ok(y.eps() * total)
}

/// `Phi(y) - <f, u>`, the energy under a dead load `f`.
pub fn total_energy_atomistic(y: &Deformation, pot: &Potential, f: &PeriodicField) -> Result<f64> {
    Ok(energy_atomistic(y, pot)? - load_work(y, f))
}

/// `eps * sum f_xi u_xi`.
pub fn load_work(y: &Deformation, f: &PeriodicField) -> f64 {
    y.eps()
        * f.values()
            .iter()
            .zip(y.displacement())
            .map(|(a, b)| a * b)
            .sum::<f64>()
}

/// Bond coefficients of `DPhi(y)`:
/// `s_xi = phi'(y'_xi) + phi'(y'_{xi-1} + y'_xi) + phi'(y'_xi + y'_{xi+1})`.
pub fn grad_atomistic(y: &Deformation, pot: &Potential) -> Result<BondFunctional> {
    y.check_admissible()?;
    let s = y.strains();
    let n = s.len();
    let pair: Vec<f64> = (0..n).map(|k| pot.d1(s[k] + s[(k + 1) % n])).collect();
    Ok(BondFunctional::new(
        (0..n)
            .map(|k| pot.d1(s[k]) + pair[(k + n - 1) % n] + pair[k])
            .collect(),
    ))
}

/// `D^2 Phi(y)[u, u] = eps sum phi''(y'_xi)|u'_xi|^2 + eps sum phi''(y'_xi + y'_{xi+1})|u'_xi + u'_{xi+1}|^2`.
pub fn hessian_atomistic(y: &Deformation, pot: &Potential) -> Result<StrainHessian> {
    y.check_admissible()?;
    let s = y.strains();
    let n = s.len();
    let mut h = StrainHessian::zeros(n);
    for k in 0..n {
        h.add_diagonal(k, pot.d2(s[k]));
        h.add_pair_sum(k, pot.d2(s[k] + s[(k + 1) % n]));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, f: f64, amp: f64, seed: u64) -> Deformation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-amp..amp)).collect();
        let m = u.iter().sum::<f64>() / n as f64;
        u.iter_mut().for_each(|x| *x -= m);
        Deformation::new(ChainConfig::new(n, f).unwrap(), u).unwrap()
    }

    fn random_direction(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = w.iter().sum::<f64>() / n as f64;
        w.iter_mut().for_each(|x| *x -= m);
        // Normalize so that ||w'||_{l^2_eps} = 1.
        let eps = 1.0 / n as f64;
        let norm = (0..n)
            .map(|k| ((w[k] - w[(k + n - 1) % n]) / eps).powi(2) * eps)
            .sum::<f64>()
            .sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        w
    }

    #[test]
    fn uniform_energy_lj() {
        let pot = Potential::lennard_jones();
        let y = Deformation::uniform(ChainConfig::new(10, 1.0).unwrap());
        let e = energy_atomistic(&y, &pot).unwrap();
        let expected = -1.0 + (2f64.powi(-12) - 2.0 * 2f64.powi(-6));
        assert!((e - expected).abs() < 1e-14);
        assert!((e + 1.031006).abs() < 1e-6);
    }

    #[test]
    fn energy_matches_double_loop() {
        let pot = Potential::lennard_jones();
        let y = random_state(8, 1.05, 0.01, 1);
        // Positions of atoms 0..2N, sum over pairs with separation 1 and 2 whose
        // left atom lies in one period.
        let n = 8;
        let eps = y.eps();
        let pos = |i: i64| -> f64 {
            let k = (i - 1).rem_euclid(n as i64) as usize;
            y.gradient() * (i as f64) * eps + y.displacement()[k]
        };
        let mut e = 0.0;
        for i in 1..=n as i64 {
            for d in 1..=2 {
                let r = (pos(i + d) - pos(i)) / eps;
                e += eps * pot.value(r);
            }
        }
        assert!((e - energy_atomistic(&y, &pot).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let pot = Potential::lennard_jones();
        for seed in 0..5 {
            let y = random_state(12, 1.05, 0.005, seed);
            let w = random_direction(12, 100 + seed);
            let h = 1e-5;
            let fd = (energy_atomistic(&y.perturbed(&w, h), &pot).unwrap()
                - energy_atomistic(&y.perturbed(&w, -h), &pot).unwrap())
                / (2.0 * h);
            let wy = y.with_displacement(w.clone());
            let w_prime: Vec<f64> = wy.displacement_strains();
            let g = grad_atomistic(&y, &pot).unwrap().apply(&w_prime, y.eps());
            assert!((fd - g).abs() <= 1e-7 * g.abs().max(1.0), "{fd} vs {g}");
        }
    }

    #[test]
    fn gradient_term_by_term() {
        let pot = Potential::lennard_jones();
        let y = random_state(8, 1.05, 0.005, 9);
        let s = y.strains();
        let g = grad_atomistic(&y, &pot).unwrap();
        for k in 0..8 {
            let prev = s[(k + 7) % 8];
            let next = s[(k + 1) % 8];
            let want = pot.d1(s[k]) + pot.d1(prev + s[k]) + pot.d1(s[k] + next);
            assert!((g.coeffs()[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_matches_second_difference() {
        let pot = Potential::lennard_jones();
        for seed in 0..5 {
            let y = random_state(10, 1.05, 0.005, seed);
            let w = random_direction(10, 50 + seed);
            let h = 1e-4;
            let e0 = energy_atomistic(&y, &pot).unwrap();
            let fd = (energy_atomistic(&y.perturbed(&w, h), &pot).unwrap() - 2.0 * e0
                + energy_atomistic(&y.perturbed(&w, -h), &pot).unwrap())
                / (h * h);
            let w_prime = y.with_displacement(w.clone()).displacement_strains();
            let q = hessian_atomistic(&y, &pot).unwrap().quadratic(&w_prime);
            assert!((fd - q).abs() <= 1e-5 * q.abs(), "{fd} vs {q}");
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let pot = Potential::morse(4.0).unwrap();
        let y = random_state(9, 1.0, 0.01, 3);
        let hs = hessian_atomistic(&y, &pot).unwrap();
        let a = random_direction(9, 1);
        let b = random_direction(9, 2);
        assert!((hs.form(&a, &b) - hs.form(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let pot = Potential::lennard_jones();
        let y = random_state(8, 1.1, 0.01, 4);
        let shifted: Vec<f64> = y.displacement().iter().map(|x| x + 0.3).collect();
        let m = shifted.iter().sum::<f64>() / 8.0;
        let z = y.with_displacement(shifted.iter().map(|x| x - m).collect());
        assert!(
            (energy_atomistic(&y, &pot).unwrap() - energy_atomistic(&z, &pot).unwrap()).abs()
                < 1e-13
        );
        let gy = grad_atomistic(&y, &pot).unwrap();
        let gz = grad_atomistic(&z, &pot).unwrap();
        for (a, b) in gy.coeffs().iter().zip(gz.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn strain_gradient_identity_as_matrices() {
        // |a + b|^2 = 2|a|^2 + 2|b|^2 - |b - a|^2, assembled bond by bond.
        let mut direct = StrainHessian::zeros(7);
        let mut split = StrainHessian::zeros(7);
        for k in 0..7 {
            let c = 0.3 + k as f64;
            direct.add_pair_sum(k, c);
            split.add_diagonal(k, 2.0 * c);
            split.add_diagonal((k + 1) % 7, 2.0 * c);
            split.add_pair_difference(k, -c);
        }
        assert!((direct.dense() - split.dense()).abs().max() < 1e-14);
    }

    #[test]
    fn inadmissible_state_is_rejected() {
        let pot = Potential::lennard_jones();
        let y = Deformation::from_strains(vec![1.0, 1.0, -0.1, 2.1]).unwrap();
        assert!(matches!(
            energy_atomistic(&y, &pot),
            Err(Error::Inadmissible { bond: 3, .. })
        ));
    }
}
