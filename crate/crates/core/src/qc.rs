//! Quasinonlocal coupling: atomistic second-neighbour terms around atoms in the
//! atomistic set, Cauchy-Born split terms everywhere else.

use serde::{Deserialize, Serialize};

use crate::calculus::{BondFunctional, IndexSet};
use crate::chain::{Deformation, Potential};
use crate::error::{Error, Result};
use crate::hessian::StrainHessian;

/// Atomistic/continuum split of the atoms `{1..N}` together with the interface
/// and bond-indexed ("primed") sets derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPartition {
    atomistic: IndexSet,
    continuum: IndexSet,
    interface_left: IndexSet,
    interface_right: IndexSet,
    atomistic_bonds: IndexSet,
    continuum_bonds: IndexSet,
    interface_bonds: IndexSet,
}

impl RegionPartition {
    pub fn new(atomistic: IndexSet) -> Result<Self> {
        let continuum = atomistic.complement();
        let il = continuum.intersection(&atomistic.shifted(-1));
        let ir = continuum.intersection(&atomistic.shifted(1));
        if let Some(&xi) = il.intersection(&ir).members().first() {
            return Err(Error::SingleAtomContinuum {
                component: vec![xi],
            });
        }
        let il_p = il.shifted(1);
        let atomistic_bonds = atomistic.difference(&il_p);
        let continuum_bonds = continuum.union(&il_p);
        let interface_bonds = ir.union(&il_p);
        Ok(Self {
            atomistic,
            continuum,
            interface_left: il,
            interface_right: ir,
            atomistic_bonds,
            continuum_bonds,
            interface_bonds,
        })
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(n: usize, atomistic: I) -> Result<Self> {
        Self::new(IndexSet::from_indices(n, atomistic)?)
    }

    /// Every atom atomistic; the coupled model is the atomistic one.
    pub fn full(n: usize) -> Self {
        Self::new(IndexSet::full(n)).expect("full partition has no continuum")
    }

    /// No atomistic atoms; the coupled model is Cauchy-Born.
    pub fn empty(n: usize) -> Self {
        Self::new(IndexSet::empty(n)).expect("empty partition has no interface")
    }

    /// Atoms `start..=end`, wrapping past `N` when `start > end`.
    pub fn interval(n: usize, start: usize, end: usize) -> Result<Self> {
        for index in [start, end] {
            if index == 0 || index > n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        let indices: Vec<usize> = if start <= end {
            (start..=end).collect()
        } else {
            (start..=n).chain(1..=end).collect()
        };
        Self::from_indices(n, indices)
    }

    pub fn n(&self) -> usize {
        self.atomistic.n()
    }

    /// `A`
    pub fn atomistic(&self) -> &IndexSet {
        &self.atomistic
    }

    /// `C`
    pub fn continuum(&self) -> &IndexSet {
        &self.continuum
    }

    /// `I_l = {xi in C : xi + 1 in A}`
    pub fn interface_left(&self) -> &IndexSet {
        &self.interface_left
    }

    /// `I_r = {xi in C : xi - 1 in A}`
    pub fn interface_right(&self) -> &IndexSet {
        &self.interface_right
    }

    /// `I = I_l u I_r`
    pub fn interface(&self) -> IndexSet {
        self.interface_left.union(&self.interface_right)
    }

    /// `I_l' = I_l + 1`
    pub fn interface_left_bonds(&self) -> IndexSet {
        self.interface_left.shifted(1)
    }

    /// `I_r' = I_r`
    pub fn interface_right_bonds(&self) -> &IndexSet {
        &self.interface_right
    }

    /// `A' = A \ I_l'`
    pub fn atomistic_bonds(&self) -> &IndexSet {
        &self.atomistic_bonds
    }

    /// `C' = C u I_l'`
    pub fn continuum_bonds(&self) -> &IndexSet {
        &self.continuum_bonds
    }

    /// `I' = I_r' u I_l'`
    pub fn interface_bonds(&self) -> &IndexSet {
        &self.interface_bonds
    }

    /// `C' \ I'`, the bonds with continuum atoms on both ends.
    pub fn continuum_interior_bonds(&self) -> IndexSet {
        self.continuum_bonds.difference(&self.interface_bonds)
    }

    fn is_atomistic0(&self, k: usize) -> bool {
        self.atomistic.mask()[k]
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    #[serde(rename = "N")]
    n: usize,
    atomistic: Vec<usize>,
}

impl Serialize for RegionPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartitionRepr {
            n: self.n(),
            atomistic: self.atomistic.members().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegionPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PartitionRepr::deserialize(d)?;
        RegionPartition::from_indices(r.n, r.atomistic).map_err(serde::de::Error::custom)
    }
}

fn check_size(y: &Deformation, part: &RegionPartition) -> Result<()> {
    if y.n() != part.n() {
        return Err(Error::LengthMismatch {
            expected: y.n(),
            got: part.n(),
        });
    }
    y.check_admissible()
}

/// `Phi_qc(y) = eps sum phi(y'_xi) + eps sum_{A} phi(y'_xi + y'_{xi+1})
///  + eps sum_{C} (phi(2y'_xi) + phi(2y'_{xi+1})) / 2`.
pub fn energy_qnl(y: &Deformation, pot: &Potential, part: &RegionPartition) -> Result<f64> {
    check_size(y, part)?;
    let s = y.strains();
    let n = s.len();
    let mut total = 0.0;
    for k in 0..n {
        let kp = (k + 1) % n;
        total += pot.value(s[k]);
        total += if part.is_atomistic0(k) {
            pot.value(s[k] + s[kp])
        } else {
            0.5 * (pot.value(2.0 * s[k]) + pot.value(2.0 * s[kp]))
        };
    }
    Ok(y.eps() * total)
}

/// Bond coefficients of `DPhi_qc(y)`.
pub fn grad_qnl(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<BondFunctional> {
    check_size(y, part)?;
    let s = y.strains();
    let n = s.len();
    let mut c: Vec<f64> = s.iter().map(|&r| pot.d1(r)).collect();
    for k in 0..n {
        let kp = (k + 1) % n;
        if part.is_atomistic0(k) {
            let g = pot.d1(s[k] + s[kp]);
            c[k] += g;
            c[kp] += g;
        } else {
            c[k] += pot.d1(2.0 * s[k]);
            c[kp] += pot.d1(2.0 * s[kp]);
        }
    }
    Ok(BondFunctional::new(c))
}

/// `D^2 Phi_qc(y)` assembled term by term.
pub fn hessian_qnl(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<StrainHessian> {
    check_size(y, part)?;
    let s = y.strains();
    let n = s.len();
    let mut h = StrainHessian::zeros(n);
    for k in 0..n {
        let kp = (k + 1) % n;
        h.add_diagonal(k, pot.d2(s[k]));
        if part.is_atomistic0(k) {
            h.add_pair_sum(k, pot.d2(s[k] + s[kp]));
        } else {
            h.add_diagonal(k, 2.0 * pot.d2(2.0 * s[k]));
            h.add_diagonal(kp, 2.0 * pot.d2(2.0 * s[kp]));
        }
    }
    Ok(h)
}

/// Coefficients of the strain-gradient forms of both Hessians:
/// `D^2 Phi[u,u] = eps sum A_xi |u'_xi|^2 + eps sum eps^2 B_xi |u''_xi|^2` and
/// `D^2 Phi_qc[u,u] = eps sum A~_xi |u'_xi|^2 + eps sum_{A} eps^2 B_xi |u''_xi|^2`.
/// `a` and `a_tilde` are bond-sited, `b` is atom-sited (0-based storage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianCoeffs {
    pub a: Vec<f64>,
    pub a_tilde: Vec<f64>,
    pub b: Vec<f64>,
}

impl HessianCoeffs {
    pub fn min_a(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_a_tilde(&self) -> f64 {
        self.a_tilde.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_xi |A_xi - A~_xi|`
    pub fn max_gap(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.a_tilde)
            .fold(0.0, |m, (a, t)| m.max((a - t).abs()))
    }

    /// The atomistic Hessian rebuilt from `A` and `B`.
    pub fn atomistic_hessian(&self) -> StrainHessian {
        let n = self.a.len();
        let mut h = StrainHessian::zeros(n);
        for k in 0..n {
            h.add_diagonal(k, self.a[k]);
            h.add_pair_difference(k, self.b[k]);
        }
        h
    }

    /// The coupled Hessian rebuilt from `A~` and `B` on the atomistic atoms.
    pub fn qnl_hessian(&self, part: &RegionPartition) -> StrainHessian {
        let n = self.a.len();
        let mut h = StrainHessian::zeros(n);
        for k in 0..n {
            h.add_diagonal(k, self.a_tilde[k]);
            if part.is_atomistic0(k) {
                h.add_pair_difference(k, self.b[k]);
            }
        }
        h
    }
}

/// `A_xi`, the four-case `A~_xi` over `A'`, `I_r'`, `I_l'`, `C' \ I'`, and
/// `B_xi = -phi''(y'_xi + y'_{xi+1})`.
pub fn hessian_coeffs(
    y: &Deformation,
    pot: &Potential,
    part: &RegionPartition,
) -> Result<HessianCoeffs> {
    check_size(y, part)?;
    let s = y.strains();
    let n = s.len();
    let kappa: Vec<f64> = (0..n).map(|k| pot.d2(s[k] + s[(k + 1) % n])).collect();
    let il_p = part.interface_left_bonds();
    let ir_p = part.interface_right_bonds();
    let a_p = part.atomistic_bonds();
    let mut a = Vec::with_capacity(n);
    let mut a_tilde = Vec::with_capacity(n);
    for k in 0..n {
        let km = (k + n - 1) % n;
        let nn = pot.d2(s[k]);
        let cb = 2.0 * pot.d2(2.0 * s[k]);
        let full = nn + 2.0 * kappa[km] + 2.0 * kappa[k];
        a.push(full);
        let xi = k as i64 + 1;
        let t = if a_p.contains(xi) {
            full
        } else if ir_p.contains(xi) {
            nn + 2.0 * kappa[km] + cb
        } else if il_p.contains(xi) {
            nn + 2.0 * kappa[k] + cb
        } else {
            nn + 2.0 * cb
        };
        a_tilde.push(t);
    }
    Ok(HessianCoeffs {
        a,
        a_tilde,
        b: kappa.iter().map(|k| -k).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{energy_atomistic, grad_atomistic, hessian_atomistic, ChainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(p: &IndexSet) -> Vec<usize> {
        p.members().to_vec()
    }

    fn random_state(n: usize, seed: u64) -> Deformation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strains: Vec<f64> = (0..n).map(|_| rng.random_range(0.8..1.3)).collect();
        Deformation::from_strains(strains).unwrap()
    }

    #[test]
    fn interval_example_sets() {
        let p = RegionPartition::from_indices(12, [5, 6, 7, 8]).unwrap();
        assert_eq!(set(p.interface_left()), vec![4]);
        assert_eq!(set(p.interface_right()), vec![9]);
        assert_eq!(set(&p.interface_left_bonds()), vec![5]);
        assert_eq!(set(p.interface_right_bonds()), vec![9]);
        assert_eq!(set(p.atomistic_bonds()), vec![6, 7, 8]);
        assert_eq!(set(p.continuum_bonds()), vec![1, 2, 3, 4, 5, 9, 10, 11, 12]);
        assert_eq!(set(p.interface_bonds()), vec![5, 9]);
        assert_eq!(p, RegionPartition::interval(12, 5, 8).unwrap());
    }

    #[test]
    fn wrapping_interval() {
        let p = RegionPartition::interval(10, 9, 2).unwrap();
        assert_eq!(set(p.atomistic()), vec![1, 2, 9, 10]);
        assert_eq!(set(p.interface_left()), vec![8]);
        assert_eq!(set(p.interface_right()), vec![3]);
        assert_eq!(set(p.atomistic_bonds()), vec![1, 2, 10]);
    }

    #[test]
    fn single_atom_continuum_rejected() {
        let err = RegionPartition::from_indices(8, [1, 2, 4, 5]).unwrap_err();
        assert_eq!(err, Error::SingleAtomContinuum { component: vec![3] });
    }

    #[test]
    fn degenerate_partitions() {
        let full = RegionPartition::full(6);
        assert!(full.continuum().is_empty() && full.interface().is_empty());
        let empty = RegionPartition::empty(6);
        assert_eq!(empty.continuum_bonds().len(), 6);
        assert!(empty.interface_bonds().is_empty());
    }

    #[test]
    fn partition_json_round_trip() {
        let p = RegionPartition::from_indices(12, [5, 6, 7, 8]).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        assert_eq!(js, r#"{"N":12,"atomistic":[5,6,7,8]}"#);
        let back: RegionPartition = serde_json::from_str(&js).unwrap();
        assert_eq!(back, p);
        assert!(
            serde_json::from_str::<RegionPartition>(r#"{"N":8,"atomistic":[1,2,4,5]}"#).is_err()
        );
    }

    #[test]
    fn energy_matches_term_oracle() {
        let pot = Potential::lennard_jones();
        let p = RegionPartition::from_indices(12, [5, 6, 7, 8]).unwrap();
        let y = random_state(12, 2);
        let s = y.strains();
        let at = |xi: i64| s[crate::calculus::wrap(xi, 12)];
        let mut e = 0.0;
        for xi in 1..=12i64 {
            e += pot.value(at(xi));
        }
        for xi in 5..=8i64 {
            e += pot.value(at(xi) + at(xi + 1));
        }
        for xi in [1i64, 2, 3, 4, 9, 10, 11, 12] {
            e += 0.5 * (pot.value(2.0 * at(xi)) + pot.value(2.0 * at(xi + 1)));
        }
        e /= 12.0;
        assert!((e - energy_qnl(&y, &pot, &p).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn limits_reproduce_pure_models() {
        let pot = Potential::lennard_jones();
        let y = random_state(10, 5);
        let full = RegionPartition::full(10);
        assert!(
            (energy_qnl(&y, &pot, &full).unwrap() - energy_atomistic(&y, &pot).unwrap()).abs()
                < 1e-14
        );
        assert_eq!(
            grad_qnl(&y, &pot, &full).unwrap(),
            grad_atomistic(&y, &pot).unwrap()
        );
        assert_eq!(
            hessian_qnl(&y, &pot, &full).unwrap(),
            hessian_atomistic(&y, &pot).unwrap()
        );
        let cb: f64 = y
            .strains()
            .iter()
            .map(|&r| pot.value(r) + pot.value(2.0 * r))
            .sum::<f64>()
            / 10.0;
        assert!((energy_qnl(&y, &pot, &RegionPartition::empty(10)).unwrap() - cb).abs() < 1e-14);
    }

    #[test]
    fn uniform_state_is_exact() {
        let pot = Potential::lennard_jones();
        let y = Deformation::uniform(ChainConfig::new(12, 1.0).unwrap());
        let p = RegionPartition::from_indices(12, [5, 6, 7, 8]).unwrap();
        let e = energy_qnl(&y, &pot, &p).unwrap();
        assert!((e - pot.value(1.0) - pot.value(2.0)).abs() < 1e-14);
        let c = hessian_coeffs(&y, &pot, &p).unwrap();
        for k in 0..12 {
            assert!((c.a[k] - 70.72558).abs() < 1e-5);
            assert!((c.a_tilde[k] - c.a[k]).abs() < 1e-12);
            assert!((c.b[k] - 0.31860).abs() < 1e-5);
        }
    }

    #[test]
    fn coefficient_forms_reconstruct_hessians() {
        let pot = Potential::lennard_jones();
        for (seed, atoms) in [
            (1u64, vec![5, 6, 7, 8]),
            (2, vec![1, 2, 11, 12]),
            (3, vec![2, 3, 7, 8, 9]),
        ] {
            let p = RegionPartition::from_indices(12, atoms).unwrap();
            let y = random_state(12, seed);
            let c = hessian_coeffs(&y, &pot, &p).unwrap();
            let ha = hessian_atomistic(&y, &pot).unwrap();
            let hq = hessian_qnl(&y, &pot, &p).unwrap();
            let scale = ha.max_abs_entry();
            assert!((ha.dense() - c.atomistic_hessian().dense()).abs().max() <= 1e-12 * scale);
            assert!((hq.dense() - c.qnl_hessian(&p).dense()).abs().max() <= 1e-12 * scale);
        }
    }

    #[test]
    fn a_tilde_matches_indicator_oracle() {
        let pot = Potential::morse(4.0).unwrap();
        let p = RegionPartition::from_indices(10, [3, 4, 5, 8, 9]).unwrap();
        let y = random_state(10, 7);
        let s = y.strains();
        let c = hessian_coeffs(&y, &pot, &p).unwrap();
        for k in 0..10 {
            let km = (k + 9) % 10;
            let kp = (k + 1) % 10;
            let in_a = |j: usize| p.atomistic().mask()[j];
            let mut want = pot.d2(s[k]);
            if in_a(k) {
                want += 2.0 * pot.d2(s[k] + s[kp]);
            } else {
                want += 2.0 * pot.d2(2.0 * s[k]);
            }
            if in_a(km) {
                want += 2.0 * pot.d2(s[km] + s[k]);
            } else {
                want += 2.0 * pot.d2(2.0 * s[k]);
            }
            assert!((c.a_tilde[k] - want).abs() < 1e-12);
            if p.atomistic_bonds().contains(k as i64 + 1) {
                assert_eq!(c.a_tilde[k], c.a[k]);
            }
        }
    }

    #[test]
    fn gradient_matches_central_difference() {
        let pot = Potential::lennard_jones();
        let p = RegionPartition::from_indices(12, [4, 5, 6, 7, 8]).unwrap();
        let y = random_state(12, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w: Vec<f64> = (0..12).map(|_| rng.random_range(-0.01..0.01)).collect();
        let m = w.iter().sum::<f64>() / 12.0;
        w.iter_mut().for_each(|x| *x -= m);
        let h = 1e-5;
        let fd = (energy_qnl(&y.perturbed(&w, h), &pot, &p).unwrap()
            - energy_qnl(&y.perturbed(&w, -h), &pot, &p).unwrap())
            / (2.0 * h);
        let wp = y.with_displacement(w).displacement_strains();
        let g = grad_qnl(&y, &pot, &p).unwrap().apply(&wp, y.eps());
        assert!((fd - g).abs() <= 1e-7 * g.abs());
    }
}
