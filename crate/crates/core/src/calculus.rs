//! Periodic finite differences, weighted `l^p_eps` norms on index subsets and
//! dual (negative Sobolev) norms of functionals in bond representation.
//!
//! Indices are 1-based and N-periodic: atom `xi` carries `v_xi` and `v''_xi`,
//! bond `xi` is the cell `(xi - 1, xi)` and carries `v'_xi` and `v'''_xi`.
//! Storage is 0-based, so `values[k]` holds index `k + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the values of a periodic field live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Atom,
    Bond,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    values: Vec<f64>,
    site: Site,
}

impl PeriodicField {
    pub fn new(values: Vec<f64>, site: Site) -> Self {
        Self { values, site }
    }

    pub fn atoms(values: Vec<f64>) -> Self {
        Self::new(values, Site::Atom)
    }

    pub fn bonds(values: Vec<f64>) -> Self {
        Self::new(values, Site::Bond)
    }

    pub fn zeros(n: usize, site: Site) -> Self {
        Self::new(vec![0.0; n], site)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn site(&self) -> Site {
        self.site
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at the 1-based periodic index `xi` (any integer).
    pub fn at(&self, xi: i64) -> f64 {
        self.values[wrap(xi, self.values.len())]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }
}

/// 0-based storage slot of the 1-based periodic index `xi`.
#[inline]
pub fn wrap(xi: i64, n: usize) -> usize {
    (xi - 1).rem_euclid(n as i64) as usize
}

/// A subset of `{1..N}` kept both as a sorted list and as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    n: usize,
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl IndexSet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            members: Vec::new(),
            mask: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self::from_mask(vec![true; n])
    }

    /// Builds the set from 1-based indices in `1..=n`; duplicates are merged.
    pub fn from_indices<I: IntoIterator<Item = usize>>(n: usize, indices: I) -> Result<Self> {
        let mut mask = vec![false; n];
        for index in indices {
            if index == 0 || index > n {
                return Err(Error::IndexOutOfRange { index, n });
            }
            mask[index - 1] = true;
        }
        Ok(Self::from_mask(mask))
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        let members = mask
            .iter()
            .enumerate()
            .filter_map(|(k, &m)| m.then_some(k + 1))
            .collect();
        Self {
            n: mask.len(),
            members,
            mask,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Periodic membership test for any integer index.
    pub fn contains(&self, xi: i64) -> bool {
        self.mask[wrap(xi, self.n)]
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn complement(&self) -> Self {
        Self::from_mask(self.mask.iter().map(|m| !m).collect())
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_mask(
            self.mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a || *b)
                .collect(),
        )
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self::from_mask(
            self.mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && !*b)
                .collect(),
        )
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self::from_mask(
            self.mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
        )
    }

    /// The set `{xi + k : xi in self}` taken modulo N.
    pub fn shifted(&self, k: i64) -> Self {
        let mut mask = vec![false; self.n];
        for &m in &self.members {
            mask[wrap(m as i64 + k, self.n)] = true;
        }
        Self::from_mask(mask)
    }
}

/// First difference. Atom-sited input gives the bond-sited backward difference
/// `v'_xi = (v_xi - v_{xi-1}) / eps`; bond-sited input gives the atom-sited
/// forward difference `(w_{xi+1} - w_xi) / eps`, so that `diff1(diff1(v)) = v''`.
pub fn diff1(v: &PeriodicField, eps: f64) -> PeriodicField {
    let n = v.len();
    let x = v.values();
    match v.site() {
        Site::Atom => {
            PeriodicField::bonds((0..n).map(|k| (x[k] - x[(k + n - 1) % n]) / eps).collect())
        }
        Site::Bond => PeriodicField::atoms((0..n).map(|k| (x[(k + 1) % n] - x[k]) / eps).collect()),
    }
}

/// Second difference `v''_xi = (v_{xi+1} - 2 v_xi + v_{xi-1}) / eps^2` of an
/// atom-sited field.
pub fn diff2(v: &PeriodicField, eps: f64) -> PeriodicField {
    let n = v.len();
    let x = v.values();
    let e2 = eps * eps;
    PeriodicField::atoms(
        (0..n)
            .map(|k| (x[(k + 1) % n] - 2.0 * x[k] + x[(k + n - 1) % n]) / e2)
            .collect(),
    )
}

/// Third difference `v'''_xi = (v_{xi+1} - 3 v_xi + 3 v_{xi-1} - v_{xi-2}) / eps^3`
/// of an atom-sited field; the result is bond-sited.
pub fn diff3(v: &PeriodicField, eps: f64) -> PeriodicField {
    let n = v.len();
    let x = v.values();
    let e3 = eps * eps * eps;
    PeriodicField::bonds(
        (0..n)
            .map(|k| {
                (x[(k + 1) % n] - 3.0 * x[k] + 3.0 * x[(k + n - 1) % n] - x[(k + 2 * n - 2) % n])
                    / e3
            })
            .collect(),
    )
}

/// Norm index `p` in `[1, inf]`. Serializes as a number, or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormRepr", into = "NormRepr")]
pub struct NormIndex(f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Number(f64),
    Text(String),
}

impl From<NormIndex> for NormRepr {
    fn from(p: NormIndex) -> Self {
        if p.is_inf() {
            NormRepr::Text("inf".into())
        } else {
            NormRepr::Number(p.0)
        }
    }
}

impl TryFrom<NormRepr> for NormIndex {
    type Error = Error;

    fn try_from(r: NormRepr) -> Result<Self> {
        match r {
            NormRepr::Number(p) => NormIndex::new(p),
            NormRepr::Text(t) => t.parse(),
        }
    }
}

impl std::str::FromStr for NormIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Ok(NormIndex::INF),
            t => NormIndex::new(
                t.parse()
                    .map_err(|_| Error::Config(format!("bad norm index '{t}'")))?,
            ),
        }
    }
}

impl std::fmt::Display for NormIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl NormIndex {
    pub const ONE: NormIndex = NormIndex(1.0);
    pub const TWO: NormIndex = NormIndex(2.0);
    pub const INF: NormIndex = NormIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidNormIndex(p));
        }
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// `2p`, used for the squared second-difference term.
    pub fn doubled(self) -> Self {
        Self(2.0 * self.0)
    }
}

/// `(eps * sum_{xi in S} |v_xi|^p)^(1/p)`, or `max_{xi in S} |v_xi|` for `p = inf`.
/// The empty set has norm zero.
pub fn lp_norm(v: &PeriodicField, p: NormIndex, eps: f64, subset: &IndexSet) -> f64 {
    lp_norm_iter(subset.members().iter().map(|&xi| v.at(xi as i64)), p, eps)
}

/// Weighted norm over the whole period.
pub fn lp_norm_full(v: &PeriodicField, p: NormIndex, eps: f64) -> f64 {
    lp_norm_iter(v.values().iter().copied(), p, eps)
}

fn lp_norm_iter<I: Iterator<Item = f64>>(values: I, p: NormIndex, eps: f64) -> f64 {
    if p.is_inf() {
        return values.fold(0.0, |m, x| m.max(x.abs()));
    }
    let p = p.value();
    let s: f64 = if p == 1.0 {
        values.map(f64::abs).sum()
    } else if p == 2.0 {
        values.map(|x| x * x).sum()
    } else {
        values.map(|x| x.abs().powf(p)).sum()
    };
    if p == 1.0 {
        eps * s
    } else if p == 2.0 {
        (eps * s).sqrt()
    } else {
        (eps * s).powf(1.0 / p)
    }
}

/// A linear functional on `U` stored through its bond coefficients `t`, with
/// `T[u] = eps * sum_xi t_xi u'_xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondFunctional {
    coeffs: Vec<f64>,
}

impl BondFunctional {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_field(&self) -> PeriodicField {
        PeriodicField::bonds(self.coeffs.clone())
    }

    /// Evaluates the pairing against a strain field `u'`.
    pub fn apply(&self, u_prime: &[f64], eps: f64) -> f64 {
        eps * self
            .coeffs
            .iter()
            .zip(u_prime)
            .map(|(t, d)| t * d)
            .sum::<f64>()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

/// `||T||_{U^{-1,p}} = min_c ||t - c||_{l^p_eps}`: the constants are exactly the
/// annihilator of the mean-zero strain space, so the dual norm is the distance
/// from `t` to them.
pub fn dual_norm(t: &BondFunctional, p: NormIndex, eps: f64) -> f64 {
    let shift = optimal_shift(t.coeffs(), p);
    lp_norm_iter(t.coeffs().iter().map(|x| x - shift), p, eps)
}

/// Constant `c` minimizing `||t - c||_p`: mean for p = 2, midrange for
/// p = inf, a median for p = 1, bisection on the monotone subgradient otherwise.
pub fn optimal_shift(t: &[f64], p: NormIndex) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let (lo, hi) = t
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if p.is_inf() {
        return 0.5 * (lo + hi);
    }
    let p = p.value();
    if p == 2.0 {
        return t.iter().sum::<f64>() / t.len() as f64;
    }
    if p == 1.0 {
        let mut sorted = t.to_vec();
        sorted.sort_by(f64::total_cmp);
        return sorted[(sorted.len() - 1) / 2];
    }
    // g(c) = -sum sign(t - c) |t - c|^(p-1) is nondecreasing in c.
    let g = |c: f64| -> f64 {
        t.iter()
            .map(|&x| {
                let d = x - c;
                -d.signum() * d.abs().powf(p - 1.0)
            })
            .sum()
    };
    let (mut a, mut b) = (lo, hi);
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    while b - a > tol {
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Converts a mean-zero atom-sited load `f` into bond coefficients `F_xi =
/// -eps * sum_{eta < xi} f_eta`, so that `eps sum F_xi u'_xi = eps sum f_xi u_xi`
/// for every `u` in `U`.
pub fn load_to_bond_form(f: &PeriodicField, eps: f64) -> Result<BondFunctional> {
    check_mean_zero(f.values())?;
    let mut acc = 0.0;
    let coeffs = f
        .values()
        .iter()
        .map(|&fx| {
            let c = -eps * acc;
            acc += fx;
            c
        })
        .collect();
    Ok(BondFunctional::new(coeffs))
}

/// Inverse of [`load_to_bond_form`] up to the immaterial constant:
/// `f_xi = (t_xi - t_{xi+1}) / eps`.
pub fn bond_form_to_load(t: &BondFunctional, eps: f64) -> PeriodicField {
    let c = t.coeffs();
    let n = c.len();
    PeriodicField::atoms((0..n).map(|k| (c[k] - c[(k + 1) % n]) / eps).collect())
}

pub(crate) fn check_mean_zero(values: &[f64]) -> Result<()> {
    let sum: f64 = values.iter().sum();
    let scale: f64 = values.iter().map(|x| x.abs()).sum::<f64>();
    if sum.abs() > 1e-10 * (1.0 + scale) {
        return Err(Error::NonzeroMean { sum });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diff1_constant_is_zero() {
        let v = PeriodicField::atoms(vec![3.5; 7]);
        assert!(diff1(&v, 1.0 / 7.0).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn diff1_wraps_at_first_bond() {
        let v = PeriodicField::atoms(vec![1.0 - 2.5, 2.0 - 2.5, 3.0 - 2.5, 4.0 - 2.5]);
        let d = diff1(&v, 0.25);
        assert_eq!(d.values(), &[-12.0, 4.0, 4.0, 4.0]);
        assert_eq!(d.site(), Site::Bond);
    }

    #[test]
    fn telescoping_sum_vanishes() {
        let v = PeriodicField::atoms((0..13).map(|k| ((k * k) as f64).sin()).collect());
        let eps = 1.0 / 13.0;
        assert!(eps * diff1(&v, eps).sum() < 1e-13);
    }

    #[test]
    fn diff2_matches_brute_force_stencil_on_bump() {
        let n = 16;
        let eps = 1.0 / n as f64;
        let v: Vec<f64> = (0..n)
            .map(|k| {
                if (5..11).contains(&k) {
                    -((k as f64 - 8.0).powi(2)) + 9.0
                } else {
                    0.0
                }
            })
            .collect();
        let field = PeriodicField::atoms(v.clone());
        let d2 = diff2(&field, eps);
        for xi in 1..=n as i64 {
            let direct = (field.at(xi + 1) - 2.0 * field.at(xi) + field.at(xi - 1)) / (eps * eps);
            assert!(close(d2.at(xi), direct, 1e-9));
        }
    }

    #[test]
    fn stencils_annihilate_constants_and_compose() {
        let n = 11;
        let eps = 1.0 / n as f64;
        let v = PeriodicField::atoms(
            (0..n)
                .map(|k| (0.7 * k as f64).cos() + 0.1 * k as f64)
                .collect(),
        );
        let d2 = diff2(&v, eps);
        let d11 = diff1(&diff1(&v, eps), eps);
        let d3 = diff3(&v, eps);
        let d12 = diff1(&d2, eps);
        let d21 = diff1(&diff1(&diff1(&v, eps), eps), eps);
        for k in 0..n {
            assert!(close(
                d2.values()[k],
                d11.values()[k],
                1e-9 * (1.0 + d2.values()[k].abs())
            ));
            assert!(close(
                d3.values()[k],
                d12.values()[k],
                1e-8 * (1.0 + d3.values()[k].abs())
            ));
            assert!(close(
                d3.values()[k],
                d21.values()[k],
                1e-8 * (1.0 + d3.values()[k].abs())
            ));
        }
        let c = PeriodicField::atoms(vec![2.0; n]);
        assert!(diff2(&c, eps).values().iter().all(|&x| x == 0.0));
        assert!(diff3(&c, eps).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lp_norm_examples() {
        let one = PeriodicField::atoms(vec![1.0; 8]);
        assert!(close(
            lp_norm(&one, NormIndex::TWO, 0.125, &IndexSet::full(8)),
            1.0,
            1e-15
        ));
        let v = PeriodicField::atoms(vec![1.0, -1.0, 0.0, 0.0]);
        assert!(close(
            lp_norm(&v, NormIndex::TWO, 0.25, &IndexSet::full(4)),
            0.5f64.sqrt(),
            1e-15
        ));
        let w = PeriodicField::atoms(vec![3.0, -5.0]);
        assert_eq!(lp_norm(&w, NormIndex::INF, 0.5, &IndexSet::full(2)), 5.0);
        assert_eq!(lp_norm(&w, NormIndex::TWO, 0.5, &IndexSet::empty(2)), 0.0);
    }

    #[test]
    fn norm_index_rejects_below_one() {
        assert!(matches!(
            NormIndex::new(0.5),
            Err(Error::InvalidNormIndex(_))
        ));
        assert!(NormIndex::new(f64::NAN).is_err());
        assert!(NormIndex::new(1.0).is_ok());
    }

    #[test]
    fn dual_norm_examples() {
        let c = BondFunctional::new(vec![2.5; 6]);
        for p in [
            NormIndex::ONE,
            NormIndex::TWO,
            NormIndex::new(3.0).unwrap(),
            NormIndex::INF,
        ] {
            assert!(dual_norm(&c, p, 1.0 / 6.0) < 1e-15);
        }
        let t = BondFunctional::new(vec![1.0, -1.0, 0.0, 0.0]);
        assert!(close(
            dual_norm(&t, NormIndex::TWO, 0.25),
            0.5f64.sqrt(),
            1e-15
        ));
    }

    #[test]
    fn dual_norm_general_p_is_minimal_over_shifts() {
        let t: Vec<f64> = (0..9)
            .map(|k| ((k * 7 % 5) as f64) - 0.3 * k as f64)
            .collect();
        let tf = BondFunctional::new(t.clone());
        let eps = 1.0 / 9.0;
        for p in [1.0, 1.5, 3.0, 7.0] {
            let p = NormIndex::new(p).unwrap();
            let best = dual_norm(&tf, p, eps);
            for j in -200..=200 {
                let c = 0.02 * j as f64;
                let v = lp_norm_iter(t.iter().map(|x| x - c), p, eps);
                assert!(best <= v + 1e-10, "p={:?} c={c}", p);
            }
        }
    }

    #[test]
    fn load_bond_form_example_and_rejection() {
        let f = PeriodicField::atoms(vec![1.0, -1.0, 0.0, 0.0]);
        let b = load_to_bond_form(&f, 0.25).unwrap();
        assert_eq!(b.coeffs(), &[0.0, -0.25, 0.0, 0.0]);
        let zero = load_to_bond_form(&PeriodicField::atoms(vec![0.0; 5]), 0.2).unwrap();
        assert!(zero.coeffs().iter().all(|&x| x == 0.0));
        let bad = PeriodicField::atoms(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            load_to_bond_form(&bad, 0.25),
            Err(Error::NonzeroMean { .. })
        ));
    }

    #[test]
    fn bond_form_round_trips_through_load() {
        let t = BondFunctional::new(vec![0.3, -1.2, 2.0, 0.1, 0.0]);
        let eps = 0.2;
        let f = bond_form_to_load(&t, eps);
        assert!(f.sum().abs() < 1e-12);
        let back = load_to_bond_form(&f, eps).unwrap();
        let shift = back.coeffs()[0] - t.coeffs()[0];
        for (a, b) in back.coeffs().iter().zip(t.coeffs()) {
            assert!(close(a - shift, *b, 1e-12));
        }
    }

    #[test]
    fn index_set_operations() {
        let a = IndexSet::from_indices(6, [1, 2, 6]).unwrap();
        assert!(a.contains(7) && a.contains(0) && !a.contains(3));
        assert_eq!(a.shifted(1).members(), &[1, 2, 3]);
        assert_eq!(a.complement().members(), &[3, 4, 5]);
        assert!(IndexSet::from_indices(6, [0]).is_err());
        assert!(IndexSet::from_indices(6, [7]).is_err());
    }
}
