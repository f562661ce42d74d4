use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which pair interaction to build. Both shipped families are normalized to a
/// minimum of depth -1 at r = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    /// `phi(r) = r^-12 - 2 r^-6`.
    Lj,
    /// Lennard-Jones minus its cubic Taylor polynomial at `r_cut`, and zero on
    /// `[r_cut, inf)`. C^3 with an exact cutoff.
    LjCutoff { r_cut: f64 },
    /// `phi(r) = exp(-2 alpha (r - 1)) - 2 exp(-alpha (r - 1))`.
    Morse { alpha: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match *self {
            PotentialSpec::Lj => Ok(Potential::lennard_jones()),
            PotentialSpec::LjCutoff { r_cut } => Potential::lennard_jones_cutoff(r_cut),
            PotentialSpec::Morse { alpha } => Potential::morse(alpha),
        }
    }
}

pub const DEFAULT_CUTOFF: f64 = 2.5;

const LJ_A: [f64; 5] = [1.0, -12.0, 156.0, -2184.0, 32760.0];
const LJ_B: [f64; 5] = [-2.0, 12.0, -84.0, 672.0, -6048.0];

fn lj_derivative(j: usize, r: f64) -> f64 {
    let r6 = r.powi(-6);
    let base = r.powi(-(j as i32));
    base * r6 * (LJ_A[j] * r6 + LJ_B[j])
}

/// A pair potential with derivatives up to order four, its inflection point
/// `r_star` and the derivative bounds `C_j(s) = sup_{r >= s} |phi^(j)(r)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    spec: PotentialSpec,
    r_star: f64,
    /// Taylor data `phi^(k)(r_cut)`, k = 0..3, for the cutoff variant.
    taylor: [f64; 4],
    /// Interior critical points of `phi^(j)`, i.e. roots of `phi^(j+1)`.
    critical: [Vec<f64>; 4],
}

impl Potential {
    pub fn lennard_jones() -> Self {
        let mut pot = Self {
            spec: PotentialSpec::Lj,
            r_star: (13.0f64 / 7.0).powf(1.0 / 6.0),
            taylor: [0.0; 4],
            critical: Default::default(),
        };
        pot.critical = pot.scan_critical_points(0.2, 50.0);
        pot
    }

    pub fn morse(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "Morse alpha must be positive, got {alpha}"
            )));
        }
        let mut pot = Self {
            spec: PotentialSpec::Morse { alpha },
            r_star: 1.0 + std::f64::consts::LN_2 / alpha,
            taylor: [0.0; 4],
            critical: Default::default(),
        };
        pot.critical = pot.scan_critical_points(0.05, 1.0 + 60.0 / alpha);
        Ok(pot)
    }

    pub fn lennard_jones_cutoff(r_cut: f64) -> Result<Self> {
        // Below ~1.4 the shifted curvature no longer changes sign once.
        if !(r_cut >= 1.4 && r_cut.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "cutoff radius must be >= 1.4, got {r_cut}"
            )));
        }
        let taylor = [0, 1, 2, 3].map(|k| lj_derivative(k, r_cut));
        let mut pot = Self {
            spec: PotentialSpec::LjCutoff { r_cut },
            r_star: f64::NAN,
            taylor,
            critical: Default::default(),
        };
        // phi_c'' is positive at r = 1 and negative where phi''' vanishes.
        let r_min_d2 = (2184.0f64 / 672.0).powf(1.0 / 6.0);
        pot.r_star = bisect(|r| pot.d2(r), 1.0, r_min_d2);
        pot.critical = pot.scan_critical_points(0.2, r_cut);
        let steps = 4000;
        for i in 1..steps {
            let r = pot.r_star + (r_cut - pot.r_star) * i as f64 / steps as f64;
            if pot.d2(r) > 0.0 {
                return Err(Error::InvalidPotential(format!(
                    "cutoff at {r_cut} breaks concavity beyond r_star (phi''({r}) > 0)"
                )));
            }
        }
        Ok(pot)
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn r_cut(&self) -> Option<f64> {
        match self.spec {
            PotentialSpec::LjCutoff { r_cut } => Some(r_cut),
            _ => None,
        }
    }

    /// `phi^(j)(r)` for `j` in `0..=4`.
    pub fn derivative(&self, j: usize, r: f64) -> f64 {
        debug_assert!(j <= 4);
        match self.spec {
            PotentialSpec::Lj => lj_derivative(j, r),
            PotentialSpec::Morse { alpha } => {
                let x = r - 1.0;
                let e1 = (-alpha * x).exp();
                (-2.0 * alpha).powi(j as i32) * e1 * e1 - 2.0 * (-alpha).powi(j as i32) * e1
            }
            PotentialSpec::LjCutoff { r_cut } => {
                if r >= r_cut {
                    return 0.0;
                }
                let h = r - r_cut;
                let mut poly = 0.0;
                let mut term = 1.0;
                for k in j..4 {
                    poly += self.taylor[k] * term;
                    term *= h / (k - j + 1) as f64;
                }
                lj_derivative(j, r) - poly
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.derivative(0, r)
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.derivative(1, r)
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.derivative(2, r)
    }

    pub fn d3(&self, r: f64) -> f64 {
        self.derivative(3, r)
    }

    /// `C_j(s) = sup_{r >= s} |phi^(j)(r)|` for `j` in `0..=3`.
    ///
    /// `|phi^(j)|` decays to zero at infinity (or vanishes past the cutoff), so
    /// the supremum is attained at `s` or at an interior root of `phi^(j+1)`.
    pub fn sup_abs(&self, j: usize, s: f64) -> f64 {
        assert!(j <= 3, "C_j is provided for j <= 3");
        if s.is_infinite() {
            return 0.0;
        }
        if let Some(rc) = self.r_cut() {
            if s >= rc {
                return 0.0;
            }
        }
        self.critical[j]
            .iter()
            .filter(|&&c| c > s)
            .map(|&c| self.derivative(j, c).abs())
            .fold(self.derivative(j, s).abs(), f64::max)
    }

    pub fn critical_points(&self, j: usize) -> &[f64] {
        &self.critical[j]
    }

    fn scan_critical_points(&self, lo: f64, hi: f64) -> [Vec<f64>; 4] {
        let steps = 20_000;
        let ratio = (hi / lo).ln() / steps as f64;
        let grid: Vec<f64> = (0..=steps).map(|i| lo * (ratio * i as f64).exp()).collect();
        let mut out: [Vec<f64>; 4] = Default::default();
        for (j, roots) in out.iter_mut().enumerate() {
            let g = |r: f64| self.derivative(j + 1, r);
            for w in grid.windows(2) {
                let (a, b) = (w[0], w[1].min(hi));
                let (ga, gb) = (g(a), g(b));
                if ga == 0.0 {
                    roots.push(a);
                } else if ga * gb < 0.0 {
                    roots.push(bisect(g, a, b));
                }
            }
        }
        out
    }
}

/// Root of `g` in `[a, b]` given a sign change, to an interval width of 1e-12.
fn bisect<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    while b - a > 1e-12 * (1.0 + a.abs()) {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
