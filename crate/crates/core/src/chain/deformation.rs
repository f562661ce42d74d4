use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::calculus::{check_mean_zero, diff1, IndexSet, PeriodicField};
use crate::error::{Error, Result};

/// Period `N` and macroscopic gradient `F`; the spacing `eps = 1/N` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    n: usize,
    f: f64,
}

impl ChainConfig {
    pub fn new(n: usize, f: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::TooFewAtoms(n));
        }
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidGradient(f));
        }
        Ok(Self { n, f })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gradient(&self) -> f64 {
        self.f
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.n as f64
    }
}

/// `y = F x + u` with `u` periodic and mean-zero. The strains `y'_xi = F + u'_xi`
/// are cached alongside `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    config: ChainConfig,
    u: Vec<f64>,
    strains: Vec<f64>,
}

impl Deformation {
    pub fn new(config: ChainConfig, u: Vec<f64>) -> Result<Self> {
        if u.len() != config.n() {
            return Err(Error::LengthMismatch {
                expected: config.n(),
                got: u.len(),
            });
        }
        check_mean_zero(&u)?;
        Ok(Self::from_parts(config, u))
    }

    fn from_parts(config: ChainConfig, u: Vec<f64>) -> Self {
        let eps = config.eps();
        let f = config.gradient();
        let n = u.len();
        let strains = (0..n)
            .map(|k| f + (u[k] - u[(k + n - 1) % n]) / eps)
            .collect();
        Self { config, u, strains }
    }

    pub fn uniform(config: ChainConfig) -> Self {
        let n = config.n();
        Self {
            config,
            u: vec![0.0; n],
            strains: vec![config.gradient(); n],
        }
    }

    /// Builds the deformation with the given bond strains. `F` is their mean and
    /// the strains are kept verbatim; `u` is recovered by summation and
    /// projected to mean zero.
    pub fn from_strains(strains: Vec<f64>) -> Result<Self> {
        let n = strains.len();
        let f = strains.iter().sum::<f64>() / n as f64;
        let config = ChainConfig::new(n, f)?;
        let u = displacement_from_strain_increments(
            &strains.iter().map(|s| s - f).collect::<Vec<_>>(),
            config.eps(),
        );
        Ok(Self { config, u, strains })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn eps(&self) -> f64 {
        self.config.eps()
    }

    pub fn gradient(&self) -> f64 {
        self.config.gradient()
    }

    pub fn displacement(&self) -> &[f64] {
        &self.u
    }

    /// `y'_xi`, bond-sited.
    pub fn strains(&self) -> &[f64] {
        &self.strains
    }

    /// `u'_xi = y'_xi - F`.
    pub fn displacement_strains(&self) -> Vec<f64> {
        self.strains
            .iter()
            .map(|s| s - self.config.gradient())
            .collect()
    }

    pub fn strain_field(&self) -> PeriodicField {
        PeriodicField::bonds(self.strains.clone())
    }

    /// `y''_xi = (y'_{xi+1} - y'_xi) / eps`, atom-sited.
    pub fn second_difference(&self) -> PeriodicField {
        diff1(&self.strain_field(), self.eps())
    }

    /// `y'''_xi = (y''_xi - y''_{xi-1}) / eps`, bond-sited.
    pub fn third_difference(&self) -> PeriodicField {
        diff1(&self.second_difference(), self.eps())
    }

    pub fn min_strain(&self) -> f64 {
        self.strains.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest strain over the bonds of `set`; `+inf` for the empty set.
    pub fn min_strain_on(&self, set: &IndexSet) -> f64 {
        set.members()
            .iter()
            .map(|&xi| self.strains[xi - 1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_admissible(&self) -> Result<()> {
        match self
            .strains
            .iter()
            .enumerate()
            .find(|(_, s)| s.is_nan() || **s <= 0.0)
        {
            Some((k, &s)) => Err(Error::Inadmissible {
                bond: k + 1,
                strain: s,
            }),
            None => Ok(()),
        }
    }

    /// `y + h w` for a displacement `w` in U.
    pub fn perturbed(&self, w: &[f64], h: f64) -> Self {
        let u = self.u.iter().zip(w).map(|(a, b)| a + h * b).collect();
        Self::from_parts(self.config, u)
    }

    /// Same `F`, new displacement (assumed mean-zero).
    pub fn with_displacement(&self, u: Vec<f64>) -> Self {
        Self::from_parts(self.config, u)
    }

    /// Difference of strain fields `(self - other)'`.
    pub fn strain_difference(&self, other: &Self) -> Vec<f64> {
        self.strains
            .iter()
            .zip(&other.strains)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Writes `# F = ...` followed by the `xi,u,strain` table. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# F = {}", self.gradient())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["xi", "u", "strain"])?;
        for k in 0..self.n() {
            w.write_record([
                (k + 1).to_string(),
                self.u[k].to_string(),
                self.strains[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let f: f64 = first
            .trim()
            .strip_prefix("# F =")
            .ok_or_else(|| Error::Io("missing '# F = <value>' header line".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("bad F value: {e}")))?;
        let mut r = csv::Reader::from_reader(input);
        let mut u = Vec::new();
        let mut strains = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Io(format!("row {}: missing column {i}", row + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {}: {e}", row + 1)))
            };
            u.push(parse(1)?);
            strains.push(parse(2)?);
        }
        let config = ChainConfig::new(u.len(), f)?;
        Ok(Self { config, u, strains })
    }
}

/// Mean-zero `u` with `(u_xi - u_{xi-1}) / eps = d_xi`, given `sum d = 0`.
pub fn displacement_from_strain_increments(d: &[f64], eps: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut u: Vec<f64> = d
        .iter()
        .map(|&dx| {
            acc += eps * dx;
            acc
        })
        .collect();
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|x| *x -= mean);
    u
}

/// Constraint-side facts about a state: minimum strain, the second-neighbour
/// concavity bound `y' >= r_*/2`, and the argument `2 min_{C'} y'` of the
/// constants `C_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub min_strain: f64,
    pub concave_ok: bool,
    pub r_lb: f64,
}

impl AdmissibilityReport {
    pub fn new(y: &Deformation, r_star: f64, continuum_bonds: &IndexSet) -> Self {
        let min_strain = y.min_strain();
        Self {
            min_strain,
            concave_ok: min_strain >= 0.5 * r_star,
            r_lb: 2.0 * y.min_strain_on(continuum_bonds),
        }
    }
}
