//! Scenario configuration: parsing, validation and resolution into concrete
//! potentials, partitions and loads.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calculus::{NormIndex, PeriodicField};
use crate::chain::PotentialSpec;
use crate::error::{Error, Result};
use crate::qc::RegionPartition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Default seed for scenarios that do not set their own.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(rename = "scenario", default)]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    One(usize),
    Sweep(Vec<usize>),
}

impl SizeSpec {
    pub fn values(&self) -> Vec<usize> {
        match self {
            SizeSpec::One(n) => vec![*n],
            SizeSpec::Sweep(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartitionSpec {
    Full,
    Empty,
    /// Atoms `start..=end` (1-based, wrapping when `start > end`).
    Interval {
        start: usize,
        end: usize,
    },
    /// Atoms with `lo < xi / N <= hi`; scales with `N` in sweeps.
    Fraction {
        lo: f64,
        hi: f64,
    },
}

impl PartitionSpec {
    pub fn resolve(&self, n: usize) -> Result<RegionPartition> {
        match *self {
            PartitionSpec::Full => Ok(RegionPartition::full(n)),
            PartitionSpec::Empty => Ok(RegionPartition::empty(n)),
            PartitionSpec::Interval { start, end } => RegionPartition::interval(n, start, end),
            PartitionSpec::Fraction { lo, hi } => {
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                    return Err(Error::Config(format!(
                        "fraction partition needs 0 <= lo <= hi <= 1, got {lo}, {hi}"
                    )));
                }
                RegionPartition::from_indices(
                    n,
                    (1..=n).filter(|&xi| {
                        let x = xi as f64 / n as f64;
                        x > lo && x <= hi
                    }),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadSpec {
    Zero,
    /// `f_xi = amplitude * sin(2 pi wavenumber xi / N)`, projected to mean zero.
    Sine {
        amplitude: f64,
        wavenumber: u32,
    },
    /// One value per line; `#` starts a comment. Relative paths are resolved
    /// against the config file's directory.
    File {
        path: PathBuf,
    },
}

/// A mean-zero load and the constant removed to obtain it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedLoad {
    pub field: PeriodicField,
    pub removed_mean: f64,
}

/// Subtracts the mean so the load lies in the mean-zero class.
pub fn project_load(raw: &[f64], n: usize) -> Result<ProjectedLoad> {
    if raw.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: raw.len(),
        });
    }
    let mean = raw.iter().sum::<f64>() / n as f64;
    Ok(ProjectedLoad {
        field: PeriodicField::atoms(raw.iter().map(|x| x - mean).collect()),
        removed_mean: mean,
    })
}

impl LoadSpec {
    pub fn raw_values(&self, n: usize, base_dir: &Path) -> Result<Vec<f64>> {
        match self {
            LoadSpec::Zero => Ok(vec![0.0; n]),
            LoadSpec::Sine {
                amplitude,
                wavenumber,
            } => {
                let eps = 1.0 / n as f64;
                Ok((1..=n)
                    .map(|xi| {
                        amplitude
                            * (2.0 * std::f64::consts::PI * (*wavenumber as f64) * xi as f64 * eps)
                                .sin()
                    })
                    .collect())
            }
            LoadSpec::File { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    Error::Config(format!("cannot read load file {}: {e}", full.display()))
                })?;
                text.lines()
                    .map(|l| l.split('#').next().unwrap_or("").trim())
                    .filter(|l| !l.is_empty())
                    .map(|l| {
                        l.parse::<f64>().map_err(|e| {
                            Error::Config(format!("load file {}: '{l}': {e}", full.display()))
                        })
                    })
                    .collect()
            }
        }
    }

    pub fn resolve(&self, n: usize, base_dir: &Path) -> Result<ProjectedLoad> {
        project_load(&self.raw_values(n, base_dir)?, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SolveAtomistic,
    SolveQnl,
    Consistency,
    Stability,
    AprioriCert,
    ApostCert,
    Spectrum,
    Crack,
    VerifyRandom,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SolveAtomistic => "solve-atomistic",
            Task::SolveQnl => "solve-qnl",
            Task::Consistency => "consistency",
            Task::Stability => "stability",
            Task::AprioriCert => "apriori-cert",
            Task::ApostCert => "apost-cert",
            Task::Spectrum => "spectrum",
            Task::Crack => "crack",
            Task::VerifyRandom => "verify-random",
        }
    }
}

fn default_norms() -> Vec<NormIndex> {
    vec![NormIndex::ONE, NormIndex::TWO, NormIndex::INF]
}

fn default_delta() -> f64 {
    0.5
}

fn default_draws() -> usize {
    50
}

fn default_smoothing() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub potential: PotentialSpec,
    #[serde(rename = "N")]
    pub n: SizeSpec,
    #[serde(rename = "F")]
    pub f: f64,
    pub partition: PartitionSpec,
    #[serde(default = "default_load")]
    pub load: LoadSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Random states per size for `verify-random`.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing_passes: usize,
    /// Crack bond for `crack`; defaults to `N/2`.
    #[serde(default)]
    pub crack_bond: Option<usize>,
    /// Norm indices for `consistency`.
    #[serde(default = "default_norms")]
    pub norms: Vec<NormIndex>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_load() -> LoadSpec {
    LoadSpec::Zero
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("no [[scenario]] tables".into()));
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate scenario name '{}'", w[0])));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        let ctx = |m: String| Error::Config(format!("scenario '{}': {m}", self.name));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(ctx("name must be non-empty and use [A-Za-z0-9_-]".into()));
        }
        let ns = self.n.values();
        if ns.is_empty() {
            return Err(ctx("N list is empty".into()));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ctx("N sweep must be strictly increasing".into()));
        }
        if ns[0] < 4 {
            return Err(ctx(format!("N = {} is below 4", ns[0])));
        }
        if !(self.f > 0.0 && self.f.is_finite()) {
            return Err(ctx(format!("F = {} must be positive", self.f)));
        }
        if self.tasks.is_empty() {
            return Err(ctx("no tasks".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ctx(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        self.potential.build().map_err(|e| ctx(e.to_string()))?;
        for &n in &ns {
            self.partition
                .resolve(n)
                .map_err(|e| ctx(format!("N = {n}: {e}")))?;
        }
        Ok(())
    }

    /// Tasks in dependency order: solves, then estimates, then certificates.
    pub fn ordered_tasks(&self) -> Vec<Task> {
        let mut t = self.tasks.clone();
        t.sort();
        t.dedup();
        t
    }
}
