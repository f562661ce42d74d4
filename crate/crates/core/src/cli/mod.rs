//! Scenario runner behind the `qnl-chain` binary.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::calculus::{bond_form_to_load, NormIndex};
use crate::certify::{
    apost_certificate, apriori_certificate, load_hash, strain_distance, verify_apost,
    verify_apriori, Certificate, CertifyOptions, Verification,
};
use crate::chain::{ChainConfig, Deformation, Potential};
use crate::error::{Error, Result};
use crate::estimate::{
    apost_stability_report, coefficient_gap_bound, consistency_report, crack_demo,
    multiset_deviation, random_partition, truncation_functional, truncation_functional_grouped,
    uniform_coefficients, uniform_spectrum, uniform_spectrum_half_angle, RandomStateSpec,
};
use crate::qc::{grad_qnl, hessian_coeffs, RegionPartition};
use crate::solve::{
    newton_solve, residual_functional, stability_constant, Model, SolveOptions, SolveOutcome,
};

use config::{ConfigFile, ProjectedLoad, Scenario, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TASK_FAILED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qnl-chain",
    version,
    about = "Atomistic chain / QNL coupling scenario runner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every scenario of a TOML config and write JSON/CSV artifacts.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Overrides every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        verbose: bool,
    },
}

pub fn main_with(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            config,
            out_dir,
            seed,
            verbose,
        } => run(&config, &out_dir, seed, verbose),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

fn check(name: impl Into<String>, passed: bool) -> Check {
    Check {
        name: name.into(),
        passed,
    }
}

#[derive(Debug, Clone, Serialize)]
struct Failure {
    scenario: String,
    #[serde(rename = "N")]
    n: usize,
    task: String,
    error: String,
}

#[derive(Debug, Default, Clone)]
struct SweepRow {
    n: usize,
    error: Option<f64>,
    eta: Option<f64>,
    bound: Option<f64>,
    c_qc: Option<f64>,
    c_atom: Option<f64>,
    contraction: Option<f64>,
    certified: Option<bool>,
}

const SWEEP_HEADER: [&str; 9] = [
    "N",
    "eps",
    "error_l2strain",
    "eta",
    "bound",
    "c_qc",
    "c_atom",
    "contraction",
    "certified",
];

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.n.to_string(),
            (1.0 / self.n as f64).to_string(),
            f(self.error),
            f(self.eta),
            f(self.bound),
            f(self.c_qc),
            f(self.c_atom),
            f(self.contraction),
            self.certified.map(|b| b.to_string()).unwrap_or_default(),
        ]
    }

    fn note_certificate(&mut self, cert: &Certificate) {
        let ok = cert.verdict.is_certified();
        self.certified = Some(self.certified.unwrap_or(true) && ok);
    }
}

/// Runs a config file; returns the process exit code.
pub fn run(config_path: &Path, out_dir: &Path, seed: Option<u64>, verbose: bool) -> i32 {
    let started = unix_seconds();
    let cfg = match ConfigFile::load(config_path) {
        Ok(c) => c,
        Err(e) => return config_failure(out_dir, &e),
    };
    let base_dir = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut prepared = Vec::new();
    for s in &cfg.scenarios {
        let scenario_seed = seed.or(s.seed).or(cfg.seed);
        if s.tasks.contains(&Task::VerifyRandom) && scenario_seed.is_none() {
            let e = Error::Config(format!("scenario '{}': verify-random needs a seed", s.name));
            return config_failure(out_dir, &e);
        }
        let mut loads = Vec::new();
        for n in s.n.values() {
            match s.load.resolve(n, &base_dir) {
                Ok(l) => loads.push((n, l)),
                Err(e) => {
                    return config_failure(
                        out_dir,
                        &Error::Config(format!("scenario '{}': {e}", s.name)),
                    )
                }
            }
        }
        prepared.push((s, scenario_seed, loads));
    }
    if let Err(e) = fs::create_dir_all(out_dir) {
        return config_failure(out_dir, &Error::from(e));
    }

    let failures: Vec<Failure> = prepared
        .par_iter()
        .flat_map(|(s, seed, loads)| run_scenario(s, *seed, loads, out_dir, verbose))
        .collect();

    let code = if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_TASK_FAILED
    };
    if !failures.is_empty() {
        let body = json!({ "kind": "task-failure", "failures": failures });
        let text = serde_json::to_string_pretty(&body).unwrap_or_default();
        eprintln!("{text}");
        let _ = fs::write(out_dir.join("errors.json"), text + "\n");
    }
    let meta = json!({
        "config": config_path.display().to_string(),
        "started_unix": started,
        "finished_unix": unix_seconds(),
        "version": env!("CARGO_PKG_VERSION"),
        "exit_code": code,
    });
    let _ = fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&meta).unwrap_or_default() + "\n",
    );
    code
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn config_failure(out_dir: &Path, e: &Error) -> i32 {
    let body = json!({ "kind": "config-error", "error": e.to_string() });
    let text = serde_json::to_string_pretty(&body).unwrap_or_default();
    eprintln!("{text}");
    if fs::create_dir_all(out_dir).is_ok() {
        let _ = fs::write(out_dir.join("errors.json"), text + "\n");
    }
    EXIT_CONFIG
}

/// Per-size state shared between the tasks of one scenario.
struct Ctx<'a> {
    scenario: &'a Scenario,
    n: usize,
    seed: Option<u64>,
    pot: Potential,
    part: RegionPartition,
    load: &'a ProjectedLoad,
    solve: SolveOptions,
    atom: Option<SolveOutcome>,
    qnl: Option<SolveOutcome>,
    dir: PathBuf,
}

impl Ctx<'_> {
    fn uniform(&self) -> Result<Deformation> {
        Ok(Deformation::uniform(ChainConfig::new(
            self.n,
            self.scenario.f,
        )?))
    }

    fn atomistic(&mut self) -> Result<&SolveOutcome> {
        if self.atom.is_none() {
            let y0 = self.uniform()?;
            self.atom = Some(newton_solve(
                Model::Atomistic,
                &self.pot,
                &y0,
                &self.load.field,
                &self.solve,
            )?);
        }
        Ok(self.atom.as_ref().expect("just solved"))
    }

    fn coupled(&mut self) -> Result<&SolveOutcome> {
        if self.qnl.is_none() {
            let y0 = self.uniform()?;
            self.qnl = Some(newton_solve(
                Model::Qnl(&self.part),
                &self.pot,
                &y0,
                &self.load.field,
                &self.solve,
            )?);
        }
        Ok(self.qnl.as_ref().expect("just solved"))
    }

    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            delta: self.scenario.delta,
            ..CertifyOptions::default()
        }
    }
}

fn run_scenario(
    s: &Scenario,
    seed: Option<u64>,
    loads: &[(usize, ProjectedLoad)],
    out_dir: &Path,
    verbose: bool,
) -> Vec<Failure> {
    let dir = out_dir.join(&s.name);
    let mut failures = Vec::new();
    let fail = |n: usize, task: &str, error: String| Failure {
        scenario: s.name.clone(),
        n,
        task: task.into(),
        error,
    };
    if let Err(e) = fs::create_dir_all(&dir) {
        return vec![fail(0, "setup", e.to_string())];
    }
    let pot = match s.potential.build() {
        Ok(p) => p,
        Err(e) => return vec![fail(0, "setup", e.to_string())],
    };
    let mut rows = Vec::new();
    for (n, load) in loads {
        let part = match s.partition.resolve(*n) {
            Ok(p) => p,
            Err(e) => {
                failures.push(fail(*n, "setup", e.to_string()));
                continue;
            }
        };
        let mut ctx = Ctx {
            scenario: s,
            n: *n,
            seed,
            pot: pot.clone(),
            part,
            load,
            solve: SolveOptions::default(),
            atom: None,
            qnl: None,
            dir: dir.clone(),
        };
        let mut row = SweepRow {
            n: *n,
            ..SweepRow::default()
        };
        for task in s.ordered_tasks() {
            if verbose {
                eprintln!("[{}] N = {n}: {}", s.name, task.name());
            }
            let outcome = run_task(task, &mut ctx, &mut row);
            let (passed, result, checks, error) = match outcome {
                Ok((result, checks)) => (checks.iter().all(|c| c.passed), result, checks, None),
                Err(e) => (false, Value::Null, Vec::new(), Some(e.to_string())),
            };
            if !passed {
                let msg = error.clone().unwrap_or_else(|| {
                    let names: Vec<&str> = checks
                        .iter()
                        .filter(|c| !c.passed)
                        .map(|c| c.name.as_str())
                        .collect();
                    format!("failed checks: {}", names.join(", "))
                });
                failures.push(fail(*n, task.name(), msg));
            }
            let report = json!({
                "task": task.name(),
                "passed": passed,
                "error": error,
                "checks": checks,
                "result": result,
                "resolved": {
                    "N": n,
                    "eps": 1.0 / *n as f64,
                    "seed": seed,
                    "partition": ctx.part,
                    "load_removed_mean": load.removed_mean,
                    "load_hash": load_hash(&load.field),
                    "r_star": ctx.pot.r_star(),
                    "solve": ctx.solve,
                },
                "config": s,
            });
            let path = dir.join(format!("{}-N{n}.json", task.name()));
            if let Err(e) = fs::write(
                &path,
                serde_json::to_string_pretty(&report).unwrap_or_default() + "\n",
            ) {
                failures.push(fail(
                    *n,
                    task.name(),
                    format!("cannot write {}: {e}", path.display()),
                ));
            }
        }
        if let (Some(a), Some(q)) = (&ctx.atom, &ctx.qnl) {
            row.error = Some(strain_distance(&a.y, &q.y));
        }
        rows.push(row);
    }
    if let Err(e) = write_sweep(&dir.join("sweep.csv"), &rows) {
        failures.push(fail(0, "sweep", e.to_string()));
    }
    failures
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

type TaskOutput = (Value, Vec<Check>);

fn run_task(task: Task, ctx: &mut Ctx<'_>, row: &mut SweepRow) -> Result<TaskOutput> {
    match task {
        Task::SolveAtomistic => task_solve(ctx, false),
        Task::SolveQnl => task_solve(ctx, true),
        Task::Consistency => task_consistency(ctx, row),
        Task::Stability => task_stability(ctx, row),
        Task::AprioriCert => task_apriori(ctx, row),
        Task::ApostCert => task_apost(ctx, row),
        Task::Spectrum => task_spectrum(ctx),
        Task::Crack => task_crack(ctx),
        Task::VerifyRandom => task_verify_random(ctx),
    }
}

fn task_solve(ctx: &mut Ctx<'_>, coupled: bool) -> Result<TaskOutput> {
    let part = ctx.part.clone();
    let pot = ctx.pot.clone();
    let f = ctx.load.field.clone();
    let tol = ctx.solve.tol_residual;
    let (out, model, label) = if coupled {
        (ctx.coupled()?.clone(), Model::Qnl(&part), "qnl")
    } else {
        (ctx.atomistic()?.clone(), Model::Atomistic, "atomistic")
    };
    // Independent cross-check of the equilibrium against random directions.
    let r = residual_functional(model, &pot, &out.y, &f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ ctx.n as u64);
    let n = ctx.n;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = d.iter().sum::<f64>() / n as f64;
        d.iter_mut().for_each(|x| *x -= m);
        let norm = (out.y.eps() * d.iter().map(|x| x * x).sum::<f64>()).sqrt();
        worst = worst.max(r.apply(&d, out.y.eps()).abs() / norm);
    }
    let csv_path = ctx.dir.join(format!("solution-{label}-N{n}.csv"));
    out.y.write_csv(fs::File::create(&csv_path)?)?;
    let result = json!({
        "model": label,
        "iterations": out.iterations,
        "residual": out.residual,
        "history": out.history,
        "min_strain": out.y.min_strain(),
        "random_direction_residual": worst,
        "solution_csv": csv_path.file_name().map(|s| s.to_string_lossy().into_owned()),
    });
    Ok((
        result,
        vec![
            check("residual <= tol", out.residual <= tol),
            check("random directions <= 1e-9", worst <= 1e-9),
        ],
    ))
}

fn task_consistency(ctx: &mut Ctx<'_>, row: &mut SweepRow) -> Result<TaskOutput> {
    let y = ctx.atomistic()?.y.clone();
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for &p in &ctx.scenario.norms {
        let r = consistency_report(&y, &ctx.pot, &ctx.part, p)?;
        checks.push(check(
            format!("measured <= bound (p = {p})"),
            r.measured <= r.bound * (1.0 + 1e-12) + 1e-300,
        ));
        if p == NormIndex::TWO && row.eta.is_none() {
            row.eta = Some(r.bound);
        }
        reports.push(r);
    }
    let direct = truncation_functional(&y, &ctx.pot, &ctx.part)?;
    let grouped = truncation_functional_grouped(&y, &ctx.pot, &ctx.part)?;
    let gap = direct
        .coeffs()
        .iter()
        .zip(grouped.coeffs())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    checks.push(check("grouped assembly matches <= 1e-13", gap <= 1e-13));
    Ok((
        json!({ "state": "atomistic equilibrium", "reports": reports, "assembly_gap": gap }),
        checks,
    ))
}

fn task_stability(ctx: &mut Ctx<'_>, row: &mut SweepRow) -> Result<TaskOutput> {
    let y = ctx.coupled()?.y.clone();
    let r = apost_stability_report(&y, &ctx.pot, &ctx.part)?;
    row.c_qc = Some(r.c_qc);
    row.c_atom = Some(r.c_atomistic);
    let mut checks = Vec::new();
    if let Some(ok) = r.apost_holds() {
        checks.push(check("c >= c_qc - gap", ok));
    }
    if let Some(ok) = r.elastic_bounds_hold() {
        checks.push(check("c >= min A and c_qc >= min A~", ok));
    }
    checks.push(check(
        "max |A - A~| <= gap",
        r.max_coefficient_gap <= r.gap * (1.0 + 1e-12) + 1e-12,
    ));
    Ok((
        json!({ "state": "coupled equilibrium", "report": r }),
        checks,
    ))
}

fn certificate_checks(cert: &Certificate, verification: &Option<Verification>) -> Vec<Check> {
    match verification {
        Some(v) => vec![
            check("counterpart solve converged", v.converged),
            check("error <= error_bound", v.within_bound),
            check("counterpart strongly stable", v.counterpart_stability > 0.0),
        ],
        None => vec![check("verdict recorded", !cert.verdict.is_certified())],
    }
}

fn task_apriori(ctx: &mut Ctx<'_>, row: &mut SweepRow) -> Result<TaskOutput> {
    let y = ctx.atomistic()?.y.clone();
    let cert = apriori_certificate(
        &y,
        &ctx.pot,
        &ctx.part,
        &ctx.load.field,
        &ctx.certify_options(),
    )?;
    let verification = if cert.verdict.is_certified() {
        Some(verify_apriori(
            &cert,
            &y,
            &ctx.pot,
            &ctx.part,
            &ctx.load.field,
            &ctx.solve,
        )?)
    } else {
        None
    };
    row.eta = Some(cert.eta);
    row.bound = Some(cert.error_bound);
    row.contraction = Some(cert.contraction);
    row.note_certificate(&cert);
    let checks = certificate_checks(&cert, &verification);
    Ok((
        json!({ "certificate": cert, "verification": verification }),
        checks,
    ))
}

fn task_apost(ctx: &mut Ctx<'_>, row: &mut SweepRow) -> Result<TaskOutput> {
    let y = ctx.coupled()?.y.clone();
    let cert = apost_certificate(
        &y,
        &ctx.pot,
        &ctx.part,
        &ctx.load.field,
        &ctx.certify_options(),
    )?;
    let verification = if cert.verdict.is_certified() {
        Some(verify_apost(
            &cert,
            &y,
            &ctx.pot,
            &ctx.load.field,
            &ctx.solve,
        )?)
    } else {
        None
    };
    if row.c_qc.is_none() {
        row.c_qc = Some(cert.stability_lower);
    }
    if row.eta.is_none() {
        row.eta = Some(cert.eta);
        row.bound = Some(cert.error_bound);
        row.contraction = Some(cert.contraction);
    }
    if let (Some(v), None) = (&verification, row.c_atom) {
        row.c_atom = Some(v.counterpart_stability);
    }
    row.note_certificate(&cert);
    let checks = certificate_checks(&cert, &verification);
    Ok((
        json!({ "certificate": cert, "verification": verification }),
        checks,
    ))
}

fn task_spectrum(ctx: &mut Ctx<'_>) -> Result<TaskOutput> {
    let y = ctx.uniform()?;
    let f = ctx.scenario.f;
    let numeric = stability_constant(Model::Atomistic, &ctx.pot, &y)?;
    let analytic = uniform_spectrum(f, &ctx.pot, ctx.n)?;
    let deviation = multiset_deviation(&numeric.spectrum, &analytic);
    let half_angle_deviation = multiset_deviation(
        &numeric.spectrum,
        &uniform_spectrum_half_angle(f, &ctx.pot, ctx.n)?,
    );
    let (a, b) = uniform_coefficients(f, &ctx.pot);
    let c_formula = a + 4.0 * b * (std::f64::consts::PI / ctx.n as f64).sin().powi(2);
    let c_err = (numeric.constant - c_formula).abs();
    let cb = stability_constant(Model::CauchyBorn, &ctx.pot, &y)?;
    let cb_dev = cb.spectrum.iter().fold(0.0f64, |m, l| m.max((l - a).abs()));
    let result = json!({
        "A": a,
        "B": b,
        "analytic": analytic,
        "numeric": numeric.spectrum,
        "max_deviation": deviation,
        "half_angle_max_deviation": half_angle_deviation,
        "c_numeric": numeric.constant,
        "c_formula": c_formula,
        "cauchy_born_max_deviation_from_A": cb_dev,
    });
    Ok((
        result,
        vec![
            check("multiset deviation < 1e-9", deviation < 1e-9),
            check("|c - (A + 4B sin^2(pi eps))| < 1e-10", c_err < 1e-10),
            check("Cauchy-Born spectrum is {A}", cb_dev < 1e-9),
        ],
    ))
}

fn task_crack(ctx: &mut Ctx<'_>) -> Result<TaskOutput> {
    let bond = ctx.scenario.crack_bond.unwrap_or(ctx.n / 2);
    let demo = crack_demo(ctx.scenario.f, &ctx.pot, ctx.n, bond, &ctx.part)?;
    let y = demo.y_hat.clone().expect("crack_demo returns the state");
    // The load that makes the crack state a coupled equilibrium.
    let f = bond_form_to_load(&grad_qnl(&y, &ctx.pot, &ctx.part)?, y.eps());
    let cert = apost_certificate(&y, &ctx.pot, &ctx.part, &f, &ctx.certify_options())?;
    let checks = vec![
        check("||u'|| = 1", (demo.test_norm - 1.0).abs() < 1e-12),
        check("quotient <= eps A_hat", demo.quotient_le_eps_a_hat),
        check("c(y) <= eps A_hat", demo.c_atomistic_le_eps_a_hat),
        check("c_qc(y) <= eps A_hat", demo.c_qc_le_eps_a_hat),
        check(
            "a posteriori certificate refused (stability)",
            cert.verdict.reason() == Some("stability"),
        ),
    ];
    let result = json!({
        "demo": demo,
        "equilibrating_load_hash": load_hash(&f),
        "apost_certificate": cert,
        "note": "the scenario load is replaced by the load that equilibrates the crack state",
    });
    Ok((result, checks))
}

fn task_verify_random(ctx: &mut Ctx<'_>) -> Result<TaskOutput> {
    let seed = ctx
        .seed
        .ok_or_else(|| Error::Config("verify-random needs a seed".into()))?;
    let n = ctx.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let spec = RandomStateSpec::elastic(&ctx.pot, ctx.scenario.smoothing_passes);
    let mut consistency = 0usize;
    let mut gap = 0usize;
    let mut elastic = 0usize;
    let mut apost = 0usize;
    let mut apost_checked = 0usize;
    for _ in 0..ctx.scenario.draws {
        let y = spec.draw(n, &mut rng)?;
        let part = random_partition(n, &mut rng)?;
        for &p in &ctx.scenario.norms {
            let r = consistency_report(&y, &ctx.pot, &part, p)?;
            if r.measured > r.bound * (1.0 + 1e-12) + 1e-300 {
                consistency += 1;
            }
        }
        let bound = coefficient_gap_bound(&y, &ctx.pot, &part)?;
        if hessian_coeffs(&y, &ctx.pot, &part)?.max_gap() > bound * (1.0 + 1e-12) + 1e-12 {
            gap += 1;
        }
        let st = apost_stability_report(&y, &ctx.pot, &part)?;
        if st.elastic_bounds_hold() == Some(false) {
            elastic += 1;
        }
        if let Some(ok) = st.apost_holds() {
            apost_checked += 1;
            if !ok {
                apost += 1;
            }
        }
    }
    let result = json!({
        "draws": ctx.scenario.draws,
        "strain_range": [spec.lo, spec.hi],
        "smoothing_passes": spec.smoothing_passes,
        "violations": {
            "consistency": consistency,
            "coefficient_gap": gap,
            "elastic_lower_bounds": elastic,
            "apost_stability": apost,
        },
        "apost_stability_checked": apost_checked,
    });
    Ok((
        result,
        vec![
            check("consistency bound", consistency == 0),
            check("coefficient gap bound", gap == 0),
            check("elastic lower bounds", elastic == 0),
            check("a posteriori stability bound", apost == 0),
        ],
    ))
}
