//! Subcommand implementations. Each returns the process exit code.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use choquard::functionals::Model;
use choquard::io::write_field_binary;
use choquard::regimes::{mu_star_equivalence, mu_star_l2critical, nonexistence_contradiction, Contradiction, CriticalExponents};
use choquard::solver::{solve_with_model, write_history_csv, Solution};
use choquard::verify::{estimate_gn_constant, GnSearch};
use choquard::{MultiplierCache, MultiplierKind, RegimeLabel, SolveReport, VERSION};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{self, Check, Faults};
use crate::config::{Exponent, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REGIME: i32 = 2;

/// Every JSON artifact: version, seed and config echo around a body.
#[derive(Serialize)]
struct Envelope<'a, B: Serialize> {
    version: &'static str,
    seed: u64,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: B,
}

fn write_json<B: Serialize>(path: &Path, cfg: &RunConfig, body: B) -> Result<()> {
    let env = Envelope { version: VERSION, seed: cfg.seed, config: cfg, body };
    let text = serde_json::to_string_pretty(&env)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Leading `#` lines carrying version and config.
fn csv_preamble<W: Write>(out: &mut W, cfg: &RunConfig) -> Result<()> {
    writeln!(out, "# {VERSION}")?;
    writeln!(out, "# seed: {}", cfg.seed)?;
    writeln!(out, "# config: {}", cfg.to_json())?;
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(cfg.out.clone())
}

fn build_model(cfg: &RunConfig) -> Result<Model<f64>> {
    let params = cfg.params.build()?;
    let grid = cfg.grid.build(params.n)?;
    Ok(Model::with_policy(params, grid, cfg.zero_mode)?.with_dealiasing(cfg.dealias))
}

#[derive(Serialize)]
struct SolveBody<'a> {
    status: &'static str,
    regime_exact: bool,
    report: &'a SolveReport<f64>,
    contradiction: Option<Contradiction<f64>>,
}

fn status_of(report: &SolveReport<f64>, label: RegimeLabel) -> (&'static str, i32) {
    if report.diverged() {
        ("regime-flagged: divergence", EXIT_REGIME)
    } else if label.is_nonexistence() {
        ("regime-flagged: no solution exists at this exponent", EXIT_REGIME)
    } else if report.converged {
        ("converged", EXIT_OK)
    } else {
        ("not converged", EXIT_ERROR)
    }
}

pub fn solve_one(cfg: &RunConfig) -> Result<(Solution<f64>, RegimeLabel, bool)> {
    let (label, exact) = cfg.params.classify()?;
    let model = build_model(cfg)?;
    let mut sol = solve_with_model(&model, cfg.solver)?;
    sol.report.regime = label;
    Ok((sol, label, exact))
}

pub fn run_solve(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let (sol, label, exact) = solve_one(cfg)?;
    let contradiction = if label.is_nonexistence() {
        Some(nonexistence_contradiction(&sol.report.breakdown, &sol.report.params)?)
    } else {
        None
    };
    let (status, code) = status_of(&sol.report, label);
    write_json(
        &dir.join("report.json"),
        cfg,
        SolveBody { status, regime_exact: exact, report: &sol.report, contradiction },
    )?;
    let mut csv = BufWriter::new(File::create(dir.join("convergence.csv"))?);
    csv_preamble(&mut csv, cfg)?;
    write_history_csv(&sol.history, &mut csv)?;
    csv.flush()?;
    write_field_binary(&sol.field, BufWriter::new(File::create(dir.join("field.bin"))?))?;
    write_json(&dir.join("field.json"), cfg, serde_json::json!({ "field": "field.bin", "grid": sol.report.grid }))?;
    let r = &sol.report;
    println!(
        "{status}: regime {label}, iterations {}, I = {:.6e}, Lambda = {:.6e}, delta = {:.6e}, equation {:.2e}, Pohozaev {:.2e}",
        r.iterations, r.breakdown.free_energy, r.multiplier, r.delta, r.equation_rel, r.pohozaev_rel
    );
    Ok(code)
}

#[derive(Serialize)]
struct Thresholds {
    c_np_l2critical: f64,
    mu_star_l2critical: f64,
    c_np: f64,
    mu_star_equivalence: Option<f64>,
    c_np_source: &'static str,
}

#[derive(Serialize)]
struct ClassifyBody {
    exponents: CriticalExponents<f64>,
    exponents_exact: Option<CriticalExponents<String>>,
    label: RegimeLabel,
    description: &'static str,
    exact: bool,
    thresholds: Thresholds,
}

fn gn_estimate(cfg: &RunConfig, p: f64) -> Result<f64> {
    let params = cfg.params.build()?.with_p(p);
    let model = Model::with_policy(params, cfg.grid.build(params.n)?, cfg.zero_mode)?;
    let search = GnSearch { allow_outside_range: true, ..GnSearch::default() };
    Ok(estimate_gn_constant(&model, &search, &[])?.value)
}

pub fn run_classify(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let params = cfg.params.build()?;
    let (label, exact) = cfg.params.classify()?;
    let exps = CriticalExponents::new(params.n, params.alpha, params.s)?;
    let exponents_exact = match (cfg.params.alpha.as_rational(), cfg.params.s.as_rational()) {
        (Some(a), Some(s)) => {
            let e = CriticalExponents::new(params.n, a, s)?;
            Some(CriticalExponents {
                lower: e.lower.to_string(),
                s_upper: e.s_upper.to_string(),
                l2_critical: e.l2_critical.to_string(),
                hls_upper: e.hls_upper.map(|h| h.to_string()),
            })
        }
        _ => None,
    };
    let (c_l2, c_p, source) = match cfg.c_np {
        Some(c) => (c, c, "config"),
        None => (gn_estimate(cfg, exps.l2_critical)?, gn_estimate(cfg, params.p)?, "gaussian-family estimate"),
    };
    let thresholds = Thresholds {
        c_np_l2critical: c_l2,
        mu_star_l2critical: mu_star_l2critical(params.n, params.alpha, params.tau, c_l2)?,
        c_np: c_p,
        mu_star_equivalence: mu_star_equivalence(params.n, params.alpha, params.p, params.tau, c_p).ok(),
        c_np_source: source,
    };
    let body = ClassifyBody {
        exponents: exps,
        exponents_exact,
        label,
        description: label.description(),
        exact,
        thresholds,
    };
    println!("{}", serde_json::to_string_pretty(&body)?);
    write_json(&dir.join("classify.json"), cfg, body)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    suite: crate::config::Suite,
    passed: bool,
    checks: &'a [Check],
}

pub fn run_verify(cfg: &RunConfig) -> Result<i32> {
    let dir = out_dir(cfg)?;
    let faults = Faults { corrupt_multiplier: cfg.verify.corrupt_multiplier };
    let checks = checks::run_suite(cfg.verify.suite, cfg.seed, faults)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let passed = checks.iter().all(|c| c.passed);
    write_json(&dir.join("verify.json"), cfg, VerifyBody { suite: cfg.verify.suite, passed, checks: &checks })?;
    Ok(if passed { EXIT_OK } else { EXIT_ERROR })
}

pub fn run_oracle(cfg: &RunConfig) -> Result<i32> {
    let dir = out_dir(cfg)?;
    let n = cfg.params.n;
    let faults = Faults { corrupt_multiplier: cfg.verify.corrupt_multiplier };
    let checks = checks::operator_oracles(n, cfg.seed, faults)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let grid = cfg.grid.build(n)?;
    let alpha = cfg.params.alpha.value()?;
    let cache = MultiplierCache::build_with_policy(grid, MultiplierKind::Riesz { alpha }, cfg.zero_mode)?;
    cache.write_csv(BufWriter::new(File::create(dir.join("riesz_multiplier.csv"))?))?;
    let passed = checks.iter().all(|c| c.passed);
    write_json(&dir.join("oracle.json"), cfg, VerifyBody { suite: cfg.verify.suite, passed, checks: &checks })?;
    Ok(if passed { EXIT_OK } else { EXIT_ERROR })
}

/// One sweep row; column names follow the published CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub alpha: String,
    pub s: String,
    pub p: String,
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub converged: Option<bool>,
    pub iters: Option<usize>,
    #[serde(rename = "H")]
    pub mass: Option<f64>,
    pub grad: Option<f64>,
    pub semi: Option<f64>,
    #[serde(rename = "A")]
    pub choquard: Option<f64>,
    #[serde(rename = "S")]
    pub action: Option<f64>,
    #[serde(rename = "I")]
    pub free_energy: Option<f64>,
    #[serde(rename = "Lambda")]
    pub multiplier: Option<f64>,
    pub delta: Option<f64>,
    pub nehari_rel: Option<f64>,
    pub pohozaev_rel: Option<f64>,
    pub energy_gap_rel: Option<f64>,
    pub regime: String,
}

impl SweepRow {
    fn base(cfg: &RunConfig) -> Self {
        let pc = &cfg.params;
        Self {
            n: pc.n,
            alpha: pc.alpha.to_string(),
            s: pc.s.to_string(),
            p: pc.p.to_string(),
            lambda: pc.lambda,
            mu: pc.mu,
            tau: pc.tau,
            points: cfg.grid.points,
            length: cfg.grid.length,
            converged: None,
            iters: None,
            mass: None,
            grad: None,
            semi: None,
            choquard: None,
            action: None,
            free_energy: None,
            multiplier: None,
            delta: None,
            nehari_rel: None,
            pohozaev_rel: None,
            energy_gap_rel: None,
            regime: String::new(),
        }
    }

    pub fn from_report(cfg: &RunConfig, r: &SolveReport<f64>) -> Self {
        let b = &r.breakdown;
        let regime = match &r.divergence {
            Some(_) => format!("{} (divergence flagged)", r.regime),
            None => r.regime.to_string(),
        };
        Self {
            converged: Some(r.converged),
            iters: Some(r.iterations),
            mass: Some(b.mass),
            grad: Some(b.grad),
            semi: Some(b.semi),
            choquard: Some(b.choquard),
            action: Some(b.action),
            free_energy: Some(b.free_energy),
            multiplier: Some(r.multiplier),
            delta: Some(r.delta),
            nehari_rel: Some(r.nehari_rel),
            pohozaev_rel: Some(r.pohozaev_rel),
            energy_gap_rel: Some(r.energy_gap_rel),
            regime,
            ..Self::base(cfg)
        }
    }
}

/// Cartesian product of the sweep axes, in row-major order (p slowest).
pub fn expand_axes(cfg: &RunConfig) -> Vec<RunConfig> {
    let ax = &cfg.sweep;
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let ps: Vec<Exponent> = if ax.p.is_empty() { vec![cfg.params.p.clone()] } else { ax.p.clone() };
    let mut rows = Vec::new();
    for p in &ps {
        for &lambda in &or(&ax.lambda, cfg.params.lambda) {
            for &mu in &or(&ax.mu, cfg.params.mu) {
                for &tau in &or(&ax.tau, cfg.params.tau) {
                    let mut c = cfg.clone();
                    c.params.p = p.clone();
                    c.params.lambda = lambda;
                    c.params.mu = mu;
                    c.params.tau = tau;
                    c.sweep = Default::default();
                    rows.push(c);
                }
            }
        }
    }
    rows
}

pub fn sweep_row(cfg: &RunConfig) -> SweepRow {
    let outcome = cfg.validate().and_then(|_| solve_one(cfg));
    match outcome {
        Ok((sol, _, _)) => SweepRow::from_report(cfg, &sol.report),
        Err(e) => {
            warn!("sweep row failed: {e:#}");
            SweepRow { regime: format!("error: {e:#}"), ..SweepRow::base(cfg) }
        }
    }
}

pub fn run_sweep(cfg: &RunConfig) -> Result<i32> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let rows_dir = dir.join("rows");
    fs::create_dir_all(&rows_dir)?;
    let configs = expand_axes(cfg);
    info!("sweeping {} parameter tuples on {} workers", configs.len(), cfg.workers);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let paths: Vec<PathBuf> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| -> Result<PathBuf> {
                let row = sweep_row(c);
                let path = rows_dir.join(format!("row_{i:04}.json"));
                fs::write(&path, serde_json::to_string_pretty(&row)?)?;
                Ok(path)
            })
            .collect::<Result<_>>()
    })?;

    let mut out = BufWriter::new(File::create(dir.join("sweep.csv"))?);
    csv_preamble(&mut out, cfg)?;
    let mut writer = csv::Writer::from_writer(out);
    for path in &paths {
        let row: SweepRow = serde_json::from_str(&fs::read_to_string(path)?)?;
        println!(
            "p={} lambda={} mu={} tau={} -> {} delta={}",
            row.p,
            row.lambda,
            row.mu,
            row.tau,
            row.regime,
            row.delta.map_or("-".into(), |d| format!("{d:.6e}"))
        );
        writer.serialize(&row)?;
    }
    writer.flush()?;
    Ok(EXIT_OK)
}
