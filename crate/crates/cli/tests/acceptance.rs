//! Acceptance criteria, one PASS/FAIL line each. Criterion 9 is reported but
//! never fails the run.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use choquard::grid::{sample_gaussian, Spectral};
use choquard::operators::{frac_seminorm_sq, grad_norm_sq, riesz_convolve};
use choquard::regimes::{classify_exact, mu_star_equivalence, nonexistence_contradiction, parse_rational};
use choquard::solver::{dilation_energy_curve, flow_step, seed, solve_with_model, Solution};
use choquard::verify::{estimate_gn_constant, gaussian_dilation, gn_ratio_from, hls_extremal, hls_ratio, GnSearch};
use choquard::{Grid, Model, MultiplierCache, MultiplierKind, Options, Params, RegimeLabel};
use choquard_cli::checks::{gradient_checks, operator_oracles, Faults};
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    soft: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let tag = match (o.passed, o.soft) {
        (true, _) => "PASS",
        (false, false) => "FAIL",
        (false, true) => "FAIL (soft)",
    };
    println!("{tag} criterion {:>2} {}: {}", o.id, o.name, o.detail);
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn params(p: f64, lambda: f64, mu: f64) -> Params {
    Params::new(3, 2.0, 0.5, p, lambda, mu, 1.0).unwrap()
}

fn solve(p: Params, points: usize, length: f64) -> Solution<f64> {
    let model = Model::new(p, Grid::new(3, points, length).unwrap()).unwrap();
    solve_with_model(&model, Options::default()).unwrap()
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e <= limit, format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn c1_operator_oracles() -> Outcome {
    let t = Instant::now();
    let mut checks = operator_oracles(3, 1, Faults::default()).unwrap();
    checks.extend(operator_oracles(1, 1, Faults::default()).unwrap());
    let worst = checks.iter().map(|c| c.measured).fold(0.0, f64::max);
    let (fast, time) = within(t, Duration::from_secs(10));
    Outcome {
        id: 1,
        name: "operator oracle equivalence",
        passed: worst <= 1e-10 && checks.len() == 6 && fast,
        soft: false,
        detail: format!("worst rel err {worst:.2e} (tol 1e-10) over 6 kernel/grid pairs, {time}"),
    }
}

fn c2_closed_forms() -> Outcome {
    let t = Instant::now();
    let grid = Grid::new(3, 64, 16.0).unwrap();
    let u = sample_gaussian(grid, 1.0, 1.0).unwrap();
    let mass = (PI / 2.0).powf(1.5);
    let e_mass = rel(u.mass(), mass);
    let e_grad = rel(grad_norm_sq(&Spectral::new(grid), &u).unwrap(), 3.0 * mass);

    // ∫|2πξ|·π·exp(−2π²ξ²)dξ = 1 for exp(−x²)
    let line_grid = Grid::new(1, 1 << 17, (1 << 15) as f64).unwrap();
    let g1 = sample_gaussian(line_grid, 1.0, 1.0).unwrap();
    let e_semi = rel(frac_seminorm_sq(&Spectral::new(line_grid), &g1, 0.5).unwrap(), 1.0);

    let box3 = Grid::new(3, 64, 32.0).unwrap();
    let g3 = sample_gaussian(box3, 1.0, 1.0).unwrap();
    let v = riesz_convolve(&Spectral::new(box3), &g3, 2.0).unwrap();
    let h = box3.spacing();
    let mid = box3.points() / 2;
    let e_newton = [0usize, 1]
        .iter()
        .map(|&k| {
            let r = k as f64 * h;
            let exact = if k == 0 { 0.5 } else { PI.sqrt() * erf(r) / (4.0 * r) };
            rel(v.values()[box3.ravel(&[mid, mid, mid + k])], exact)
        })
        .fold(0.0, f64::max);
    let (fast, time) = within(t, Duration::from_secs(60));
    Outcome {
        id: 2,
        name: "closed-form functional values",
        passed: e_mass <= 1e-8 && e_grad <= 1e-8 && e_semi <= 1e-8 && e_newton <= 1e-3 && fast,
        soft: false,
        detail: format!(
            "mass {e_mass:.1e}, gradient {e_grad:.1e}, seminorm {e_semi:.1e} (tol 1e-8); Newtonian {e_newton:.1e} (tol 1e-3); {time}"
        ),
    }
}

fn c3_gradient() -> Outcome {
    let t = Instant::now();
    let c = gradient_checks(7, 20).unwrap();
    let (fast, time) = within(t, Duration::from_secs(60));
    Outcome {
        id: 3,
        name: "first variation vs central differences",
        passed: c.passed && fast,
        soft: false,
        detail: format!("worst rel err {:.2e} over 20 pairs (tol 1e-5), {time}", c.measured),
    }
}

fn c4_ground_state() -> Outcome {
    let t = Instant::now();
    let p = params(1.8, 0.05, 1.0);
    let coarse = solve(p, 32, 16.0);
    let fine = solve(p, 64, 24.0);
    let r = &coarse.report;
    let ok_conv = r.converged;
    let ok_nehari = r.nehari_rel <= 1e-6 && r.equation_rel <= 1e-6;
    let ok_poh = r.pohozaev_rel <= 1e-2;
    let ok_halving = fine.report.pohozaev_rel <= 0.5 * r.pohozaev_rel;
    let ok_signs = r.multiplier < 0.0 && r.breakdown.free_energy < 0.0;
    let (fast, time) = within(t, Duration::from_secs(600));
    Outcome {
        id: 4,
        name: "ground-state identities",
        passed: ok_conv && ok_nehari && ok_poh && ok_halving && ok_signs && fast,
        soft: false,
        detail: format!(
            "converged {} in {} its; Nehari {:.1e}, equation {:.1e} (tol 1e-6); Pohozaev {:.3e} (tol 1e-2), \
             at N=64,L=24 {:.3e} (needs ≤ half); Lambda {:.4e}, I {:.4e}; {time}",
            r.converged,
            r.iterations,
            r.nehari_rel,
            r.equation_rel,
            r.pohozaev_rel,
            fine.report.pohozaev_rel,
            r.multiplier,
            r.breakdown.free_energy
        ),
    }
}

fn c5_trichotomy() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for text in ["1.7", "1.8", "1.9", "7/3", "3"] {
        let exact = parse_rational(text).unwrap();
        let label = classify_exact(3, 2.into(), (1, 2).into(), exact).unwrap();
        let pf = *exact.numer() as f64 / *exact.denom() as f64;
        let p = params(pf, 0.05, 0.1);
        let model = Model::new(p, Grid::new(3, 32, 16.0).unwrap()).unwrap();
        let sol = solve_with_model(&model, Options::default()).unwrap();
        let r = &sol.report;
        let verdict = match label {
            RegimeLabel::ExistenceWindow => {
                let good = r.converged && !r.diverged();
                ok &= good;
                format!("converged={} diverged={}", r.converged, r.diverged())
            }
            RegimeLabel::UnboundedBelow => {
                let curve = dilation_energy_curve(&model, &sol.field, &[2.0, 4.0, 8.0], false).unwrap();
                let e: Vec<f64> = curve.iter().map(|c| c.free_energy).collect();
                let decreasing = e.windows(2).all(|w| w[1] < w[0]);
                ok &= r.diverged() && decreasing;
                format!("diverged={} I(u_K) at K=2,4,8: {:.3e}, {:.3e}, {:.3e} decreasing={decreasing}", r.diverged(), e[0], e[1], e[2])
            }
            _ => format!("report only: converged={} diverged={} I={:.3e}", r.converged, r.diverged(), r.breakdown.free_energy),
        };
        parts.push(format!("p={text} {label}: {verdict}"));
    }
    let (fast, time) = within(t, Duration::from_secs(1800));
    Outcome {
        id: 5,
        name: "regime trichotomy sweep",
        passed: ok && fast,
        soft: false,
        detail: format!("{}; {time}", parts.join("; ")),
    }
}

fn c6_contradictions() -> Outcome {
    let t = Instant::now();
    let grid = Grid::new(3, 32, 16.0).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [5.0 / 3.0, 5.0] {
        let prm = params(p, 0.1, 1.0);
        let model = Model::new(prm, grid).unwrap();
        let mut u = seed(grid, 1.0, 1.0).unwrap();
        let mut checked = 0;
        let mut all = true;
        for _ in 0..300 {
            let b = model.action(&u).unwrap();
            if !b.free_energy.is_finite() || u.max_abs() == 0.0 {
                break;
            }
            all &= nonexistence_contradiction(&b, &prm).unwrap().strictly_opposite;
            checked += 1;
            match flow_step(&model, &u, 0.1, 1.0) {
                Ok(next) if next.is_finite() => u = next,
                _ => break,
            }
        }
        ok &= all && checked > 0;
        parts.push(format!("p={p:.4}: {checked} iterates, all strictly opposite = {all}"));
    }
    let (fast, time) = within(t, Duration::from_secs(300));
    Outcome { id: 6, name: "nonexistence contradictions", passed: ok && fast, soft: false, detail: format!("{}; {time}", parts.join("; ")) }
}

fn c7_hls() -> Outcome {
    let t = Instant::now();
    // C(n,α) = π^{(n−α)/2} Γ(α/2)/Γ((n+α)/2) · (Γ(n/2)/Γ(n))^{−α/n}
    let sharp = PI.sqrt() * gamma(1.0) / gamma(2.5) * (gamma(1.5) / gamma(3.0)).powf(-2.0 / 3.0);
    let grid = Grid::new(3, 64, 32.0).unwrap();
    let spectral = Spectral::new(grid);
    let riesz = MultiplierCache::build(grid, MultiplierKind::Riesz { alpha: 2.0 }).unwrap();
    let ext = hls_extremal(grid, 2.0, 1.0).unwrap();
    let r_ext = hls_ratio(&spectral, &riesz, &ext, &ext).unwrap();
    let gauss = sample_gaussian(grid, 0.5, 1.0).unwrap();
    let r_gauss = hls_ratio(&spectral, &riesz, &gauss, &gauss).unwrap();
    let (fast, time) = within(t, Duration::from_secs(300));
    Outcome {
        id: 7,
        name: "sharp HLS",
        passed: rel(r_ext, sharp) <= 0.02 && r_gauss < sharp && fast,
        soft: false,
        detail: format!(
            "C(3,2) = {sharp:.6}; extremal ratio {r_ext:.6} (off {:.2}%, tol 2%); Gaussian ratio {r_gauss:.6}; {time}",
            100.0 * rel(r_ext, sharp)
        ),
    }
}

fn c8_gn() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let grid = Grid::new(3, 32, 16.0).unwrap();
    for p in [1.8, 2.0] {
        let prm = params(p, 0.05, 1.0);
        let ratios: Vec<f64> =
            [0.5, 1.0, 2.0].iter().map(|&k| gn_ratio_from(&gaussian_dilation(&prm, 1.0, 1.0, k), &prm).unwrap()).collect();
        let mean = ratios.iter().sum::<f64>() / 3.0;
        let var = ratios.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max) / mean;
        let model = Model::new(prm, grid).unwrap();
        let est = estimate_gn_constant(&model, &GnSearch::default(), &[]).unwrap();
        let mut running = f64::NEG_INFINITY;
        let mut bounded = true;
        for trial in &est.trials {
            running = running.max(trial.ratio);
            bounded &= trial.ratio <= trial.running_max && trial.running_max == running;
        }
        ok &= var <= 1e-6 && bounded;
        parts.push(format!("p={p}: rel var {var:.1e} (tol 1e-6), estimate {:.6e}, bounded by running max {bounded}", est.value));
    }
    Outcome { id: 8, name: "G-N scale invariance", passed: ok, soft: false, detail: parts.join("; ") }
}

fn c9_equivalence() -> Outcome {
    let grid = Grid::new(3, 64, 24.0).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [0.01, 0.05] {
        let probe = Model::new(params(1.8, lambda, 1.0), grid).unwrap();
        let c_np = estimate_gn_constant(&probe, &GnSearch::default(), &[]).unwrap().value;
        let mu_star = mu_star_equivalence(3, 2.0, 1.8, 1.0, c_np).unwrap();
        for frac in [0.5, 0.9] {
            let mu = frac * mu_star;
            let model = Model::new(params(1.8, lambda, mu), grid).unwrap();
            let r = solve_with_model(&model, Options::default()).unwrap().report;
            ok &= r.converged && (r.delta - 1.0).abs() <= 0.1;
            parts.push(format!(
                "lambda={lambda}, mu={mu:.4} ({frac} mu*, mu*={mu_star:.4}): converged={} delta={:.4} grad={:.2e}",
                r.converged, r.delta, r.breakdown.grad
            ));
        }
    }
    Outcome { id: 9, name: "equivalence diagnostic", passed: ok, soft: true, detail: parts.join("; ") }
}

fn run_twice(args: &[&str], root: &Path) -> bool {
    let bin = env!("CARGO_BIN_EXE_choquard");
    let dirs = [root.join("a"), root.join("b")];
    for d in &dirs {
        let status = Command::new(bin).args(args).arg("--out").arg(d).env("RUST_LOG", "off").status().unwrap();
        if status.code().is_none() {
            return false;
        }
    }
    let mut names: Vec<_> = walk(&dirs[0]);
    names.sort();
    !names.is_empty()
        && names.iter().all(|rel_path| {
            let a = std::fs::read(dirs[0].join(rel_path)).unwrap();
            std::fs::read(dirs[1].join(rel_path)).map(|b| a == b).unwrap_or(false)
        })
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path).into_iter().map(|p| Path::new(path.file_name().unwrap()).join(p)));
        } else {
            out.push(path.file_name().unwrap().into());
        }
    }
    out
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"grid": {"points": 16, "length": 12}, "solver": {"max_iters": 400},
            "sweep": {"p": [1.8, "5/3", 3]}, "workers": 3}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let solve = run_twice(&["solve", "--config", c], &tmp.path().join("solve"));
    let sweep = run_twice(&["sweep", "--config", c], &tmp.path().join("sweep"));
    let verify = run_twice(&["verify", "--oracle-1d", "--seed", "5"], &tmp.path().join("verify"));
    Outcome {
        id: 10,
        name: "determinism",
        passed: solve && sweep && verify,
        soft: false,
        detail: format!("solve identical {solve}, sweep identical {sweep}, verify identical {verify}"),
    }
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let all: [(u32, fn() -> Outcome); 10] = [
        (1, c1_operator_oracles),
        (2, c2_closed_forms),
        (3, c3_gradient),
        (4, c4_ground_state),
        (5, c5_trichotomy),
        (6, c6_contradictions),
        (7, c7_hls),
        (8, c8_gn),
        (9, c9_equivalence),
        (10, c10_determinism),
    ];
    let mut hard_failures = 0;
    for (id, run) in all {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let o = run();
        line(&o);
        if !o.passed && !o.soft {
            hard_failures += 1;
        }
    }
    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{hard_failures} criteria failed");
        ExitCode::FAILURE
    }
}
