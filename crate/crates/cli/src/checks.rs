//! The `verify` and `oracle` suites.

use anyhow::Result;
use choquard::functionals::Model;
use choquard::grid::{sample_gaussian, Field, GridSpec, Spectral};
use choquard::operators::{apply_multiplier, direct_convolve_oracle, frac_seminorm_sq, grad_norm_sq, riesz_convolve};
use choquard::verify::{self, gamma};
use choquard::{MultiplierCache, MultiplierKind, ProblemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Suite;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Relative tolerance, or the upper bound for `bound` checks.
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn relative(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        let err = (measured - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        Self { name: name.into(), measured, expected, tolerance, passed: err <= tolerance }
    }

    /// Passes when `measured ≤ limit`.
    pub fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), measured, expected: limit, tolerance: limit, passed: measured <= limit }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<32} measured {:.6e}  expected {:.6e}  tol {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.expected,
            self.tolerance
        )
    }
}

/// Fault-injection switch for the spectral path.
#[derive(Clone, Copy, Debug, Default)]
pub struct Faults {
    pub corrupt_multiplier: bool,
}

fn riesz_for_spectral(grid: GridSpec<f64>, alpha: f64, faults: Faults) -> Result<MultiplierCache<f64>> {
    let clean = MultiplierCache::build(grid, MultiplierKind::Riesz { alpha })?;
    if !faults.corrupt_multiplier {
        return Ok(clean);
    }
    let table = clean.table().iter().enumerate().map(|(i, &v)| if i % 2 == 1 { v * 1.05 } else { v }).collect();
    Ok(MultiplierCache::from_parts(grid, clean.kind(), clean.zero_policy(), table)?)
}

fn random_field(grid: GridSpec<f64>, rng: &mut ChaCha8Rng) -> Result<Field<f64>> {
    let vals = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(Field::from_values(grid, vals)?)
}

fn max_rel_diff(a: &Field<f64>, b: &Field<f64>) -> f64 {
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Spectral multiplier application against direct summation with the same kernel.
pub fn operator_oracles(dim: usize, seed: u64, faults: Faults) -> Result<Vec<Check>> {
    let (points, length, alpha) = match dim {
        1 => (16, 6.0, 0.5),
        2 => (16, 6.0, 1.0),
        _ => (8, 4.0, 2.0),
    };
    let grid = GridSpec::new(dim, points, length)?;
    let spectral = Spectral::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_field(grid, &mut rng)?;
    let kinds = [
        ("laplacian", MultiplierKind::Laplacian),
        ("fractional", MultiplierKind::Fractional { s: 0.5 }),
        ("riesz", MultiplierKind::Riesz { alpha }),
    ];
    let mut out = Vec::new();
    for (name, kind) in kinds {
        let clean = MultiplierCache::build(grid, kind)?;
        let used = match kind {
            MultiplierKind::Riesz { alpha } => riesz_for_spectral(grid, alpha, faults)?,
            _ => clean.clone(),
        };
        let fast = apply_multiplier(&spectral, &f, &used)?;
        let slow = direct_convolve_oracle(&f, &clean)?;
        out.push(Check::at_most(&format!("oracle_{name}_{dim}d"), max_rel_diff(&fast, &slow), 1e-10));
    }
    Ok(out)
}

fn gamma_cross_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let worst = (0..100)
        .map(|_| gamma::cross_check(rng.gen_range(0.05..30.0)))
        .fold(0.0, f64::max);
    Check::at_most("gamma_lanczos_vs_stirling", worst, 1e-12)
}

fn constants() -> Result<Vec<Check>> {
    let pi = std::f64::consts::PI;
    Ok(vec![
        Check::relative(
            "hls_constant_3_2",
            verify::hls_sharp_constant(3, 2.0)?,
            4.0 / 3.0 * (4.0 / pi.sqrt()).powf(2.0 / 3.0),
            1e-12,
        ),
        Check::relative("riesz_normalization_3_2", verify::riesz_normalization(3, 2.0)?, 1.0 / (4.0 * pi), 1e-12),
        Check::relative(
            "riesz_normalization_1_half",
            verify::riesz_normalization(1, 0.5)?,
            1.0 / (2.0 * pi).sqrt(),
            1e-12,
        ),
    ])
}

fn seminorm_1d() -> Result<Check> {
    let s = 0.5;
    let grid = GridSpec::new(1, 1 << 17, (1 << 15) as f64)?;
    let spectral = Spectral::new(grid);
    let u = sample_gaussian(grid, 1.0, 1.0)?;
    let params = ProblemParams::new(1, 0.5, s, 2.0, 0.0, 0.0, 1.0)?;
    let exact = verify::gaussian_breakdown(&params, 1.0, 1.0).semi;
    Ok(Check::relative("gaussian_seminorm_1d", frac_seminorm_sq(&spectral, &u, s)?, exact, 1e-8))
}

fn gaussian_closed_forms() -> Result<Vec<Check>> {
    let grid = GridSpec::new(3, 64, 16.0)?;
    let spectral = Spectral::new(grid);
    let params = ProblemParams::new(3, 2.0, 0.5, 2.0, 0.05, 1.0, 1.0)?;
    let u = sample_gaussian(grid, 1.0, 1.0)?;
    let exact = verify::gaussian_breakdown(&params, 1.0, 1.0);
    let fine = GridSpec::new(3, 64, 32.0)?;
    let fine_spectral = Spectral::new(fine);
    let g = sample_gaussian(fine, 1.0, 1.0)?;
    let model = Model::new(params, fine)?;
    let peak = verify::linfty_bound_check(&model, &g)?;
    let newton = riesz_convolve(&fine_spectral, &g, 2.0)?.at_origin();
    Ok(vec![
        Check::relative("gaussian_mass_3d", u.mass(), exact.mass, 1e-8),
        Check::relative("gaussian_grad_3d", grad_norm_sq(&spectral, &u)?, exact.grad, 1e-8),
        // erf(r)/(2r) at r = 0
        Check::relative("newtonian_potential_origin_3d", newton, 0.5, 1e-3),
        // potential of exp(-2|x|²) at the origin is 1/4
        Check::relative("newtonian_peak_3d", peak, 0.25, 1e-3),
    ])
}

/// Central differences of `S_λ` against `⟨first_variation(u), v⟩`.
pub fn gradient_checks(seed: u64, pairs: usize) -> Result<Check> {
    let grid = GridSpec::new(3, 16, 12.0)?;
    let params = ProblemParams::new(3, 2.0, 0.5, 1.8, 0.05, 1.0, 1.0)?;
    let model = Model::new(params, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let u = smooth_random(grid, &mut rng)?;
        let v = smooth_random(grid, &mut rng)?;
        let g = model.first_variation(&u)?;
        let analytic = g.inner(&v);
        let plus = model.action(&u.axpy(eps, &v))?.action;
        let minus = model.action(&u.axpy(-eps, &v))?.action;
        let fd = (plus - minus) / (2.0 * eps);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(fd.abs()));
    }
    Ok(Check::at_most("gradient_central_difference", worst, 1e-5))
}

/// Randomly centred, randomly scaled Gaussian bump with a random long-wave modulation.
pub fn smooth_random(grid: GridSpec<f64>, rng: &mut ChaCha8Rng) -> Result<Field<f64>> {
    let a = rng.gen_range(0.3..1.5);
    let amp = rng.gen_range(0.5..2.0);
    let c: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let k: [f64; 3] = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    Ok(Field::from_fn(grid, |x| {
        let mut r2 = 0.0;
        let mut arg = phase;
        for d in 0..x.len() {
            r2 += (x[d] - c[d]).powi(2);
            arg += k[d] * x[d];
        }
        amp * (-a * r2).exp() * (1.0 + 0.3 * arg.cos())
    })?)
}

fn hls_checks(faults: Faults) -> Result<Vec<Check>> {
    let grid = GridSpec::new(3, 64, 32.0)?;
    let spectral = Spectral::new(grid);
    let riesz = riesz_for_spectral(grid, 2.0, faults)?;
    let sharp = verify::hls_sharp_constant(3, 2.0)?;
    let ext = verify::hls_extremal(grid, 2.0, 1.0)?;
    let gauss = sample_gaussian(grid, 0.5, 1.0)?;
    let r_ext = verify::hls_ratio(&spectral, &riesz, &ext, &ext)?;
    let r_gauss = verify::hls_ratio(&spectral, &riesz, &gauss, &gauss)?;
    Ok(vec![
        Check::relative("hls_extremal_ratio", r_ext, sharp, 0.02),
        Check::at_most("hls_gaussian_ratio_below_sharp", r_gauss / sharp, 1.0),
    ])
}

fn gn_dilation_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in [1.8, 2.0] {
        let params = ProblemParams::new(3, 2.0, 0.5, p, 0.05, 1.0, 1.0)?;
        let ratios: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&k| verify::gn_ratio_from(&verify::gaussian_dilation(&params, 1.0, 1.0, k), &params))
            .collect::<Result<_, _>>()?;
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios.iter().fold(0.0f64, |m, r| m.max((r - mean).abs())) / mean;
        out.push(Check::at_most(&format!("gn_dilation_invariance_p{p}"), spread, 1e-6));
    }
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64, faults: Faults) -> Result<Vec<Check>> {
    let mut checks = vec![gamma_cross_check(seed)];
    match suite {
        Suite::Oracle1d => {
            checks.extend(operator_oracles(1, seed, faults)?);
            checks.push(seminorm_1d()?);
        }
        Suite::Full => {
            checks.extend(constants()?);
            checks.extend(operator_oracles(1, seed, faults)?);
            checks.extend(operator_oracles(3, seed, faults)?);
            checks.push(seminorm_1d()?);
            checks.extend(gaussian_closed_forms()?);
            checks.push(gradient_checks(seed, 20)?);
            checks.extend(hls_checks(faults)?);
            checks.extend(gn_dilation_checks()?);
        }
    }
    Ok(checks)
}
