//! Normalized gradient flow for the constrained minimization of `I_λ` on the
//! mass sphere `‖u‖₂² = τ`, plus the dilation and rescaling probes.
//!
//! One step treats `𝓛` implicitly and the nonlinearity explicitly:
//! `w = (1 + dt(c + 𝓛))⁻¹ (u + dt(N(u) + c·u))`, then `w ← √τ·w/‖w‖₂`.

use std::io::Write;

use log::{debug, info, warn};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::functionals::{EnergyBreakdown, Evaluation, Model, ProblemParams};
use crate::grid::{fourier_interpolate, resample, sample_gaussian, Field, GridSpec, Spectral};
use crate::regimes::{classify, RegimeLabel};
use crate::{Error, Real, Result, VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real"))]
pub struct SolverOptions<T> {
    pub dt: T,
    pub max_iters: usize,
    /// Relative change of `I_λ` per step.
    pub tol_energy: T,
    /// Relative residual of the Euler-Lagrange equation.
    pub tol_residual: T,
    /// Stabilization shift `c` in the implicit operator.
    #[serde(rename = "c")]
    pub shift: T,
    /// Seed `exp(-|x|²/w²)`.
    pub seed_width: T,
    pub energy_floor: T,
    pub max_halvings: u32,
    /// Iterations between dilation-witness probes.
    pub probe_interval: usize,
    pub resolution_study: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            dt: T::of(0.1),
            max_iters: 20_000,
            tol_energy: T::of(1e-10),
            tol_residual: T::of(1e-6),
            shift: T::one(),
            seed_width: T::one(),
            energy_floor: T::of(-1e6),
            max_halvings: 10,
            probe_interval: 100,
            resolution_study: false,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        pos("dt", self.dt)?;
        pos("tol_energy", self.tol_energy)?;
        pos("tol_residual", self.tol_residual)?;
        pos("seed_width", self.seed_width)?;
        if !(self.shift >= T::zero()) {
            return Err(Error::param("c", format!("must be nonnegative, got {}", self.shift)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if self.probe_interval == 0 {
            return Err(Error::param("probe_interval", "must be at least 1"));
        }
        if !(self.energy_floor < T::zero()) {
            return Err(Error::param("energy_floor", format!("must be negative, got {}", self.energy_floor)));
        }
        Ok(())
    }
}

/// How a run left the bounded-energy regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Divergence<T> {
    /// `I_λ` of an iterate fell below the floor.
    EnergyFloor { iteration: usize, free_energy: T },
    /// A step produced non-finite values.
    NonFinite { iteration: usize },
    /// The exact dilation energy `I_λ(u_K)` of an iterate fell below the floor.
    DilationWitness { iteration: usize, k: T, free_energy: T },
}

/// Refined-grid rerun attached when the resolution study is enabled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionStudy<T> {
    pub grid: GridSpec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub delta: T,
    pub equation_rel: T,
    pub pohozaev_rel: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SolveReport<T> {
    pub version: String,
    pub converged: bool,
    pub iterations: usize,
    pub breakdown: EnergyBreakdown<T>,
    #[serde(rename = "Lambda")]
    pub multiplier: T,
    pub delta: T,
    /// Nehari residual at `δ`, relative to its largest term.
    pub nehari_rel: T,
    /// Pointwise Euler-Lagrange residual (see [`Evaluation::equation_residual`]).
    pub equation_rel: T,
    /// Pohozaev residual at `δ`, relative to `μ(n+α)/(2p)·A`.
    pub pohozaev_rel: T,
    pub energy_gap_rel: T,
    pub regime: RegimeLabel,
    pub divergence: Option<Divergence<T>>,
    pub dt_final: T,
    pub dt_halvings: u32,
    pub params: ProblemParams<T>,
    pub grid: GridSpec<T>,
    pub options: SolverOptions<T>,
    pub resolution: Option<ResolutionStudy<T>>,
}

impl<T: Real> SolveReport<T> {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

/// One accepted iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow<T> {
    pub iteration: usize,
    pub dt: T,
    pub free_energy: T,
    pub action: T,
    pub multiplier: T,
    pub nehari_rel: T,
    pub equation_rel: T,
}

pub const HISTORY_HEADER: &str = "iteration,dt,I,S,Lambda,nehari_rel,equation_rel";

pub fn write_history_csv<T: Real, W: Write>(rows: &[HistoryRow<T>], mut out: W) -> Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.iteration, r.dt, r.free_energy, r.action, r.multiplier, r.nehari_rel, r.equation_rel
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Solution<T: Real> {
    pub field: Field<T>,
    pub report: SolveReport<T>,
    pub history: Vec<HistoryRow<T>>,
}

/// One step of the normalized flow.
pub fn flow_step<T: Real>(model: &Model<T>, u: &Field<T>, dt: T, shift: T) -> Result<Field<T>> {
    if !(u.mass() > T::zero()) {
        return Err(Error::ZeroMass);
    }
    let force = model.nonlinearity(u)?;
    step_with_force(model, u, &force, dt, shift)
}

fn step_with_force<T: Real>(model: &Model<T>, u: &Field<T>, force: &Field<T>, dt: T, shift: T) -> Result<Field<T>> {
    let rhs = u.axpy(dt * shift, u).axpy(dt, force);
    let sym = model.mixed_symbol();
    let w = model
        .spectral()
        .apply_symbol(&rhs, |i| T::one() / (T::one() + dt * (shift + sym[i])));
    if !w.is_finite() {
        return Err(Error::NonFinite(format!("flow step with dt = {dt} (step too large)")));
    }
    w.normalized_to(model.params().tau)
}

/// Mass-normalized Gaussian seed `exp(-|x|²/w²)`.
pub fn seed<T: Real>(grid: GridSpec<T>, tau: T, width: T) -> Result<Field<T>> {
    sample_gaussian(grid, T::one() / (width * width), T::one())?.normalized_to(tau)
}

/// First `K = 2^j` (`j ≤ 64`) at which the exact dilation energy drops below `floor`.
pub fn dilation_witness<T: Real>(b: &EnergyBreakdown<T>, params: &ProblemParams<T>, floor: T) -> Option<(T, T)> {
    let mut k = T::one();
    for _ in 0..64 {
        k = k + k;
        let e = b.dilated_free_energy(params, k);
        if !e.is_finite() {
            return None;
        }
        if e < floor {
            return Some((k, e));
        }
    }
    None
}

struct Iterate<T: Real> {
    field: Field<T>,
    eval: Evaluation<T>,
}

impl<T: Real> Iterate<T> {
    fn new(model: &Model<T>, field: Field<T>) -> Result<Self> {
        let eval = model.evaluate(&field)?;
        Ok(Self { field, eval })
    }

    fn free_energy(&self) -> T {
        self.eval.breakdown.free_energy
    }
}

pub fn solve_ground_state<T: Real>(
    params: ProblemParams<T>,
    grid: GridSpec<T>,
    opts: SolverOptions<T>,
) -> Result<Solution<T>> {
    let model = Model::new(params, grid)?;
    solve_with_model(&model, opts)
}

/// Flow from the Gaussian seed on a prepared model.
pub fn solve_with_model<T: Real>(model: &Model<T>, opts: SolverOptions<T>) -> Result<Solution<T>> {
    let start = seed(*model.grid(), model.params().tau, opts.seed_width)?;
    solve_from(model, start, opts)
}

/// Flow from a supplied initial field (renormalized to mass `τ`).
pub fn solve_from<T: Real>(model: &Model<T>, initial: Field<T>, opts: SolverOptions<T>) -> Result<Solution<T>> {
    opts.validate()?;
    let params = *model.params();
    let regime = classify(&params)?;
    if regime != RegimeLabel::ExistenceWindow {
        warn!("p = {} lies in regime {regime} ({}); convergence is not expected", params.p, regime.description());
    }
    let two = T::of(2.0);
    let mut cur = Iterate::new(model, initial.normalized_to(params.tau)?)?;
    let mut dt = opts.dt;
    let mut halvings = 0u32;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut divergence = None;
    let mut history = Vec::new();

    let record = |it: &Iterate<T>, iteration: usize, dt: T, history: &mut Vec<HistoryRow<T>>| -> Result<()> {
        let b = &it.eval.breakdown;
        let lam = b.multiplier(&params)?;
        history.push(HistoryRow {
            iteration,
            dt,
            free_energy: b.free_energy,
            action: b.action,
            multiplier: lam,
            nehari_rel: b.nehari(&params, -two * lam).relative,
            equation_rel: it.eval.equation_residual(&it.field, -two * lam).relative,
        });
        Ok(())
    };
    record(&cur, 0, dt, &mut history)?;

    while iterations < opts.max_iters {
        let next = match step_with_force(model, &cur.field, &cur.eval.force, dt, opts.shift)
            .and_then(|w| Iterate::new(model, w))
        {
            Ok(next) if next.eval.breakdown.free_energy.is_finite() => next,
            Ok(_) | Err(Error::NonFinite(_)) => {
                divergence = Some(Divergence::NonFinite { iteration: iterations + 1 });
                break;
            }
            Err(e) => return Err(e),
        };
        let (old, new) = (cur.free_energy(), next.free_energy());
        let slack = T::of(1e-13) * Float::abs(old).max(T::one());
        if new > old + slack && halvings < opts.max_halvings {
            dt = dt / two;
            halvings += 1;
            warn!("I_lambda increased from {old:e} to {new:e} at iteration {}; dt halved to {dt:e}", iterations + 1);
            continue;
        }
        iterations += 1;
        cur = next;
        record(&cur, iterations, dt, &mut history)?;
        let row = history.last().copied().expect("row just pushed");

        if new < opts.energy_floor {
            divergence = Some(Divergence::EnergyFloor { iteration: iterations, free_energy: new });
            break;
        }
        if iterations % opts.probe_interval == 0 {
            if let Some((k, e)) = dilation_witness(&cur.eval.breakdown, &params, opts.energy_floor) {
                divergence = Some(Divergence::DilationWitness { iteration: iterations, k, free_energy: e });
                break;
            }
        }
        let scale = Float::abs(new).max(cur.eval.breakdown.mass);
        if Float::abs(new - old) <= opts.tol_energy * scale && row.equation_rel <= opts.tol_residual {
            converged = true;
            break;
        }
        if iterations % 1000 == 0 {
            debug!("iteration {iterations}: I = {new:e}, equation residual {:e}", row.equation_rel);
        }
    }
    if divergence.is_none() && !converged {
        if let Some((k, e)) = dilation_witness(&cur.eval.breakdown, &params, opts.energy_floor) {
            divergence = Some(Divergence::DilationWitness { iteration: iterations, k, free_energy: e });
        }
    }
    if let Some(d) = &divergence {
        info!("divergence flagged in regime {regime}: {d:?}");
    }

    let b = cur.eval.breakdown;
    let multiplier = b.multiplier(&params)?;
    let delta = -two * multiplier;
    let poh = b.pohozaev(&params, delta);
    let a_term = params.mu * (params.nf() + params.alpha) / (two * params.p) * b.choquard;
    let pohozaev_rel = if a_term > T::zero() { Float::abs(poh.raw) / a_term } else { poh.relative };
    let equation_rel = cur.eval.equation_residual(&cur.field, delta).relative;

    let resolution = if opts.resolution_study {
        let fine = GridSpec::new(
            model.grid().dim(),
            model.grid().points() * 2,
            model.grid().length() * T::of(1.5),
        )?;
        let fine_model = Model::new(params, fine)?;
        let sub = solve_with_model(&fine_model, SolverOptions { resolution_study: false, ..opts })?;
        Some(ResolutionStudy {
            grid: fine,
            converged: sub.report.converged,
            iterations: sub.report.iterations,
            delta: sub.report.delta,
            equation_rel: sub.report.equation_rel,
            pohozaev_rel: sub.report.pohozaev_rel,
        })
    } else {
        None
    };

    let report = SolveReport {
        version: VERSION.to_string(),
        converged,
        iterations,
        breakdown: b,
        multiplier,
        delta,
        nehari_rel: b.nehari(&params, delta).relative,
        equation_rel,
        pohozaev_rel,
        energy_gap_rel: b.energy_gap(&params).relative,
        regime,
        divergence,
        dt_final: dt,
        dt_halvings: halvings,
        params,
        grid: *model.grid(),
        options: opts,
        resolution,
    };
    Ok(Solution { field: cur.field, report, history })
}

/// `(K, I_λ(u_K))` from the closed-form dilation law, optionally cross-checked
/// against a band-limited resampling of `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationPoint<T> {
    pub k: T,
    pub free_energy: T,
    pub resampled: Option<T>,
}

pub fn dilation_energy_curve<T: Real>(
    model: &Model<T>,
    u: &Field<T>,
    ks: &[T],
    cross_check: bool,
) -> Result<Vec<DilationPoint<T>>> {
    let b = model.action(u)?;
    ks.iter()
        .map(|&k| {
            if !(k > T::zero()) {
                return Err(Error::param("K", format!("dilation factor must be positive, got {k}")));
            }
            let resampled = if cross_check {
                let uk = fourier_interpolate(model.spectral(), u, k)?;
                Some(model.action(&uk)?.free_energy)
            } else {
                None
            };
            Ok(DilationPoint { k, free_energy: b.dilated_free_energy(model.params(), k), resampled })
        })
        .collect()
}

/// Exponents `(A, B, C)` with `H(u) = δ^A H(v)`, `grad(u) = δ^B grad(v)`,
/// `A_p(u) = δ^B A_p(v)` and `[u]² = δ^C [v]²` under [`delta_rescale`].
pub fn rescale_exponents<T: Real>(params: &ProblemParams<T>) -> (T, T, T) {
    let two = T::of(2.0);
    let n = params.nf();
    let (a, p, s) = (params.alpha, params.p, params.s);
    let d = two * (p - T::one());
    (
        (two + a + n - n * p) / d,
        (n + a - p * (n - two)) / d,
        (two + a - (n - two * s) * (p - T::one())) / d,
    )
}

/// `v(x) = δ^{−(2+α)/(4(p−1))} u(δ^{−1/2} x)`.
pub fn delta_rescale<T: Real>(
    spectral: &Spectral<T>,
    u: &Field<T>,
    delta: T,
    params: &ProblemParams<T>,
) -> Result<Field<T>> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    let amp = delta.powf(-(T::of(2.0) + params.alpha) / (T::of(4.0) * (params.p - T::one())));
    resample(spectral, u, delta.powf(T::of(-0.5)), amp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProblemParams<f64> {
        ProblemParams::new(3, 2.0, 0.5, 1.8, 0.05, 1.0, 1.0).unwrap()
    }

    #[test]
    fn option_validation() {
        let ok = SolverOptions::<f64>::default();
        assert!(ok.validate().is_ok());
        assert!(SolverOptions { dt: 0.0, ..ok }.validate().is_err());
        assert!(SolverOptions { max_iters: 0, ..ok }.validate().is_err());
        assert!(SolverOptions { tol_energy: -1.0, ..ok }.validate().is_err());
        assert!(SolverOptions { shift: -1.0, ..ok }.validate().is_err());
    }

    #[test]
    fn options_deserialize_with_defaults() {
        let o: SolverOptions<f64> = serde_json::from_str(r#"{"dt": 0.05, "c": 2.0}"#).unwrap();
        assert_eq!(o.dt, 0.05);
        assert_eq!(o.shift, 2.0);
        assert_eq!(o.max_iters, 20_000);
    }

    #[test]
    fn step_preserves_mass() {
        let g = GridSpec::<f64>::new(3, 16, 12.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let u = sample_gaussian(g, 0.7, 2.0).unwrap();
        let w = flow_step(&m, &u, 0.1, 1.0).unwrap();
        assert!((w.mass() - 1.0).abs() < 1e-12);
        assert!(matches!(flow_step(&m, &Field::zeros(g), 0.1, 1.0), Err(Error::ZeroMass)));
    }

    #[test]
    fn constant_field_is_fixed_without_coupling() {
        let g = GridSpec::<f64>::new(3, 16, 8.0).unwrap();
        let m = Model::new(params().with_mu(0.0), g).unwrap();
        let u = Field::constant(g, 1.0).normalized_to(1.0).unwrap();
        let w = flow_step(&m, &u, 0.1, 1.0).unwrap();
        for (a, b) in w.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_fires_only_for_unbounded_dilations() {
        let pr = params();
        let b = EnergyBreakdown::from_parts(&pr, 1.0, 1.0, 1.0, 1.0);
        assert!(dilation_witness(&b, &pr, -1e6).is_none());
        let sup = pr.with_p(3.0);
        let b = EnergyBreakdown::from_parts(&sup, 1.0, 1.0, 1.0, 1.0);
        let (k, e) = dilation_witness(&b, &sup, -1e6).unwrap();
        assert!(e < -1e6);
        assert!(b.dilated_free_energy(&sup, k / 2.0) >= -1e6);
    }

    #[test]
    fn rescale_exponents_match_hand_values() {
        let (a, b, c) = rescale_exponents(&params());
        assert!((a - (2.0 + 2.0 + 3.0 - 5.4) / 1.6).abs() < 1e-14);
        assert!((b - (5.0 - 1.8) / 1.6).abs() < 1e-14);
        assert!((c - (4.0 - 2.0 * 0.8) / 1.6).abs() < 1e-14);
    }

    #[test]
    fn unit_delta_is_identity() {
        let g = GridSpec::<f64>::new(3, 16, 12.0).unwrap();
        let sp = Spectral::new(g);
        let u = sample_gaussian(g, 0.5, 1.0).unwrap();
        let v = delta_rescale(&sp, &u, 1.0, &params()).unwrap();
        for (a, b) in v.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(delta_rescale(&sp, &u, 0.0, &params()).is_err());
    }

    #[test]
    fn unit_dilation_reproduces_free_energy() {
        let g = GridSpec::<f64>::new(3, 16, 12.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let u = sample_gaussian(g, 0.5, 1.0).unwrap();
        let c = dilation_energy_curve(&m, &u, &[1.0], true).unwrap();
        let i = m.action(&u).unwrap().free_energy;
        assert_eq!(c[0].free_energy, i);
        assert!((c[0].resampled.unwrap() - i).abs() < 1e-12 * i.abs().max(1.0));
        assert!(dilation_energy_curve(&m, &u, &[-1.0], false).is_err());
    }
}
