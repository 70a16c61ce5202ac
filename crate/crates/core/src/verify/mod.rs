//! Constant evaluators and inequality checks: the sharp
//! Hardy-Littlewood-Sobolev constant, the Riesz normalization, the
//! Gagliardo-Nirenberg ratio with its empirical maximization, and the `L^∞`
//! bound on `I_α * |u|^p`.

pub mod gamma;

use std::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::functionals::{EnergyBreakdown, Model, ProblemParams};
use crate::grid::{sample_gaussian, Field, Spectral};
use crate::operators::{MultiplierCache, MultiplierKind};
use crate::regimes::CriticalExponents;
use crate::{Error, Real, Result};

fn check_orders(n: usize, alpha: f64) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::param("n", format!("dimension must be 1, 2 or 3, got {n}")));
    }
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(Error::param("alpha", format!("Riesz order must lie in (0, {n}), got {alpha}")));
    }
    Ok(())
}

/// `C(n,α) = π^{(n−α)/2} Γ(α/2)/Γ((n+α)/2) · (Γ(n/2)/Γ(n))^{−α/n}`.
pub fn hls_sharp_constant<T: Real>(n: usize, alpha: T) -> Result<T> {
    let a = alpha.to_f64_lossy();
    check_orders(n, a)?;
    let nf = n as f64;
    let g = gamma::gamma;
    let v = PI.powf((nf - a) / 2.0) * g(a / 2.0) / g((nf + a) / 2.0) * (g(nf / 2.0) / g(nf)).powf(-a / nf);
    Ok(T::of(v))
}

/// `A_{n,α} = Γ((n−α)/2) / (π^{n/2} 2^α Γ(α/2))`.
pub fn riesz_normalization<T: Real>(n: usize, alpha: T) -> Result<T> {
    let a = alpha.to_f64_lossy();
    check_orders(n, a)?;
    let nf = n as f64;
    let g = gamma::gamma;
    Ok(T::of(g((nf - a) / 2.0) / (PI.powf(nf / 2.0) * 2f64.powf(a) * g(a / 2.0))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport<T> {
    pub name: String,
    pub formula_value: T,
    pub empirical_value: T,
    pub rel_gap: T,
}

impl<T: Real> ConstantReport<T> {
    pub fn new(name: impl Into<String>, formula_value: T, empirical_value: T) -> Self {
        Self {
            name: name.into(),
            formula_value,
            empirical_value,
            rel_gap: Float::abs(formula_value - empirical_value) / formula_value,
        }
    }
}

/// Sharp-case Lebesgue exponent `t = 2n/(n+α)`.
pub fn hls_exponent<T: Real>(n: usize, alpha: T) -> T {
    let nf = T::of(n as f64);
    T::of(2.0) * nf / (nf + alpha)
}

/// `∬ f(x)h(y)|x−y|^{α−n} / (‖f‖_t ‖h‖_t)`, with the double integral evaluated
/// as `A_{n,α}^{-1} ⟨I_α * f, h⟩`.
pub fn hls_ratio<T: Real>(spectral: &Spectral<T>, riesz: &MultiplierCache<T>, f: &Field<T>, h: &Field<T>) -> Result<T> {
    let alpha = match riesz.kind() {
        MultiplierKind::Riesz { alpha } => alpha,
        other => return Err(Error::param("kernel", format!("expected a Riesz multiplier, got {other:?}"))),
    };
    let grid = spectral.grid();
    grid.check_same(riesz.grid())?;
    grid.check_same(f.grid())?;
    grid.check_same(h.grid())?;
    let t = hls_exponent(grid.dim(), alpha);
    let (nf, nh) = (f.lp_norm(t), h.lp_norm(t));
    if !(nf > T::zero() && nh > T::zero()) {
        return Err(Error::ZeroMass);
    }
    let conv = spectral.apply_symbol(f, |i| riesz.table()[i]);
    let a = riesz_normalization(grid.dim(), alpha)?;
    Ok(conv.inner(h) / a / (nf * nh))
}

/// The extremal profile `(γ² + |x|²)^{−(n+α)/2}`.
pub fn hls_extremal<T: Real>(grid: crate::GridSpec<T>, alpha: T, gamma_sq: T) -> Result<Field<T>> {
    let expo = -(T::of(grid.dim() as f64) + alpha) / T::of(2.0);
    Field::from_fn(grid, |x| {
        let r2 = x.iter().fold(T::zero(), |a, &v| a + v * v);
        (gamma_sq + r2).powf(expo)
    })
}

/// Exponents `((np−n−α)/2, (n+α−p(n−2))/2)` of the gradient and mass norms.
pub fn gn_exponents<T: Real>(params: &ProblemParams<T>) -> (T, T) {
    let two = T::of(2.0);
    (params.dilation_exponent() / two, params.pohozaev_denominator() / two)
}

/// `A_p / (grad^{(np−n−α)/2} · H^{(n+α−p(n−2))/2})` from precomputed energies.
pub fn gn_ratio_from<T: Real>(b: &EnergyBreakdown<T>, params: &ProblemParams<T>) -> Result<T> {
    if !(b.mass > T::zero() && b.grad > T::zero()) {
        return Err(Error::ZeroMass);
    }
    let (eg, eh) = gn_exponents(params);
    Ok(b.choquard / (b.grad.powf(eg) * b.mass.powf(eh)))
}

/// The ratio on a grid field. Outside `[(n+α)/n, (2s+n+α)/n]` only with `allow_outside_range`.
pub fn gn_ratio<T: Real>(model: &Model<T>, u: &Field<T>, allow_outside_range: bool) -> Result<T> {
    let params = model.params();
    if !allow_outside_range {
        check_gn_range(params)?;
    }
    gn_ratio_from(&model.action(u)?, params)
}

fn check_gn_range<T: Real>(params: &ProblemParams<T>) -> Result<()> {
    let c = CriticalExponents::new(params.n, params.alpha, params.s)?;
    let p = params.p;
    let lo_ok = p >= c.lower || crate::regimes::ExponentScalar::ties(p, c.lower);
    let hi_ok = p <= c.s_upper || crate::regimes::ExponentScalar::ties(p, c.s_upper);
    if lo_ok && hi_ok {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange {
            p: p.to_f64_lossy(),
            lo: c.lower.to_f64_lossy(),
            hi: c.s_upper.to_f64_lossy(),
        })
    }
}

/// Continuum energies of `c·exp(−a|x|²)`.
pub fn gaussian_breakdown<T: Real>(params: &ProblemParams<T>, a: T, c: T) -> EnergyBreakdown<T> {
    let pi = T::PI();
    let two = T::of(2.0);
    let half = T::of(0.5);
    let n = params.nf();
    let g = |x: T| T::of(gamma::gamma(x.to_f64_lossy()));
    let sphere = two * pi.powf(n / two) / g(n / two);
    let mass = c * c * (pi / (two * a)).powf(n / two);
    let grad = n * a * mass;
    // ∫|2πξ|^{2s}|û|² with |û|² = c²(π/a)^n exp(−2π²|ξ|²/a)
    let b = two * pi * pi / a;
    let ks = two * params.s;
    let semi = c * c * (pi / a).powf(n) * (two * pi).powf(ks) * sphere * half * g((ks + n) / two)
        * b.powf(-(ks + n) / two);
    let bp = params.p * a;
    let cp = c.powf(params.p);
    let choquard = cp * cp * (pi / bp).powf(n) * (two * pi).powf(-params.alpha) * sphere * half
        * g((n - params.alpha) / two)
        * (two * pi * pi / bp).powf(-(n - params.alpha) / two);
    EnergyBreakdown::from_parts(params, mass, grad, semi, choquard)
}

/// Continuum energies of the mass-preserving dilation `K^{n/2}u(K·)` of a Gaussian.
pub fn gaussian_dilation<T: Real>(params: &ProblemParams<T>, a: T, c: T, k: T) -> EnergyBreakdown<T> {
    gaussian_breakdown(params, a * k * k, c * k.powf(params.nf() / T::of(2.0)))
}

/// Search family for [`estimate_gn_constant`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnSearch<T> {
    /// Gaussian `exp(−a|x|²)` exponents, log-spaced in `[a_min, a_max]`.
    pub a_min: T,
    pub a_max: T,
    pub count: usize,
    pub allow_outside_range: bool,
}

impl<T: Real> Default for GnSearch<T> {
    fn default() -> Self {
        Self { a_min: T::of(0.25), a_max: T::of(4.0), count: 20, allow_outside_range: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnEstimate<T> {
    pub value: T,
    pub argmax: String,
    /// Every profile tried, in order, with its ratio and the running maximum.
    pub trials: Vec<GnTrial<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnTrial<T> {
    pub profile: String,
    pub ratio: T,
    pub running_max: T,
}

/// Empirical lower bound for the G-N constant: the largest grid ratio over a
/// family of Gaussians and any extra supplied profiles.
pub fn estimate_gn_constant<T: Real>(
    model: &Model<T>,
    search: &GnSearch<T>,
    extra: &[(String, Field<T>)],
) -> Result<GnEstimate<T>> {
    if !search.allow_outside_range {
        check_gn_range(model.params())?;
    }
    if search.count == 0 && extra.is_empty() {
        return Err(Error::param("count", "empty search family"));
    }
    let mut profiles: Vec<(String, Field<T>)> = Vec::new();
    for i in 0..search.count {
        let a = if search.count == 1 {
            search.a_min
        } else {
            let t = T::of(i as f64 / (search.count - 1) as f64);
            search.a_min * (search.a_max / search.a_min).powf(t)
        };
        profiles.push((format!("gaussian(a={a:.6})"), sample_gaussian(*model.grid(), a, T::one())?));
    }
    profiles.extend(extra.iter().cloned());

    let mut best = T::neg_infinity();
    let mut argmax = String::new();
    let mut trials = Vec::with_capacity(profiles.len());
    for (name, u) in &profiles {
        let ratio = gn_ratio_from(&model.action(u)?, model.params())?;
        if ratio > best {
            best = ratio;
            argmax = name.clone();
        }
        trials.push(GnTrial { profile: name.clone(), ratio, running_max: best });
    }
    Ok(GnEstimate { value: best, argmax, trials })
}

/// `max_x (I_α * |u|^p)(x)`; requires `n ≥ 3` and `(n+α)/n ≤ p ≤ (n+α)/(n−2)`.
pub fn linfty_bound_check<T: Real>(model: &Model<T>, u: &Field<T>) -> Result<T> {
    let params = model.params();
    let c = CriticalExponents::new(params.n, params.alpha, params.s)?;
    let hi = match c.hls_upper {
        Some(h) => h,
        None => return Err(Error::param("n", "the bound is stated for n >= 3")),
    };
    let p = params.p;
    let tie = crate::regimes::ExponentScalar::ties;
    if !((p >= c.lower || tie(p, c.lower)) && (p <= hi || tie(p, hi))) {
        return Err(Error::ExponentOutOfRange { p: p.to_f64_lossy(), lo: c.lower.to_f64_lossy(), hi: hi.to_f64_lossy() });
    }
    let phi = model.potential(u)?;
    let m = phi.max();
    if !m.is_finite() {
        return Err(Error::NonFinite("potential maximum".into()));
    }
    Ok(m.max(T::zero()))
}
