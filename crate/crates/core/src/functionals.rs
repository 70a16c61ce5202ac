//! Energies, first variation and the scalar identities satisfied by solutions
//! of `𝓛u + δu = μ(I_α * |u|^p)|u|^{p-2}u`.
//!
//! Notation: `H = ‖u‖₂²`, `grad = ‖∇u‖₂²`, `semi = [u]²`, `T = grad + λ·semi`,
//! `A = ∫(I_α * |u|^p)|u|^p`,
//! `I_λ = grad/2 + λ·semi/2 − μA/(2p)` and `S_λ = I_λ + H/2`.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::grid::{Field, GridSpec, Spectral};
use crate::operators::{laplacian_symbol, validate_fractional, validate_riesz, MultiplierCache, MultiplierKind, ZeroModePolicy};
use crate::{Error, Real, Result};

/// `(n, α, s, p, λ, μ, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams<T> {
    pub n: usize,
    pub alpha: T,
    pub s: T,
    pub p: T,
    pub lambda: T,
    pub mu: T,
    pub tau: T,
}

impl<T: Real> ProblemParams<T> {
    pub fn new(n: usize, alpha: T, s: T, p: T, lambda: T, mu: T, tau: T) -> Result<Self> {
        let params = Self { n, alpha, s, p, lambda, mu, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::param("n", format!("dimension must be 1, 2 or 3, got {}", self.n)));
        }
        validate_riesz(self.n, self.alpha)?;
        if !(self.s > T::zero() && self.s < T::one()) {
            return Err(Error::param("s", format!("fractional order must lie in (0, 1), got {}", self.s)));
        }
        if !(self.lambda >= T::zero()) {
            return Err(Error::param("lambda", format!("must be nonnegative, got {}", self.lambda)));
        }
        if !(self.mu >= T::zero()) {
            return Err(Error::param("mu", format!("must be nonnegative, got {}", self.mu)));
        }
        if !(self.tau > T::zero()) {
            return Err(Error::param("tau", format!("prescribed mass must be positive, got {}", self.tau)));
        }
        let lower = self.lower_exponent();
        if !(self.p > T::one()) || self.p < lower * (T::one() - T::of(1e-12)) {
            return Err(Error::param(
                "p",
                format!("exponent must satisfy p >= (n+alpha)/n = {lower}, got {}", self.p),
            ));
        }
        Ok(())
    }

    pub fn nf(&self) -> T {
        T::of(self.n as f64)
    }

    /// `(n+α)/n`.
    pub fn lower_exponent(&self) -> T {
        (self.nf() + self.alpha) / self.nf()
    }

    /// Dilation exponent of `A` under `u_K = K^{n/2}u(K·)`: `np − n − α`.
    pub fn dilation_exponent(&self) -> T {
        self.nf() * self.p - self.nf() - self.alpha
    }

    /// `n + α − p(n − 2)`.
    pub fn pohozaev_denominator(&self) -> T {
        self.nf() + self.alpha - self.p * (self.nf() - T::of(2.0))
    }

    pub fn with_p(mut self, p: T) -> Self {
        self.p = p;
        self
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_mu(mut self, mu: T) -> Self {
        self.mu = mu;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    #[serde(rename = "H")]
    pub mass: T,
    pub grad: T,
    pub semi: T,
    #[serde(rename = "T")]
    pub kinetic: T,
    #[serde(rename = "A")]
    pub choquard: T,
    #[serde(rename = "S")]
    pub action: T,
    #[serde(rename = "I")]
    pub free_energy: T,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn from_parts(params: &ProblemParams<T>, mass: T, grad: T, semi: T, choquard: T) -> Self {
        let two = T::of(2.0);
        let kinetic = grad + params.lambda * semi;
        let free_energy = grad / two + params.lambda * semi / two - params.mu * choquard / (two * params.p);
        Self {
            mass,
            grad,
            semi,
            kinetic,
            choquard,
            action: free_energy + mass / two,
            free_energy,
        }
    }

    /// `I_λ(u_K)` for the mass-preserving dilation, exact in the continuum.
    pub fn dilated_free_energy(&self, params: &ProblemParams<T>, k: T) -> T {
        let two = T::of(2.0);
        k * k * self.grad / two + k.powf(two * params.s) * params.lambda * self.semi / two
            - params.mu * k.powf(params.dilation_exponent()) * self.choquard / (two * params.p)
    }

    /// Nehari combination `grad + δH + λ·semi − μA`.
    pub fn nehari(&self, params: &ProblemParams<T>, delta: T) -> Residual<T> {
        Residual::from_terms(&[
            self.grad,
            delta * self.mass,
            params.lambda * self.semi,
            -params.mu * self.choquard,
        ])
    }

    /// Pohozaev combination
    /// `(n−2)/2·grad + (n−2s)/2·λ·semi + δ·n/2·H − μ(n+α)/(2p)·A`.
    pub fn pohozaev(&self, params: &ProblemParams<T>, delta: T) -> Residual<T> {
        let two = T::of(2.0);
        let n = params.nf();
        Residual::from_terms(&[
            (n - two) / two * self.grad,
            (n - two * params.s) / two * params.lambda * self.semi,
            delta * n / two * self.mass,
            -params.mu * (n + params.alpha) / (two * params.p) * self.choquard,
        ])
    }

    /// `S_λ − μ(p−1)/(2p)·A`.
    pub fn energy_gap(&self, params: &ProblemParams<T>) -> Residual<T> {
        let two = T::of(2.0);
        Residual::from_terms(&[
            self.action,
            -params.mu * (params.p - T::one()) / (two * params.p) * self.choquard,
        ])
    }

    /// `Λ = (T − μA) / (2H)`.
    pub fn multiplier(&self, params: &ProblemParams<T>) -> Result<T> {
        if !(self.mass > T::zero()) {
            return Err(Error::ZeroMass);
        }
        Ok((self.kinetic - params.mu * self.choquard) / (T::of(2.0) * self.mass))
    }

    /// Defect of the linear relation
    /// `(μ/2p)A − H/d − (1−s)λ·semi/d = (n−2)/(2d)·Nehari − 1/d·Pohozaev`
    /// (both at `δ = 1`, `d = n + α − p(n−2)`); zero up to roundoff for any field.
    pub fn combination_defect(&self, params: &ProblemParams<T>) -> T {
        let two = T::of(2.0);
        let d = params.pohozaev_denominator();
        let lhs = params.mu / (two * params.p) * self.choquard
            - self.mass / d
            - (T::one() - params.s) * params.lambda * self.semi / d;
        let rhs = (params.nf() - two) / (two * d) * self.nehari(params, T::one()).raw
            - self.pohozaev(params, T::one()).raw / d;
        lhs - rhs
    }
}

/// A residual reported both raw and divided by the magnitude of its largest term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residual<T> {
    pub raw: T,
    pub scale: T,
    pub relative: T,
}

impl<T: Real> Residual<T> {
    pub fn from_terms(terms: &[T]) -> Self {
        let raw = terms.iter().fold(T::zero(), |a, &b| a + b);
        let scale = terms.iter().fold(T::zero(), |m, &t| m.max(Float::abs(t)));
        let relative = if scale > T::zero() { Float::abs(raw) / scale } else { T::zero() };
        Self { raw, scale, relative }
    }

    pub fn from_norms(raw: T, scale: T) -> Self {
        let relative = if scale > T::zero() { Float::abs(raw) / scale } else { T::zero() };
        Self { raw, scale, relative }
    }
}

/// `|v|^q` with the convention `0^q = 0`.
#[inline]
pub(crate) fn abs_pow<T: Real>(v: T, q: T) -> T {
    let a = Float::abs(v);
    if a == T::zero() {
        T::zero()
    } else {
        a.powf(q)
    }
}

/// `|v|^{q-1}·sign(v)`, zero at `v = 0`.
#[inline]
pub(crate) fn signed_pow<T: Real>(v: T, q: T) -> T {
    let a = Float::abs(v);
    if a == T::zero() {
        T::zero()
    } else {
        a.powf(q - T::one()) * v.signum()
    }
}

/// A problem instance bound to a grid, with its symbol tables precomputed.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    params: ProblemParams<T>,
    spectral: Spectral<T>,
    laplacian: Vec<T>,
    fractional: Vec<T>,
    mixed: Vec<T>,
    riesz: MultiplierCache<T>,
    dealias: Option<Vec<bool>>,
}

impl<T: Real> Model<T> {
    pub fn new(params: ProblemParams<T>, grid: GridSpec<T>) -> Result<Self> {
        Self::with_policy(params, grid, ZeroModePolicy::default())
    }

    pub fn with_policy(params: ProblemParams<T>, grid: GridSpec<T>, policy: ZeroModePolicy<T>) -> Result<Self> {
        params.validate()?;
        if params.n != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "problem dimension {} on a {}-dimensional grid",
                params.n,
                grid.dim()
            )));
        }
        let riesz = MultiplierCache::build_with_policy(grid, MultiplierKind::Riesz { alpha: params.alpha }, policy)?;
        Self::with_riesz(params, riesz)
    }

    /// Uses an explicit Riesz table (alternative kernels, fault injection).
    pub fn with_riesz(params: ProblemParams<T>, riesz: MultiplierCache<T>) -> Result<Self> {
        params.validate()?;
        let grid = *riesz.grid();
        validate_fractional(params.s)?;
        let laplacian = laplacian_symbol(&grid);
        let fractional: Vec<T> = laplacian.iter().map(|&m| m.powf(params.s)).collect();
        let mixed = laplacian
            .iter()
            .zip(&fractional)
            .map(|(&a, &b)| a + params.lambda * b)
            .collect();
        Ok(Self {
            params,
            spectral: Spectral::new(grid),
            laplacian,
            fractional,
            mixed,
            riesz,
            dealias: None,
        })
    }

    /// Enables 2/3-rule truncation of the nonlinear force term.
    pub fn with_dealiasing(mut self, on: bool) -> Self {
        self.dealias = on.then(|| {
            let g = *self.spectral.grid();
            let cut = (g.points() / 3) as i64;
            (0..g.len())
                .map(|flat| {
                    let idx = g.unravel(flat);
                    idx[..g.dim()].iter().all(|&j| g.wavenumber(j).abs() <= cut)
                })
                .collect()
        });
        self
    }

    pub fn params(&self) -> &ProblemParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral<T> {
        &self.spectral
    }

    pub fn riesz(&self) -> &MultiplierCache<T> {
        &self.riesz
    }

    pub fn mixed_symbol(&self) -> &[T] {
        &self.mixed
    }

    /// Same grid and kernel, different parameters (same `α` and `n`).
    pub fn reparametrize(&self, params: ProblemParams<T>) -> Result<Self> {
        if params.n != self.params.n || params.alpha != self.params.alpha {
            return Err(Error::param("alpha", "reparametrization must keep n and alpha"));
        }
        let mut m = Self::with_riesz(params, self.riesz.clone())?;
        m.dealias = self.dealias.clone();
        Ok(m)
    }

    fn check(&self, u: &Field<T>) -> Result<()> {
        self.grid().check_same(u.grid())
    }

    /// `I_α * |u|^p`.
    pub fn potential(&self, u: &Field<T>) -> Result<Field<T>> {
        self.check(u)?;
        let p = self.params.p;
        let f = u.map(|v| abs_pow(v, p));
        Ok(self.spectral.apply_symbol(&f, |i| self.riesz.table()[i]))
    }

    /// `𝒜_p(u) = ⟨I_α * |u|^p, |u|^p⟩`.
    pub fn choquard_energy(&self, u: &Field<T>) -> Result<T> {
        let p = self.params.p;
        let f = u.map(|v| abs_pow(v, p));
        let phi = self.potential(u)?;
        Ok(phi.inner(&f))
    }

    /// `μ(I_α * |u|^p)|u|^{p−2}u`.
    pub fn nonlinearity(&self, u: &Field<T>) -> Result<Field<T>> {
        let p = self.params.p;
        let mu = self.params.mu;
        let phi = self.potential(u)?;
        let force = phi.zip_map(u, |ph, v| mu * ph * signed_pow(v, p));
        Ok(match &self.dealias {
            Some(mask) => self.spectral.apply_symbol(&force, |i| if mask[i] { T::one() } else { T::zero() }),
            None => force,
        })
    }

    /// `𝓛u`.
    pub fn mixed_apply(&self, u: &Field<T>) -> Result<Field<T>> {
        self.check(u)?;
        Ok(self.spectral.apply_symbol(u, |i| self.mixed[i]))
    }

    pub fn action(&self, u: &Field<T>) -> Result<EnergyBreakdown<T>> {
        self.check(u)?;
        let spec = self.spectral.transform(u)?;
        let grad = spec.weighted_energy(|i| self.laplacian[i]);
        let semi = spec.weighted_energy(|i| if i == 0 { T::zero() } else { self.fractional[i] });
        let mass = u.mass();
        let choquard = self.choquard_energy(u)?;
        Ok(EnergyBreakdown::from_parts(&self.params, mass, grad, semi, choquard))
    }

    /// L²-gradient of `S_λ`: `𝓛u + u − μ(I_α * |u|^p)|u|^{p−2}u`.
    pub fn first_variation(&self, u: &Field<T>) -> Result<Field<T>> {
        let lu = self.mixed_apply(u)?;
        let nl = self.nonlinearity(u)?;
        Ok(lu.axpy(T::one(), u).axpy(-T::one(), &nl))
    }

    pub fn nehari_residual(&self, u: &Field<T>, delta: T) -> Result<Residual<T>> {
        Ok(self.action(u)?.nehari(&self.params, delta))
    }

    pub fn pohozaev_residual(&self, u: &Field<T>, delta: T) -> Result<Residual<T>> {
        Ok(self.action(u)?.pohozaev(&self.params, delta))
    }

    pub fn lagrange_multiplier(&self, u: &Field<T>) -> Result<T> {
        self.action(u)?.multiplier(&self.params)
    }

    pub fn energy_identity_gap(&self, u: &Field<T>) -> Result<Residual<T>> {
        Ok(self.action(u)?.energy_gap(&self.params))
    }

    /// `‖𝓛u + δu − μ(I_α * |u|^p)|u|^{p−2}u‖₂`, scaled by the largest of
    /// `‖𝓛u‖₂`, `‖u‖₂` and `‖μ(I_α * |u|^p)|u|^{p−2}u‖₂`.
    pub fn equation_residual(&self, u: &Field<T>, delta: T) -> Result<Residual<T>> {
        Ok(self.evaluate(u)?.equation_residual(u, delta))
    }

    /// Energies, `𝓛u` and the nonlinear term in one pass.
    pub fn evaluate(&self, u: &Field<T>) -> Result<Evaluation<T>> {
        self.check(u)?;
        let p = self.params.p;
        let mu = self.params.mu;
        let spec = self.spectral.transform(u)?;
        let grad = spec.weighted_energy(|i| self.laplacian[i]);
        let semi = spec.weighted_energy(|i| if i == 0 { T::zero() } else { self.fractional[i] });
        let operator = self.spectral.apply_symbol(u, |i| self.mixed[i]);
        let density = u.map(|v| abs_pow(v, p));
        let phi = self.spectral.apply_symbol(&density, |i| self.riesz.table()[i]);
        let choquard = phi.inner(&density);
        let force = phi.zip_map(u, |ph, v| mu * ph * signed_pow(v, p));
        let force = match &self.dealias {
            Some(mask) => self.spectral.apply_symbol(&force, |i| if mask[i] { T::one() } else { T::zero() }),
            None => force,
        };
        Ok(Evaluation {
            breakdown: EnergyBreakdown::from_parts(&self.params, u.mass(), grad, semi, choquard),
            operator,
            force,
        })
    }
}

/// Output of [`Model::evaluate`].
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub breakdown: EnergyBreakdown<T>,
    /// `𝓛u`
    pub operator: Field<T>,
    /// `μ(I_α * |u|^p)|u|^{p−2}u`
    pub force: Field<T>,
}

impl<T: Real> Evaluation<T> {
    pub fn equation_residual(&self, u: &Field<T>, delta: T) -> Residual<T> {
        let r = self.operator.axpy(delta, u).axpy(-T::one(), &self.force);
        let scale = self.operator.norm().max(u.norm()).max(self.force.norm());
        Residual::from_norms(r.norm(), scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_gaussian;

    fn params() -> ProblemParams<f64> {
        ProblemParams::new(3, 2.0, 0.5, 1.8, 0.1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ProblemParams::new(3, 3.0, 0.5, 1.8, 0.1, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 2.0, 1.0, 1.8, 0.1, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 2.0, 0.5, 1.5, 0.1, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 2.0, 0.5, 1.8, -0.1, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 2.0, 0.5, 1.8, 0.1, 1.0, 0.0).is_err());
        assert!(ProblemParams::new(3, 2.0, 0.5, 5.0 / 3.0, 0.1, 1.0, 1.0).is_ok());
    }

    #[test]
    fn zero_field_everything_vanishes() {
        let g = GridSpec::<f64>::new(3, 16, 16.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let z = Field::zeros(g);
        let b = m.action(&z).unwrap();
        assert_eq!(b, EnergyBreakdown::default());
        assert_eq!(m.first_variation(&z).unwrap().max_abs(), 0.0);
        assert_eq!(m.nehari_residual(&z, 1.0).unwrap().raw, 0.0);
        assert_eq!(m.pohozaev_residual(&z, 1.0).unwrap().raw, 0.0);
        assert_eq!(m.energy_identity_gap(&z).unwrap().raw, 0.0);
        assert!(matches!(m.lagrange_multiplier(&z), Err(Error::ZeroMass)));
    }

    #[test]
    fn breakdown_invariants() {
        let g = GridSpec::<f64>::new(3, 32, 16.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let u = sample_gaussian(g, 0.8, 1.1).unwrap();
        let b = m.action(&u).unwrap();
        let pr = m.params();
        assert_eq!(b.kinetic, b.grad + pr.lambda * b.semi);
        assert!((b.action - b.free_energy - b.mass / 2.0).abs() <= 1e-12 * b.action.abs());
        let direct = b.grad / 2.0 + b.mass / 2.0 + pr.lambda * b.semi / 2.0 - pr.mu * b.choquard / (2.0 * pr.p);
        assert!((b.action - direct).abs() <= 1e-12 * b.action.abs());
        assert!(b.choquard > 0.0);
        assert!(b.combination_defect(pr).abs() < 1e-12);
    }

    #[test]
    fn sign_flip_invariance() {
        let g = GridSpec::<f64>::new(3, 16, 12.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let u = sample_gaussian(g, 0.6, 1.0).unwrap();
        let a = m.choquard_energy(&u).unwrap();
        let b = m.choquard_energy(&u.scaled(-1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quadratic_form_without_coupling() {
        let g = GridSpec::<f64>::new(3, 16, 12.0).unwrap();
        let pr = params().with_mu(0.0);
        let m = Model::new(pr, g).unwrap();
        let u = sample_gaussian(g, 0.6, 1.0).unwrap();
        let b = m.action(&u).unwrap();
        assert!((b.action - (b.grad + pr.lambda * b.semi + b.mass) / 2.0).abs() < 1e-14);
        assert!(b.action > 0.0);
        assert!(m.nehari_residual(&u, 1.0).unwrap().raw > 0.0);
        let lam = m.lagrange_multiplier(&u).unwrap();
        assert!(lam > 0.0);
        assert!((lam - b.kinetic / (2.0 * b.mass)).abs() < 1e-15);
    }

    #[test]
    fn single_mode_first_variation_without_coupling() {
        let g = GridSpec::<f64>::new(3, 16, 8.0).unwrap();
        let pr = params().with_mu(0.0);
        let m = Model::new(pr, g).unwrap();
        let k1 = 2.0 * std::f64::consts::PI / 8.0;
        let u = Field::from_fn(g, |x| (k1 * x[1]).cos()).unwrap();
        let gvar = m.first_variation(&u).unwrap();
        let factor = k1 * k1 + pr.lambda * k1.powf(2.0 * pr.s) + 1.0;
        for (a, b) in gvar.values().iter().zip(u.values()) {
            assert!((a - factor * b).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_identity_closes_nehari() {
        let g = GridSpec::<f64>::new(3, 16, 12.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let u = sample_gaussian(g, 0.5, 0.9).unwrap();
        let lam = m.lagrange_multiplier(&u).unwrap();
        let r = m.nehari_residual(&u, -2.0 * lam).unwrap();
        assert!(r.relative < 1e-13, "{r:?}");
    }

    #[test]
    fn gaussian_is_not_a_solution() {
        let g = GridSpec::<f64>::new(3, 32, 16.0).unwrap();
        let m = Model::new(params(), g).unwrap();
        let u = sample_gaussian(g, 1.0, 1.0).unwrap();
        let r = m.pohozaev_residual(&u, 1.0).unwrap();
        assert!(r.relative > 0.1, "{r:?}");
        assert!(m.energy_identity_gap(&u).unwrap().relative > 0.1);
    }

    #[test]
    fn grid_dimension_must_match() {
        let g = GridSpec::<f64>::new(2, 16, 8.0).unwrap();
        assert!(Model::new(params(), g).is_err());
    }
}
