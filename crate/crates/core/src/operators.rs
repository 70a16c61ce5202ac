//! Fourier-multiplier operators: `-Δ`, `(-Δ)^s`, the mixed operator
//! `-Δ + λ(-Δ)^s`, and convolution with the Riesz potential `I_α`.
//!
//! With the transform kernel `e^{-2πi x·ξ}` the symbols are `|2πξ|²`,
//! `|2πξ|^{2s}` and `|2πξ|^{-α}`; the normalizing constants of the singular
//! integral definitions are exactly those that produce these symbols, so they
//! never enter the numerics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::grid::{Field, GridSpec, Spectral};
use crate::lattice;
use crate::{Error, Real, Result};

/// Largest grid (`N^n`) the direct summation oracle accepts.
pub const ORACLE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierKind<T> {
    Laplacian,
    Fractional { s: T },
    Riesz { alpha: T },
}

/// Value used for the Riesz symbol at `ξ = 0`, where `|2πξ|^{-α}` is singular.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum ZeroModePolicy<T> {
    /// Chosen so the periodic kernel agrees with `A|x|^{α-n}` at the origin
    /// up to a smooth remainder vanishing there (Ewald lattice sum).
    #[default]
    LatticeMatched,
    /// `A ∫_{|x| ≤ L/2} |x|^{α-n} dx = A σ_{n-1} (L/2)^α / α`.
    TruncatedBall,
    Zero,
    Value(T),
}

impl<T: Real> ZeroModePolicy<T> {
    pub fn resolve(&self, grid: &GridSpec<T>, alpha: T) -> T {
        let n = grid.dim();
        let l = grid.length().to_f64_lossy();
        let a = alpha.to_f64_lossy();
        match *self {
            ZeroModePolicy::LatticeMatched => T::of(lattice::matched_zero_mode(n, l, a)),
            ZeroModePolicy::TruncatedBall => {
                let nf = n as f64;
                let sphere = 2.0 * std::f64::consts::PI.powf(nf / 2.0)
                    / statrs::function::gamma::gamma(nf / 2.0);
                T::of(lattice::riesz_constant(n, a) * sphere * (l / 2.0).powf(a) / a)
            }
            ZeroModePolicy::Zero => T::zero(),
            ZeroModePolicy::Value(v) => v,
        }
    }
}

/// Precomputed symbol table over the frequency lattice (storage order).
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierCache<T> {
    grid: GridSpec<T>,
    kind: MultiplierKind<T>,
    zero_policy: Option<ZeroModePolicy<T>>,
    table: Vec<T>,
}

pub(crate) fn validate_fractional<T: Real>(s: T) -> Result<()> {
    if !(s > T::zero() && s <= T::one()) {
        return Err(Error::param("s", format!("fractional order must lie in (0, 1], got {s}")));
    }
    Ok(())
}

pub(crate) fn validate_riesz<T: Real>(dim: usize, alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::of(dim as f64)) {
        return Err(Error::param("alpha", format!("Riesz order must lie in (0, {dim}), got {alpha}")));
    }
    Ok(())
}

/// `|2πξ|²` in storage order.
pub(crate) fn laplacian_symbol<T: Real>(grid: &GridSpec<T>) -> Vec<T> {
    let four_pi2 = T::of(4.0) * T::PI() * T::PI();
    grid.frequency_sq_table().into_iter().map(|x| four_pi2 * x).collect()
}

impl<T: Real> MultiplierCache<T> {
    /// Builds the table for `kind`; Riesz kernels use the default zero-mode policy.
    pub fn build(grid: GridSpec<T>, kind: MultiplierKind<T>) -> Result<Self> {
        Self::build_with_policy(grid, kind, ZeroModePolicy::default())
    }

    pub fn build_with_policy(grid: GridSpec<T>, kind: MultiplierKind<T>, policy: ZeroModePolicy<T>) -> Result<Self> {
        let lap = laplacian_symbol(&grid);
        let (table, zero_policy) = match kind {
            MultiplierKind::Laplacian => (lap, None),
            MultiplierKind::Fractional { s } => {
                validate_fractional(s)?;
                (lap.into_iter().map(|m| m.powf(s)).collect(), None)
            }
            MultiplierKind::Riesz { alpha } => {
                validate_riesz(grid.dim(), alpha)?;
                let zero = policy.resolve(&grid, alpha);
                let mut t: Vec<T> = lap.into_iter().map(|m| m.powf(-alpha / T::of(2.0))).collect();
                t[0] = zero;
                (t, Some(policy))
            }
        };
        Self::from_parts(grid, kind, zero_policy, table)
    }

    /// Wraps an explicit table. Entries must be finite and nonnegative.
    pub fn from_parts(
        grid: GridSpec<T>,
        kind: MultiplierKind<T>,
        zero_policy: Option<ZeroModePolicy<T>>,
        table: Vec<T>,
    ) -> Result<Self> {
        if table.len() != grid.len() {
            return Err(Error::GridMismatch(format!("table has {} entries for {grid}", table.len())));
        }
        if let Some(bad) = table.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::param("table", format!("entry {bad} is negative or non-finite")));
        }
        Ok(Self { grid, kind, zero_policy, table })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn kind(&self) -> MultiplierKind<T> {
        self.kind
    }

    pub fn zero_policy(&self) -> Option<ZeroModePolicy<T>> {
        self.zero_policy
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn zero_mode(&self) -> T {
        self.table[0]
    }

    /// Symbol at signed frequency tuple `k`.
    pub fn at(&self, k: &[i64]) -> T {
        let mut idx = [0usize; 3];
        for a in 0..self.grid.dim() {
            idx[a] = self.grid.wavenumber_index(k[a]);
        }
        self.table[self.grid.ravel(&idx)]
    }

    /// Writes `k_1,…,k_n,symbol` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.grid.dim();
        let header: Vec<String> = (1..=n).map(|a| format!("k{a}")).chain(["symbol".into()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (flat, v) in self.table.iter().enumerate() {
            let idx = self.grid.unravel(flat);
            let ks: Vec<String> = idx[..n].iter().map(|&j| self.grid.wavenumber(j).to_string()).collect();
            writeln!(out, "{},{:e}", ks.join(","), v)?;
        }
        Ok(())
    }
}

/// `F^{-1}[m(ξ) û(ξ)]`.
pub fn apply_multiplier<T: Real>(spectral: &Spectral<T>, u: &Field<T>, cache: &MultiplierCache<T>) -> Result<Field<T>> {
    spectral.grid().check_same(u.grid())?;
    spectral.grid().check_same(cache.grid())?;
    Ok(spectral.apply_symbol(u, |i| cache.table[i]))
}

/// `I_α * f` through the Riesz multiplier (default zero-mode policy).
pub fn riesz_convolve<T: Real>(spectral: &Spectral<T>, f: &Field<T>, alpha: T) -> Result<Field<T>> {
    let cache = MultiplierCache::build(*spectral.grid(), MultiplierKind::Riesz { alpha })?;
    apply_multiplier(spectral, f, &cache)
}

/// Spectral form of the Gagliardo seminorm, `Σ_{ξ≠0} |2πξ|^{2s} |û|² / V`.
pub fn frac_seminorm_sq<T: Real>(spectral: &Spectral<T>, u: &Field<T>, s: T) -> Result<T> {
    validate_fractional(s)?;
    spectral.grid().check_same(u.grid())?;
    let lap = laplacian_symbol(spectral.grid());
    Ok(spectral.quadratic_form(u, |i| if i == 0 { T::zero() } else { lap[i].powf(s) }))
}

/// `‖∇u‖₂² = Σ |2πξ|² |û|² / V`.
pub fn grad_norm_sq<T: Real>(spectral: &Spectral<T>, u: &Field<T>) -> Result<T> {
    spectral.grid().check_same(u.grid())?;
    let lap = laplacian_symbol(spectral.grid());
    Ok(spectral.quadratic_form(u, |i| lap[i]))
}

/// Symbol of `-Δ + λ(-Δ)^s` in storage order.
pub fn mixed_symbol<T: Real>(grid: &GridSpec<T>, lambda: T, s: T) -> Result<Vec<T>> {
    validate_fractional(s)?;
    if !(lambda >= T::zero()) {
        return Err(Error::param("lambda", format!("mixing weight must be nonnegative, got {lambda}")));
    }
    Ok(laplacian_symbol(grid).into_iter().map(|m| m + lambda * m.powf(s)).collect())
}

/// `𝓛u = -Δu + λ(-Δ)^s u`.
pub fn mixed_apply<T: Real>(spectral: &Spectral<T>, u: &Field<T>, lambda: T, s: T) -> Result<Field<T>> {
    spectral.grid().check_same(u.grid())?;
    let sym = mixed_symbol(spectral.grid(), lambda, s)?;
    Ok(spectral.apply_symbol(u, |i| sym[i]))
}

/// Solves `(1 + dt·c) w + dt·𝓛 w = rhs` by diagonal division.
pub fn implicit_solve<T: Real>(
    spectral: &Spectral<T>,
    rhs: &Field<T>,
    dt: T,
    lambda: T,
    s: T,
    shift: T,
) -> Result<Field<T>> {
    if !(dt >= T::zero()) {
        return Err(Error::param("dt", format!("step must be nonnegative, got {dt}")));
    }
    if !(shift >= T::zero()) {
        return Err(Error::param("c", format!("stabilization shift must be nonnegative, got {shift}")));
    }
    spectral.grid().check_same(rhs.grid())?;
    let sym = mixed_symbol(spectral.grid(), lambda, s)?;
    Ok(spectral.apply_symbol(rhs, |i| T::one() / (T::one() + dt * (shift + sym[i]))))
}

/// Periodic convolution with the kernel whose transform is `cache`'s table,
/// by explicit summation in physical space. `O(N^{2n})`; correctness oracle
/// for [`apply_multiplier`].
pub fn direct_convolve_oracle<T: Real>(f: &Field<T>, cache: &MultiplierCache<T>) -> Result<Field<T>> {
    let grid = *cache.grid();
    grid.check_same(f.grid())?;
    let total = grid.len();
    if total > ORACLE_CAP {
        return Err(Error::OracleTooLarge { points: total, cap: ORACLE_CAP });
    }
    let kernel = kernel_by_summation(cache);
    let n = grid.points();
    let dim = grid.dim();
    let h = grid.cell_volume();
    let mut out = vec![T::zero(); total];
    for (i, slot) in out.iter_mut().enumerate() {
        let xi = grid.unravel(i);
        let mut acc = T::zero();
        for (j, &fj) in f.values().iter().enumerate() {
            let xj = grid.unravel(j);
            let mut d = [0usize; 3];
            for a in 0..dim {
                d[a] = (xi[a] + n - xj[a]) % n;
            }
            acc = acc + fj * kernel[grid.ravel(&d)];
        }
        *slot = h * acc;
    }
    Field::from_values(grid, out)
}

/// `K(x_d) = V^{-1} Σ_k m_k cos(2π k·d / N)` for lattice displacement `d`.
fn kernel_by_summation<T: Real>(cache: &MultiplierCache<T>) -> Vec<T> {
    let grid = *cache.grid();
    let n = grid.points();
    let dim = grid.dim();
    let two_pi_over_n = T::of(2.0) * T::PI() / T::of(n as f64);
    let inv_v = T::one() / grid.volume();
    (0..grid.len())
        .map(|d_flat| {
            let d = grid.unravel(d_flat);
            let mut acc = T::zero();
            for (k_flat, &m) in cache.table().iter().enumerate() {
                let kj = grid.unravel(k_flat);
                let phase = (0..dim).fold(0i64, |p, a| p + grid.wavenumber(kj[a]) * d[a] as i64);
                acc = acc + m * (two_pi_over_n * T::of(phase.rem_euclid(n as i64) as f64)).cos();
            }
            acc * inv_v
        })
        .collect()
}
