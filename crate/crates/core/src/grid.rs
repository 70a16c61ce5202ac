//! Periodic computational box, grid functions and their spectra.
//!
//! The box is `[-L/2, L/2)^n` sampled at `N` points per axis, origin-centred so
//! lattice index `N/2` sits at `x = 0`. Values are stored row-major (last axis
//! fastest). Spectra use the continuum convention
//! `û(ξ) = ∫ u(x) e^{-2πi x·ξ} dx`, approximated by `h^n Σ u_j e^{-2πi x_j·ξ}`
//! at the lattice frequencies `ξ = k / L`, `k ∈ {-N/2, …, N/2-1}^n`.

use std::fmt;
use std::sync::Arc;

use log::warn;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Smallest admissible resolution per axis.
pub const MIN_POINTS: usize = 8;

/// Threshold below which a seed Gaussian counts as decayed at the boundary.
pub const DECAY_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    dim: usize,
    points: usize,
    length: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(dim: usize, points: usize, length: T) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N must be power of two, got {points}")));
        }
        if points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!("N must be at least {MIN_POINTS}, got {points}")));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, points, length })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.length / T::of(self.points as f64)
    }

    /// Cell volume `(L/N)^n`.
    #[inline]
    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    #[inline]
    pub fn volume(&self) -> T {
        self.length.powi(self.dim as i32)
    }

    /// Total number of lattice points `N^n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinate of lattice index `j` along any axis.
    #[inline]
    pub fn coord(&self, j: usize) -> T {
        T::of(j as f64 - (self.points / 2) as f64) * self.spacing()
    }

    /// Signed integer frequency stored at FFT-order index `j`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// FFT-order storage index of signed frequency `k`.
    #[inline]
    pub fn wavenumber_index(&self, k: i64) -> usize {
        k.rem_euclid(self.points as i64) as usize
    }

    /// Multi-index of a flat position; unused trailing axes are zero.
    #[inline]
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    #[inline]
    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// `|ξ|²` at every spectral slot, in storage order.
    pub fn frequency_sq_table(&self) -> Vec<T> {
        let inv_l = T::one() / self.length;
        (0..self.len())
            .map(|flat| {
                let idx = self.unravel(flat);
                idx[..self.dim]
                    .iter()
                    .map(|&j| {
                        let xi = T::of(self.wavenumber(j) as f64) * inv_l;
                        xi * xi
                    })
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.length == other.length
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self} vs {other}")))
        }
    }
}

impl<T: Real> fmt::Display for GridSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GridSpec{{n={}, N={}, L={}}}", self.dim, self.points, self.length)
    }
}

/// Real grid function with cell-volume-weighted norms.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self { grid, values: vec![T::zero(); grid.len()] }
    }

    pub fn constant(grid: GridSpec<T>, c: T) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values for {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at flat index {pos}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: GridSpec<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Samples `f` at every lattice point; `f` receives the coordinate tuple.
    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(&[T]) -> T) -> Result<Self> {
        let mut x = [T::zero(); 3];
        let values = (0..grid.len())
            .map(|flat| {
                let idx = grid.unravel(flat);
                for a in 0..grid.dim() {
                    x[a] = grid.coord(idx[a]);
                }
                f(&x[..grid.dim()])
            })
            .collect();
        Self::from_values(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Squared radius `|x|²` at each lattice point.
    pub fn radius_sq(grid: GridSpec<T>) -> Self {
        Self::from_fn(grid, |x| x.iter().fold(T::zero(), |a, &b| a + b * b)).expect("finite")
    }

    /// `H(u) = ‖u‖₂² = h^n Σ u²`.
    pub fn mass(&self) -> T {
        self.grid.cell_volume() * self.values.iter().map(|&v| v * v).sum::<T>()
    }

    pub fn inner(&self, other: &Self) -> T {
        debug_assert!(self.grid.same_as(&other.grid));
        self.grid.cell_volume()
            * self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum::<T>()
    }

    pub fn norm(&self) -> T {
        self.mass().sqrt()
    }

    /// `‖u‖_t = (h^n Σ |u|^t)^{1/t}` for any `t > 0`.
    pub fn lp_norm(&self, t: T) -> T {
        let s: T = self.values.iter().map(|&v| num_traits::Float::abs(v).powf(t)).sum();
        (self.grid.cell_volume() * s).powf(T::one() / t)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| m.max(num_traits::Float::abs(v)))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_values_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(self.grid.same_as(&other.grid));
        Self::from_values_unchecked(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Rescales to mass `tau`. Fails on the zero field.
    pub fn normalized_to(&self, tau: T) -> Result<Self> {
        let h = self.mass();
        if !(h > T::zero()) {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled((tau / h).sqrt()))
    }

    /// Value at the origin-centred lattice point (index `N/2` on every axis).
    pub fn at_origin(&self) -> T {
        let mid = [self.grid.points() / 2; 3];
        self.values[self.grid.ravel(&mid)]
    }
}

/// Spectrum of a real field, stored in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    grid: GridSpec<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(grid: GridSpec<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Coefficient at signed integer frequency tuple `k`.
    pub fn at(&self, k: &[i64]) -> Complex<T> {
        let mut idx = [0usize; 3];
        for a in 0..self.grid.dim() {
            idx[a] = self.grid.wavenumber_index(k[a]);
        }
        self.coeffs[self.grid.ravel(&idx)]
    }

    /// `(1/V) Σ_k |û_k|²`, equal to `‖u‖₂²` by Parseval.
    pub fn energy(&self) -> T {
        self.weighted_energy(|_| T::one())
    }

    /// `(1/V) Σ_k w(slot) |û_k|²` where `w` receives the storage slot.
    pub fn weighted_energy(&self, w: impl Fn(usize) -> T) -> T {
        let s: T = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| w(i) * c.norm_sqr())
            .sum();
        s / self.grid.volume()
    }

    /// Largest violation of `û(-k) = conj(û(k))`, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> T {
        let g = self.grid;
        let mut scale = T::zero();
        let mut defect = T::zero();
        for flat in 0..g.len() {
            let idx = g.unravel(flat);
            let mut neg = [0usize; 3];
            for a in 0..g.dim() {
                neg[a] = (g.points() - idx[a]) % g.points();
            }
            let c = self.coeffs[flat];
            let d = self.coeffs[g.ravel(&neg)].conj();
            scale = scale.max(c.norm());
            defect = defect.max((c - d).norm());
        }
        if scale > T::zero() {
            defect / scale
        } else {
            T::zero()
        }
    }
}

/// FFT plans for one grid. Cheap to clone; shareable across threads.
#[derive(Clone)]
pub struct Spectral<T: Real> {
    grid: GridSpec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(grid: GridSpec<T>) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points());
        let inverse = planner.plan_fft_inverse(grid.points());
        Self { grid, forward, inverse }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Unnormalized n-D DFT in place (storage order in, storage order out).
    pub(crate) fn dft_in_place(&self, data: &mut [Complex<T>], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let n = self.grid.points();
        let dim = self.grid.dim();
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        // Last axis is contiguous.
        fft.process_with_scratch(data, &mut scratch);
        if dim == 1 {
            return;
        }
        let total = data.len();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); total];
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let outer = total / (n * stride);
            let mut line = 0;
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * n * stride + i;
                    for m in 0..n {
                        buf[line * n + m] = data[base + m * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            let mut line = 0;
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * n * stride + i;
                    for m in 0..n {
                        data[base + m * stride] = buf[line * n + m];
                    }
                    line += 1;
                }
            }
        }
    }

    /// `(-1)^{Σ j_a}`: phase of the origin shift at storage slot `flat`.
    #[inline]
    fn shift_sign(&self, flat: usize) -> T {
        let idx = self.grid.unravel(flat);
        let parity = idx[..self.grid.dim()].iter().sum::<usize>() % 2;
        if parity == 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn transform(&self, field: &Field<T>) -> Result<SpectralField<T>> {
        self.grid.check_same(field.grid())?;
        let mut data: Vec<Complex<T>> =
            field.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.dft_in_place(&mut data, false);
        let h = self.grid.cell_volume();
        for (flat, c) in data.iter_mut().enumerate() {
            *c = *c * (h * self.shift_sign(flat));
        }
        SpectralField::new(self.grid, data)
    }

    /// Inverse of [`Spectral::transform`]; discards the (roundoff) imaginary part.
    pub fn inverse_transform(&self, spec: &SpectralField<T>) -> Result<Field<T>> {
        self.grid.check_same(spec.grid())?;
        let h = self.grid.cell_volume();
        let norm = T::one() / (h * T::of(self.grid.len() as f64));
        let mut data: Vec<Complex<T>> = spec
            .coeffs()
            .iter()
            .enumerate()
            .map(|(flat, &c)| c * (norm * self.shift_sign(flat)))
            .collect();
        self.dft_in_place(&mut data, true);
        Field::from_values(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    /// Applies a real diagonal symbol (indexed by storage slot) to a field.
    pub(crate) fn apply_symbol(&self, field: &Field<T>, symbol: impl Fn(usize) -> T) -> Field<T> {
        let mut data: Vec<Complex<T>> =
            field.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.dft_in_place(&mut data, false);
        let norm = T::one() / T::of(self.grid.len() as f64);
        for (flat, c) in data.iter_mut().enumerate() {
            *c = *c * (symbol(flat) * norm);
        }
        self.dft_in_place(&mut data, true);
        Field::from_values_unchecked(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    /// `(1/V) Σ w(slot)|û|²` without materializing a [`SpectralField`].
    pub(crate) fn quadratic_form(&self, field: &Field<T>, symbol: impl Fn(usize) -> T) -> T {
        self.transform(field)
            .expect("grid checked by caller")
            .weighted_energy(symbol)
    }
}

/// `c · exp(-a |x|²)` on the lattice.
pub fn sample_gaussian<T: Real>(grid: GridSpec<T>, a: T, c: T) -> Result<Field<T>> {
    if !(a > T::zero()) {
        return Err(Error::param("a", format!("Gaussian width must be positive, got {a}")));
    }
    let half = grid.length() / T::of(2.0);
    let edge = (-a * half * half).exp();
    if edge > T::of(DECAY_THRESHOLD) {
        warn!("Gaussian exp(-a(L/2)^2) = {edge:e} at the box edge exceeds {DECAY_THRESHOLD:e}; box too small for decay");
    }
    Field::from_fn(grid, |x| {
        let r2 = x.iter().fold(T::zero(), |acc, &v| acc + v * v);
        c * (-a * r2).exp()
    })
}

/// Quality indicators for a resampled field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResampleDiagnostics<T> {
    /// Fraction of spectral energy pushed beyond the Nyquist frequency.
    pub nyquist_spill: T,
    /// Largest boundary value relative to the field maximum.
    pub boundary_ratio: T,
}

/// Mass-preserving dilation `u_K(x) = K^{n/2} u(Kx)` by band-limited interpolation.
pub fn fourier_interpolate<T: Real>(spectral: &Spectral<T>, field: &Field<T>, k: T) -> Result<Field<T>> {
    let amp = k.powf(T::of(field.grid().dim() as f64) / T::of(2.0));
    let (out, diag) = resample_with_diagnostics(spectral, field, k, amp)?;
    report_diagnostics(&diag);
    Ok(out)
}

/// `amplitude · u(factor · x)` by band-limited interpolation; samples that fall
/// outside the box are treated as zero (the field is taken to be decayed there).
pub fn resample<T: Real>(spectral: &Spectral<T>, field: &Field<T>, factor: T, amplitude: T) -> Result<Field<T>> {
    let (out, diag) = resample_with_diagnostics(spectral, field, factor, amplitude)?;
    report_diagnostics(&diag);
    Ok(out)
}

fn report_diagnostics<T: Real>(diag: &ResampleDiagnostics<T>) {
    if diag.nyquist_spill > T::of(1e-10) {
        warn!("dilation pushes {:e} of the spectral energy past Nyquist", diag.nyquist_spill);
    }
    if diag.boundary_ratio > T::of(1e-6) {
        warn!("dilated field does not decay inside the box (edge/max = {:e})", diag.boundary_ratio);
    }
}

pub fn resample_with_diagnostics<T: Real>(
    spectral: &Spectral<T>,
    field: &Field<T>,
    factor: T,
    amplitude: T,
) -> Result<(Field<T>, ResampleDiagnostics<T>)> {
    let grid = *spectral.grid();
    grid.check_same(field.grid())?;
    if !(factor > T::zero()) || !factor.is_finite() {
        return Err(Error::param("K", format!("dilation factor must be positive, got {factor}")));
    }
    let nyquist_spill = {
        let spec = spectral.transform(field)?;
        let total = spec.energy();
        let half = T::of((grid.points() / 2) as f64);
        let spilled = spec.weighted_energy(|flat| {
            let idx = grid.unravel(flat);
            let kmax = idx[..grid.dim()]
                .iter()
                .map(|&j| num_traits::Float::abs(T::of(grid.wavenumber(j) as f64)))
                .fold(T::zero(), |a: T, b| a.max(b));
            if kmax * factor > half {
                T::one()
            } else {
                T::zero()
            }
        });
        if total > T::zero() {
            spilled / total
        } else {
            T::zero()
        }
    };

    let matrix = interpolation_matrix(&grid, factor);
    let n = grid.points();
    let mut data = field.values().to_vec();
    let total = data.len();
    let mut line_in = vec![T::zero(); n];
    for axis in 0..grid.dim() {
        let stride = n.pow((grid.dim() - 1 - axis) as u32);
        let outer = total / (n * stride);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for m in 0..n {
                    line_in[m] = data[base + m * stride];
                }
                for r in 0..n {
                    let row = &matrix[r * n..(r + 1) * n];
                    data[base + r * stride] =
                        row.iter().zip(&line_in).map(|(&w, &v)| w * v).sum::<T>();
                }
            }
        }
    }
    for v in data.iter_mut() {
        *v = *v * amplitude;
    }
    let out = Field::from_values(grid, data)?;
    let boundary_ratio = boundary_ratio(&out);
    Ok((out, ResampleDiagnostics { nyquist_spill, boundary_ratio }))
}

/// Row `r` maps samples to the band-limited interpolant at `factor · x_r`.
fn interpolation_matrix<T: Real>(grid: &GridSpec<T>, factor: T) -> Vec<T> {
    let n = grid.points();
    let l = grid.length();
    let half_l = l / T::of(2.0);
    let two_pi = T::PI() + T::PI();
    let nyq = n / 2;
    let mut m = vec![T::zero(); n * n];
    for r in 0..n {
        let y = factor * grid.coord(r);
        if y < -half_l || y >= half_l {
            continue;
        }
        for j in 0..n {
            let t = y - grid.coord(j);
            let mut acc = T::one();
            for k in 1..nyq {
                acc = acc + T::of(2.0) * (two_pi * T::of(k as f64) * t / l).cos();
            }
            acc = acc + (T::PI() * T::of(n as f64) * t / l).cos();
            m[r * n + j] = acc / T::of(n as f64);
        }
    }
    m
}

/// Largest |value| on the box faces relative to the global maximum.
pub fn boundary_ratio<T: Real>(field: &Field<T>) -> T {
    let g = field.grid();
    let max = field.max_abs();
    if max == T::zero() {
        return T::zero();
    }
    let edge = field
        .values()
        .iter()
        .enumerate()
        .filter(|(flat, _)| g.unravel(*flat)[..g.dim()].iter().any(|&j| j == 0))
        .fold(T::zero(), |m, (_, &v)| m.max(num_traits::Float::abs(v)));
    edge / max
}
