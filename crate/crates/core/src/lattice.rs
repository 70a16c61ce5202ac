//! Ewald-split lattice sums for the periodic Riesz kernel.
//!
//! The periodic kernel with symbol `|2πξ|^{-α}` on `ξ ≠ 0` and value `m0` at
//! `ξ = 0` differs from the free-space kernel `A|x|^{α-n}` by a function that
//! is smooth at the origin. [`matched_zero_mode`] returns the `m0` for which
//! that difference vanishes at `x = 0`.
//!
//! Splitting `|x|^{-β} = Γ(β/2)^{-1} ∫_0^∞ t^{β/2-1} e^{-t|x|²} dt` at `t = η`
//! gives a short-range part `S(r) = A r^{-β} Q(β/2, ηr²)` summed in real space
//! and a long-range part with symbol `|2πξ|^{-α} Q(α/2, π²|ξ|²/η)` summed in
//! frequency space (`Q` is the regularized upper incomplete gamma function,
//! `β = n - α`).

use statrs::function::gamma::{gamma, gamma_ur};

/// Images per axis on each side; both sums decay like `exp(-π m²)`.
const IMAGES: i64 = 8;

pub(crate) fn riesz_constant(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    gamma((n - alpha) / 2.0) / (std::f64::consts::PI.powf(n / 2.0) * 2f64.powf(alpha) * gamma(alpha / 2.0))
}

pub(crate) fn matched_zero_mode(dim: usize, length: f64, alpha: f64) -> f64 {
    use std::f64::consts::PI;
    let n = dim as f64;
    let beta = n - alpha;
    let volume = length.powi(dim as i32);
    let eta = PI / (length * length);
    let a = riesz_constant(dim, alpha);

    let short_hat_zero = 2f64.powf(-alpha) * eta.powf(-alpha / 2.0) / gamma(alpha / 2.0 + 1.0);
    let long_at_origin = a * eta.powf(beta / 2.0) / gamma(beta / 2.0 + 1.0);

    let mut recip = 0.0;
    let mut real = 0.0;
    for_each_offset(dim, |m| {
        let m2 = m.iter().map(|&v| (v * v) as f64).sum::<f64>();
        if m2 == 0.0 {
            return;
        }
        let xi2 = m2 / (length * length);
        recip += (4.0 * PI * PI * xi2).powf(-alpha / 2.0) * gamma_ur(alpha / 2.0, PI * PI * xi2 / eta);
        let r2 = m2 * length * length;
        real += a * r2.powf(-beta / 2.0) * gamma_ur(beta / 2.0, eta * r2);
    });

    short_hat_zero + volume * long_at_origin - recip - volume * real
}

fn for_each_offset(dim: usize, mut f: impl FnMut(&[i64])) {
    let mut m = [0i64; 3];
    let span = (2 * IMAGES + 1) as usize;
    for flat in 0..span.pow(dim as u32) {
        let mut rest = flat;
        for slot in m.iter_mut().take(dim) {
            *slot = (rest % span) as i64 - IMAGES;
            rest /= span;
        }
        f(&m[..dim]);
    }
}
