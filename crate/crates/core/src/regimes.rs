//! Critical exponents, the regime partition of the `p`-axis, explicit
//! coupling thresholds and the nonexistence identities at the two critical
//! exponents.
//!
//! Boundaries are computed in any [`ExponentScalar`]: floating point compares
//! with a relative tolerance of `1e-12`, [`Ratio<i64>`] compares exactly.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::functionals::{EnergyBreakdown, ProblemParams};
use crate::{Error, Real, Result};

/// Relative tolerance for floating-point boundary ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Scalar in which regime boundaries can be evaluated and compared.
pub trait ExponentScalar:
    Copy
    + PartialOrd
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_int(v: i64) -> Self;
    /// Equality as used for boundary ties.
    fn ties(self, other: Self) -> bool;
    fn approx_f64(self) -> f64;
}

macro_rules! float_exponent {
    ($t:ty) => {
        impl ExponentScalar for $t {
            fn from_int(v: i64) -> Self {
                v as $t
            }
            fn ties(self, other: Self) -> bool {
                let scale = self.abs().max(other.abs());
                let tol = (TIE_TOLERANCE as $t).max(4.0 * <$t>::EPSILON);
                (self - other).abs() <= tol * scale
            }
            fn approx_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

float_exponent!(f64);
float_exponent!(f32);

impl ExponentScalar for Ratio<i64> {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(v)
    }
    fn ties(self, other: Self) -> bool {
        self == other
    }
    fn approx_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents<E> {
    /// `(n+α)/n`
    pub lower: E,
    /// `(2s+n+α)/n`
    pub s_upper: E,
    /// `(2+n+α)/n`
    pub l2_critical: E,
    /// `(n+α)/(n−2)`, only for `n ≥ 3`
    pub hls_upper: Option<E>,
}

impl<E: ExponentScalar> CriticalExponents<E> {
    /// Requires `0 < α < n` and `0 < s ≤ 1`.
    pub fn new(n: usize, alpha: E, s: E) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::param("n", format!("dimension must be 1, 2 or 3, got {n}")));
        }
        let zero = E::from_int(0);
        let one = E::from_int(1);
        let nn = E::from_int(n as i64);
        if !(alpha > zero && alpha < nn) {
            return Err(Error::param("alpha", format!("Riesz order must lie in (0, {n}), got {alpha}")));
        }
        if !(s > zero && s <= one) {
            return Err(Error::param("s", format!("fractional order must lie in (0, 1], got {s}")));
        }
        let two = E::from_int(2);
        Ok(Self {
            lower: (nn + alpha) / nn,
            s_upper: (two * s + nn + alpha) / nn,
            l2_critical: (two + nn + alpha) / nn,
            hls_upper: (n >= 3).then(|| (nn + alpha) / (nn - two)),
        })
    }

    /// Partitions `p ≥ lower`; ties go to the critical labels.
    pub fn classify(&self, p: E) -> Result<RegimeLabel> {
        if p.ties(self.lower) {
            return Ok(RegimeLabel::LowerCritical);
        }
        if p.ties(self.l2_critical) {
            return Ok(RegimeLabel::L2Critical);
        }
        if let Some(h) = self.hls_upper {
            if p.ties(h) {
                return Ok(RegimeLabel::HLSCritical);
            }
        }
        if p < self.lower {
            let hi = self.hls_upper.map_or(f64::INFINITY, |h| h.approx_f64());
            return Err(Error::ExponentOutOfRange { p: p.approx_f64(), lo: self.lower.approx_f64(), hi });
        }
        if p < self.s_upper && !p.ties(self.s_upper) {
            return Ok(RegimeLabel::ExistenceWindow);
        }
        if p < self.l2_critical {
            return Ok(RegimeLabel::BoundedBelowOpen);
        }
        match self.hls_upper {
            Some(h) if p > h => Ok(RegimeLabel::Supercritical),
            _ => Ok(RegimeLabel::UnboundedBelow),
        }
    }

    pub fn to_f64(&self) -> CriticalExponents<f64> {
        CriticalExponents {
            lower: self.lower.approx_f64(),
            s_upper: self.s_upper.approx_f64(),
            l2_critical: self.l2_critical.approx_f64(),
            hls_upper: self.hls_upper.map(|h| h.approx_f64()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    LowerCritical,
    ExistenceWindow,
    BoundedBelowOpen,
    L2Critical,
    UnboundedBelow,
    HLSCritical,
    Supercritical,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 7] = [
        RegimeLabel::LowerCritical,
        RegimeLabel::ExistenceWindow,
        RegimeLabel::BoundedBelowOpen,
        RegimeLabel::L2Critical,
        RegimeLabel::UnboundedBelow,
        RegimeLabel::HLSCritical,
        RegimeLabel::Supercritical,
    ];

    /// Position along the `p`-axis.
    pub fn rank(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).unwrap_or(0)
    }

    pub fn description(self) -> &'static str {
        match self {
            RegimeLabel::LowerCritical => "lower-critical exponent: no nontrivial solution",
            RegimeLabel::ExistenceWindow => "existence window: constrained minimizer expected",
            RegimeLabel::BoundedBelowOpen => "bounded below, existence open",
            RegimeLabel::L2Critical => "mass-critical exponent",
            RegimeLabel::UnboundedBelow => "unbounded-below regime",
            RegimeLabel::HLSCritical => "upper-critical exponent: no nontrivial solution",
            RegimeLabel::Supercritical => "beyond the upper-critical exponent",
        }
    }

    pub fn is_nonexistence(self) -> bool {
        matches!(self, RegimeLabel::LowerCritical | RegimeLabel::HLSCritical)
    }

    /// Whether the free energy is unbounded below along mass-preserving dilations.
    pub fn is_unbounded(self) -> bool {
        matches!(self, RegimeLabel::UnboundedBelow | RegimeLabel::HLSCritical | RegimeLabel::Supercritical)
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeLabel::LowerCritical => "LowerCritical",
            RegimeLabel::ExistenceWindow => "ExistenceWindow",
            RegimeLabel::BoundedBelowOpen => "BoundedBelowOpen",
            RegimeLabel::L2Critical => "L2Critical",
            RegimeLabel::UnboundedBelow => "UnboundedBelow",
            RegimeLabel::HLSCritical => "HLSCritical",
            RegimeLabel::Supercritical => "Supercritical",
        };
        f.write_str(s)
    }
}

/// Floating-point classification of a parameter tuple.
pub fn classify<T: Real>(params: &ProblemParams<T>) -> Result<RegimeLabel> {
    CriticalExponents::new(params.n, params.alpha, params.s)?.classify(params.p)
}

/// Exact classification for rational `(α, s, p)`.
pub fn classify_exact(n: usize, alpha: Ratio<i64>, s: Ratio<i64>, p: Ratio<i64>) -> Result<RegimeLabel> {
    CriticalExponents::new(n, alpha, s)?.classify(p)
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

/// `μ_* = (2+n+α) / (2n·C·τ^{(α+2)/n})`.
pub fn mu_star_l2critical<T: Real>(n: usize, alpha: T, tau: T, c_np: T) -> Result<T> {
    positive("tau", tau)?;
    positive("C_np", c_np)?;
    let nf = T::of(n as f64);
    let two = T::of(2.0);
    Ok((two + nf + alpha) / (two * nf * c_np * tau.powf((alpha + two) / nf)))
}

/// `μ^* = p·τ^{1−p} / (C·b^{b/2})` with `b = n+α+2−np`; requires `b > 0`.
pub fn mu_star_equivalence<T: Real>(n: usize, alpha: T, p: T, tau: T, c_np: T) -> Result<T> {
    positive("tau", tau)?;
    positive("C_np", c_np)?;
    let nf = T::of(n as f64);
    let two = T::of(2.0);
    let b = nf + alpha + two - nf * p;
    if !(b > T::zero()) {
        return Err(Error::ExponentOutOfRange {
            p: p.to_f64_lossy(),
            lo: 1.0,
            hi: ((nf + alpha + two) / nf).to_f64_lossy(),
        });
    }
    Ok(p * tau.powf(T::one() - p) / (c_np * b.powf(b / two)))
}

/// The two sides of the identity a solution would have to satisfy at a
/// critical exponent, with their signs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contradiction<T> {
    pub regime: RegimeLabel,
    pub identity: String,
    pub lhs: T,
    pub rhs: T,
    pub lhs_sign: i8,
    pub rhs_sign: i8,
    /// Both signs nonzero and different.
    pub strictly_opposite: bool,
}

fn sign<T: Real>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else if v < T::zero() {
        -1
    } else {
        0
    }
}

/// Evaluates the critical-exponent identity on a field's energies.
///
/// At `p = (n+α)/n` subtracting `n/2` times the Nehari identity from the
/// Pohozaev identity leaves `‖∇u‖² = −sλ[u]²`; at `p = (n+α)/(n−2)` the
/// analogous combination leaves `−‖u‖² = (1−s)λ[u]²`.
pub fn nonexistence_contradiction<T: Real>(
    breakdown: &EnergyBreakdown<T>,
    params: &ProblemParams<T>,
) -> Result<Contradiction<T>> {
    let regime = classify(params)?;
    let (identity, lhs, rhs) = match regime {
        RegimeLabel::LowerCritical => (
            "grad = -s*lambda*semi",
            breakdown.grad,
            -params.s * params.lambda * breakdown.semi,
        ),
        RegimeLabel::HLSCritical => (
            "-H = (1-s)*lambda*semi",
            -breakdown.mass,
            (T::one() - params.s) * params.lambda * breakdown.semi,
        ),
        other => return Err(Error::NotCritical(other.to_string())),
    };
    let (ls, rs) = (sign(lhs), sign(rhs));
    Ok(Contradiction {
        regime,
        identity: identity.to_string(),
        lhs,
        rhs,
        lhs_sign: ls,
        rhs_sign: rs,
        strictly_opposite: ls != 0 && rs != 0 && ls != rs,
    })
}

/// Parses `"a/b"`, `"a"` or a terminating decimal such as `"1.8"` exactly.
pub fn parse_rational(text: &str) -> Result<Ratio<i64>> {
    let t = text.trim();
    let bad = || Error::param("p", format!("cannot read {t:?} as an exact rational"));
    if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(a, b));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.trim_start().starts_with('-');
        let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10i64.pow(frac.len() as u32);
        let num: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = if neg { -num } else { num };
        return Ok(Ratio::new(whole * den + num, den));
    }
    t.parse::<i64>().map(Ratio::from_integer).map_err(|_| bad())
}

/// Float value of a rational, for passing into the numerical core.
pub fn ratio_to_float<T: Real>(r: Ratio<i64>) -> T {
    T::of(*r.numer() as f64) / T::of(*r.denom() as f64)
}
