//! Pseudospectral ground states of the mixed local-nonlocal Choquard equation
//!
//! ```text
//! -Δu + λ(-Δ)^s u + u = μ (I_α * |u|^p) |u|^{p-2} u,   ‖u‖₂² = τ
//! ```
//!
//! on a truncated periodic box, together with the energy, Nehari and
//! Pohozaev machinery used to check computed states, the critical-exponent
//! regime map, and evaluators for the Hardy-Littlewood-Sobolev and
//! Gagliardo-Nirenberg constants.
//!
//! All numerics are generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the aliases at the crate root fix the common `f64` choice.
//! Regime boundaries can additionally be compared in exact rational
//! arithmetic (see [`regimes`]).

pub mod error;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod operators;
pub mod regimes;
pub mod solver;
pub mod verify;

mod lattice;

use std::fmt::{Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{Error, Result};
pub use functionals::{EnergyBreakdown, Model, ProblemParams, Residual};
pub use grid::{Field, GridSpec, SpectralField, Spectral};
pub use operators::{MultiplierCache, MultiplierKind, ZeroModePolicy};
pub use regimes::{CriticalExponents, RegimeLabel};
pub use solver::{SolveReport, SolverOptions};

/// Version string embedded in every serialized artifact.
pub const VERSION: &str = concat!("choquard ", env!("CARGO_PKG_VERSION"));

/// Floating-point scalar the numerical core is generic over.
pub trait Real:
    Float
    + FloatConst
    + FftNum
    + Default
    + Display
    + LowerExp
    + Sum
    + Serialize
    + DeserializeOwned
    + regimes::ExponentScalar
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn of(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
    /// Machine epsilon scaled into a practical "roundoff" tolerance.
    fn roundoff() -> Self;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn roundoff() -> Self {
        1e-13
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    fn roundoff() -> Self {
        1e-5
    }
}

pub type Grid = GridSpec<f64>;
pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Params = ProblemParams<f64>;
pub type Model64 = Model<f64>;
pub type Breakdown = EnergyBreakdown<f64>;
pub type Report = SolveReport<f64>;
pub type Options = SolverOptions<f64>;
