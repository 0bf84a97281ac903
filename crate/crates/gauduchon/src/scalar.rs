//! Real scalar abstraction for the grid-based modules.
//!
//! Everything FFT-backed is generic over [`Real`]; the crate root exports
//! `f64` aliases which are what the CLI and the shipped examples use.

use num_traits::Float;
use rustfft::FftNum;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar usable as the base field of grid functions and forms.
///
/// `FftNum` restricts this to `f32`/`f64` in practice.
pub trait Real: Float + FftNum + Sum + Display + Debug {
    /// Shorthand for lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        num_traits::NumCast::from(x).expect("f64 literal converts to scalar")
    }

    /// Lossy conversion to `f64` (used for reporting and serialization).
    fn as_f64(self) -> f64 {
        num_traits::NumCast::from(self).expect("scalar converts to f64")
    }

    const TAU: Self;
}

impl Real for f32 {
    const TAU: Self = std::f32::consts::TAU;
}

impl Real for f64 {
    const TAU: Self = std::f64::consts::TAU;
}
