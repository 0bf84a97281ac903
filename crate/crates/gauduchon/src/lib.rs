//! Computation of the `γ_k` invariant of hermitian metrics and of
//! generalized (k-th) Gauduchon metrics.
//!
//! Two engines are provided:
//!
//! * a spectral engine on complex tori: periodic grids ([`grid`]), complex
//!   exterior algebra with grid coefficients ([`forms`]), hermitian metric
//!   operators ([`metric`]) and the continuity-method semilinear solver
//!   ([`solver`]);
//! * an exact constant-coefficient coframe engine ([`coframe`]) for invariant
//!   examples such as the Iwasawa manifold and `S⁵×S¹`.
//!
//! The explicit examples live in [`catalog`].

pub mod catalog;
pub mod coframe;
pub mod forms;
pub mod grid;
pub mod metric;
pub mod scalar;
pub mod solver;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular volume form at grid index {index} (coords {coords:?})")]
    SingularVolume { index: usize, coords: Vec<f64> },
    #[error("field is not real: sup |Im| = {imag:.3e} exceeds tolerance {tol:.3e}")]
    NotReal { imag: f64, tol: f64 },
    #[error("metric is not positive definite: eigenvalue floor {floor:.3e}")]
    NotPositive { floor: f64 },
    #[error("structure equations are not integrable for generator `{generator}`: {detail}")]
    Integrability { generator: String, detail: String },
    #[error("form is not invariant: {0}")]
    NotInvariant(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use scalar::Real;

/// Concrete `f64` aliases; the CLI and all shipped examples use these.
pub type GridShape = grid::GridShape;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type Form64 = forms::Form<f64>;
pub type HermitianMetric64 = metric::HermitianMetric<f64>;
pub type OneFormPair64 = metric::OneFormPair<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;
pub type PsiFunction64 = solver::PsiFunction<f64>;
pub type SolveOptions64 = solver::SolveOptions<f64>;
