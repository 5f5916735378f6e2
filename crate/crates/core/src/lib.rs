//! Dyadic tube/square incidence laboratory.
//!
//! The crate models δ-discretized squares, tubes and intervals on a dyadic
//! grid and provides exact incidence counting, non-concentration checkers,
//! uniformization and multiscale decompositions, random augmentation, the
//! two-ends refinement, high-low Fourier splitting, additive energy and
//! Fourier moments, and a set of extremal configurations.
//!
//! Numeric code that admits it is generic over [`Scalar`]; the aliases below
//! fix the common instantiations.

pub mod augment;
pub mod constructions;
pub mod energy;
pub mod error;
pub mod exact;
pub mod fft;
pub mod grid;
pub mod highlow;
pub mod incidence;
pub mod multiscale;
pub mod scalar;
pub mod sets;
pub mod two_ends;

pub use error::{LabError, Result};
pub use grid::{incident, AnyFamily, Cell, Family, Interval, Kind, Scale, Square, Tube};
pub use scalar::Scalar;

/// Exact rational scalar used by every decision procedure.
pub type Rational = num_rational::Ratio<i128>;

pub type LipschitzFnQ = multiscale::LipschitzFn<Rational>;
pub type LipschitzFn64 = multiscale::LipschitzFn<f64>;
pub type LipschitzFn32 = multiscale::LipschitzFn<f32>;
pub type ScalePartitionQ = multiscale::ScalePartition<Rational>;
pub type ScalePartition64 = multiscale::ScalePartition<f64>;
pub type GridFunction64 = highlow::GridFunction<f64>;
pub type GridFunction32 = highlow::GridFunction<f32>;
