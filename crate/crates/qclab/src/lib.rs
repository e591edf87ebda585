//! Numerical laboratory for doubling measures and the monotone mappings they generate.
//!
//! The crate builds the kernel mapping obtained by integrating the unit-vector
//! kernel against a measure, estimates the constants in the inequalities that
//! govern it (monotonicity angle, quasisymmetry modulus, doubling and isotropic
//! doubling ratios), and constructs the lacunary trigonometric weights and the
//! staircase curve used to probe singular and non-invariant behaviour.
//!
//! Everything is deterministic: randomized checks derive all their samples from
//! a caller-supplied 64-bit seed, and quadrature is controlled by an explicit
//! [`quad::QuadratureConfig`].

pub mod anchor;
pub mod checkers;
pub mod dd;
pub mod geom;
pub mod mapping;
pub mod measure;
pub mod quad;
pub mod region;
pub mod report;
pub mod sample;
pub mod singular;
pub mod staircase;

use std::fmt::Debug;

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive};

/// Scalar abstraction for the geometric kernel quantities: `f32`, `f64`, or
/// any other IEEE-style float exposed through `num-traits`.
pub trait Real:
    Float + FloatConst + FromPrimitive + std::ops::AddAssign + Debug + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + std::ops::AddAssign
        + Debug
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Canonical scalar used by the quadrature and checker layers.
pub type Scalar = f64;

/// Point in dimension 1, 2, or 3 at the canonical scalar type.
pub type Point = geom::Point<Scalar>;

pub use geom::TriangleStats;
pub use measure::MeasureSpec;
pub use quad::QuadratureConfig;
pub use region::{OrientedBox, Region, Rotation};
pub use report::{CheckReport, Verdict};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate triple: two of the points are closer than {threshold:e}")]
    DegenerateTriple { threshold: f64 },
    #[error("measure is not locally integrable on the requested region (exponent {p} in dimension {n})")]
    NonIntegrable { p: f64, n: usize },
    #[error("refinement budget exhausted: best estimate {estimate:e} with error bound {err:e}")]
    BudgetExceeded { estimate: f64, err: f64 },
    #[error("measure fails the decay requirement needed by the kernel map")]
    DecayViolated,
    #[error("sampled region carries zero mass")]
    ZeroMass,
    #[error("every sampled pair was degenerate (constant map?)")]
    AllPairsDegenerate,
    #[error("map identified two distinct points: {0}")]
    InjectivityViolation(String),
    #[error("anchor set needs at least two points")]
    SetTooSmall,
    #[error("extended-precision budget exceeded while reducing a phase")]
    PrecisionLoss,
    #[error("frequency index out of the supported exact range: {0}")]
    FrequencyOverflow(String),
    #[error("invalid input: {0}")]
    BadInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
