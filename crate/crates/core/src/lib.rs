//! Finite permutation models of measure-preserving systems and their
//! Birkhoff ergodic means.
//!
//! Observables and means are generic over [`Scalar`]: `f64`, `f32` or the
//! exact [`Rational64`](num_rational::Rational64). Point coordinates are
//! always `f64`.

pub mod ergodic;
pub mod error;
pub mod functions;
pub mod mapping;
pub mod measure;
pub mod scalar;
pub mod space;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::{Accumulator, Scalar};
pub use space::{
    cycle_decompose, global_average, orbit_average, CycleDecomposition, Embedding, FiniteSystem,
    MetricKind, Observable, Permutation, RealMetric, Words,
};

pub use num_rational::Rational64;

pub type Observable64 = Observable<f64>;
pub type Observable32 = Observable<f32>;
pub type ObservableQ = Observable<Rational64>;
pub type Means64 = ergodic::ErgodicMeans<f64>;
pub type Means32 = ergodic::ErgodicMeans<f32>;
pub type MeansQ = ergodic::ErgodicMeans<Rational64>;
pub type MeanProfile64 = ergodic::MeanProfile<f64>;
