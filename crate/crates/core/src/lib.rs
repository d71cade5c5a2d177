//! Belief tracking for condition/event nets whose marking is uncertain.
//!
//! An observer's knowledge is a distribution over markings. [`dense::Dist`]
//! stores it explicitly; [`mbn::Mbn`] stores it as a modular Bayesian
//! network that [`update`] keeps factored while transitions are attempted.
//!
//! Numeric types are generic over [`Scalar`] and default to `f64`; the
//! `*F32` aliases below select single precision.

pub mod dense;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod matrix;
pub mod mbn;
pub mod net;
pub mod scalar;
pub mod update;

pub use dense::{Dist, DistJson};
pub use error::{Error, Result};
pub use graph::{CausalityGraph, Generator, GraphConstant, NodeId, NodeQueryKind, Wire};
pub use matrix::{Classification, MatrixJson, MatrixKind, StochMatrix};
pub use mbn::{Mbn, MbnJson, MbnNode, ObnCertificate, ObnFailure};
pub use update::{Belief, NormalizationReport, UpdateStrategy};
pub use net::{EnabledStatus, FireOutcome, Marking, Net, NetJson, Observation, TieBreak, Transition};
pub use scalar::{Scalar, EPS_CLASS, EPS_NORM, ZERO_MASS};

pub type DistF64 = Dist<f64>;
pub type DistF32 = Dist<f32>;
pub type MatrixF64 = StochMatrix<f64>;
pub type MatrixF32 = StochMatrix<f32>;
pub type MbnF64 = Mbn<f64>;
pub type MbnF32 = Mbn<f32>;
