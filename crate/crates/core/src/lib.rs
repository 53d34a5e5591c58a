//! Randomized all-pass pulse design and acoustic system analysis.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allpass;
pub mod analyzer;
pub mod augment;
pub mod bands;
pub mod design;
pub mod error;
pub mod fft;
pub mod io;
pub mod scalar;
pub mod sequence;
pub mod shape;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Unit = design::UnitCapricep<f64>;
pub type Unit32 = design::UnitCapricep<f32>;
pub type Cascade = allpass::CascadeResponse<f64>;
pub type Cascade32 = allpass::CascadeResponse<f32>;
pub type Sequences = sequence::SequenceSet<f64>;
pub type Sequences32 = sequence::SequenceSet<f32>;
pub type Decomposition = analyzer::DecompositionResult<f64>;
pub type Decomposition32 = analyzer::DecompositionResult<f32>;
