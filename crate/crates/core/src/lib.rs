//! Query representation learning from search click logs.

pub mod classify;
pub mod clicklog;
pub mod cosets;
pub mod encoder;
mod error;
pub mod eval;
pub mod labeling;
pub mod losses;
pub mod pipeline;
mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision encoder used by the pipeline and the CLI.
pub type Encoder = encoder::EncoderParams<f64>;
pub type Encoder32 = encoder::EncoderParams<f32>;
pub type Head = classify::ClassifierHead<f64>;
pub type Head32 = classify::ClassifierHead<f32>;
pub type EmbeddedSet = losses::EmbeddedSet<f64>;
pub type TrainedClassifier = classify::TrainedClassifier<f64>;
