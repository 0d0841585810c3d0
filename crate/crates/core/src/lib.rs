pub mod classic;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcam;
pub mod image;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
mod rng;

pub use error::{Error, Result};
