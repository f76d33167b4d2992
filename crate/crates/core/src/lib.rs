//! Multi-scale discriminant saliency from wavelet-domain hidden Markov trees.

pub mod cli;
pub mod error;
pub mod eval;
pub mod hmt;
pub mod image_io;
pub mod inference;
pub mod labeltree;
pub mod metrics;
pub mod output;
pub mod saliency;
pub mod tree;
pub mod wavelet;

pub use error::{Error, Result};
