//! Desk-scale laboratory for encoder-space unlearning of image-to-image
//! generative models.
//!
//! The crate trains small masked-reconstruction encoder-decoder models on a
//! procedural shape dataset, removes the influence of a designated forget set
//! by steering the encoder, and evaluates the result with Fréchet-distance,
//! inception-score and embedding-similarity analogs computed from an in-repo
//! probe classifier. A `theory` module numerically verifies the information
//! bounds the method rests on.

pub mod datasets;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod theory;
pub mod transforms;
pub mod unlearning;

pub use error::{Error, Result};
