//! Dense f64 tensors, reverse-mode differentiation over a fixed operator
//! set, a symmetric eigensolver with PSD matrix root, and seeded sampling.
//!
//! Everything downstream (models, metrics, theory checks) is built on this
//! module. All computation is 64-bit and single-threaded per tape, so any
//! seeded run is bit-reproducible.

mod linalg;
mod rng;
mod tape;
mod tensor;

pub use linalg::{sqrtm_psd, sym_eig};
pub use rng::{CovarianceSpec, Rng};
pub use tape::{Gradients, OpKind, Tape, Var};
pub use tensor::Tensor;
