//! Dense f64 tensors and a reverse-mode tape.
//!
//! [`Tensor`] is a plain value (shape + row-major data). Gradient tracking
//! lives on a [`Tape`]: values enter the tape as constants, leaves or
//! borrowed parameters, every recorded op keeps a backward rule, and
//! [`Tape::backward`] produces a [`Gradients`] map keyed by [`Var`].

mod array;
pub mod checkpoint;
mod gemm;
pub mod optim;
mod tape;

pub use array::Tensor;
pub use gemm::{gemm, Trans};
pub use optim::{Adam, AdamConfig, RowOptimizer, RowStep, Sgd};
pub use tape::{sigmoid, Gradients, LinearMap, Tape, Var};
