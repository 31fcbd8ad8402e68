//! Recurrent networks augmented with a mixture layer.
//!
//! A mixture layer keeps a latent matrix whose columns are prototype
//! vectors. At every step the previous hidden state is compared with each
//! prototype, the similarities are turned into soft cluster assignments by
//! a softmax, and the weighted prototype combination is fed into every gate
//! of the cell. Prototypes can also be allocated per prior-knowledge bucket.
//!
//! The crate carries its own small reverse-mode differentiation engine
//! ([`tape`]), the mixture layer and its probabilistic oracles
//! ([`mixture`]), plain and augmented cells ([`cells`]), an Adam training
//! loop ([`train`]), datasets and metrics ([`data`], [`metrics`]), and an
//! experiment runner with checkpoints ([`experiment`], [`checkpoint`]).

pub mod cells;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mixture;
pub mod model;
pub mod tape;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use tape::{grad_check, grad_check_many, OpKind, Tape, Var};
pub use tensor::{Shape, Tensor};
