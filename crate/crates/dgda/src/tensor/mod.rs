//! Dense 2-D real matrices with recorded reverse-mode differentiation.
//!
//! Everything downstream (graph encoders, losses, the trainer) runs on
//! [`Tensor`] values recorded on a [`Tape`]. Matrices are row-major `f64`;
//! graphs in this crate are small enough that dense kernels are the right
//! trade-off.

mod gradcheck;
mod matrix;
mod optim;
mod tape;

pub use gradcheck::grad_check;
pub use matrix::Tensor;
pub(crate) use matrix::sigmoid as sigmoid_scalar;
pub use optim::{Optimizer, OptimizerKind};
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

/// Errors raised by tensor construction, tape ops, and the gradient checker.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch, {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("tensor data length {len} does not match shape {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, len: usize },
    #[error("log: non-positive entry {value} at ({row},{col})")]
    LogDomain { value: f64, row: usize, col: usize },
    #[error("{0}: empty tensor")]
    Empty(&'static str),
    #[error("backward: root must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("grad_check: step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("{0}: non-finite value encountered")]
    NonFinite(&'static str),
    #[error("concat_cols: part {index} has {got} rows, expected {expected}")]
    RowCountMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
}

pub type Result<T> = std::result::Result<T, TensorError>;
