//! Dense f64 kernels with hand-written backward passes.
//!
//! Every forward op has a matching `*_backward` that maps the gradient of
//! the op's output to gradients of its inputs. Reductions run sequentially in
//! a fixed order, so results are bit-reproducible for fixed inputs.

mod gradcheck;
mod matrix;
pub mod ops;
pub mod real;
pub mod segment;

pub use gradcheck::{
    grad_check, grad_check_piecewise, numeric_gradient, relative_error, GradCheckConfig, GradCheckReport,
};
pub use matrix::Matrix;
pub use real::{DoubleDouble, Real};
pub use segment::SegmentIndex;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("index out of range in {op}: {detail}")]
    IndexOutOfRange { op: &'static str, detail: String },
    #[error("non-finite value {value} while evaluating coordinate {coordinate}")]
    NonFinite { coordinate: usize, value: f64 },
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}
