//! A small reverse-mode automatic differentiation engine over `f64` tensors:
//! convolution, activations, resampling, the robust flow loss, Adam, and a
//! finite-difference gradient checker.

mod gradcheck;
mod kernels;
mod loss;
mod ops;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{gradient_check, relative_error, GradCheckOptions, GradCheckReport, GradMismatch};
pub use loss::{robust_loss, LossConfig, LossTarget};
pub use ops::{
    add, avgpool2x, concat_channels, conv2d, crop, leaky_relu, robust_penalty, scale, sum_squares, upsample2x,
    weighted_sum,
};
pub use optim::{adam_step, he_uniform, Adam, AdamConfig, AdamState};
pub use tape::{CustomOp, LossNorm, Tape, Var};
pub use tensor::Tensor;
