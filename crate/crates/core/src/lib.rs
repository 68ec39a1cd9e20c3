//! Tensor engine, temporal shift attention networks and their training.
//!
//! Tensors are dense, row-major and channels-last (`T×H×W×C`). All kernels
//! are generic over `f32` and `f64`; models run in `f32` and the `f64` path
//! exists for gradient checking.

pub mod autodiff;
pub mod error;
pub mod model;
pub mod ops;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod tsm;
pub mod vtf;

pub use error::{Error, Result};
pub use model::{
    build_model, forward, Arch, ForwardOutput, ModelSpec, ShiftPolicy, WeightSet, WindowInput,
};
pub use tensor::{Scalar, Tensor, VideoClip};
