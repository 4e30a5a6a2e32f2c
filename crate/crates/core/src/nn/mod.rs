//! A small deterministic neural-network core: tensors, the layer set of a
//! DCGAN-style generator and discriminator with hand-written backward
//! passes, Adam, and finite-difference gradient checks.

pub mod adam;
pub mod conv;
pub mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod sequential;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, layer_grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use layers::{ConvAlgo, Context, Layer, LayerSpec, Mode, Param};
pub use sequential::{HasParams, Sequential};
pub use tensor::Tensor;
