//! Forward and backward kernels. Backward functions take the forward input
//! (or output, where cheaper) and the output gradient and return the input
//! gradient plus any parameter gradients.

pub mod act;
pub mod conv;
pub mod dense;
pub mod pad;
pub mod pool;

pub use act::{
    relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, softplus, softplus_backward, softplus_scalar,
};
pub use conv::{conv, conv_backward, upconv2x2, upconv2x2_backward, ParamGrads};
pub use dense::{concat, concat_backward, dense, dense_backward};
pub use pad::{crop, crop_backward, pad, pad_backward, PadMode, Padding};
pub use pool::{avgpool2x2, avgpool2x2_backward, maxpool2x2, maxpool2x2_backward};
