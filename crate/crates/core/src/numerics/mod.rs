//! Dense linear algebra, activations, seeded randomness and Adam.

mod activation;
mod adam;
mod dd;
mod dense;
mod rng;
mod scalar;

pub(crate) use activation::softmax_into;
pub use activation::{sigmoid, softmax, tanh};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use dd::Dd;
pub use dense::{add_assign, axpy, dot, squared_distance, DenseMatrix, DenseVector};
pub use rng::Rng;
pub use scalar::Scalar;
