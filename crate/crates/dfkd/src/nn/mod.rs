//! A small CPU neural-network engine: sequential networks of conv, linear,
//! batch-norm, pooling and activation layers with hand-written backward
//! passes. Generic over `f32` (training) and `f64` (gradient checks).

mod layer;
mod network;
mod optim;
mod tensor;

pub use layer::{Dims, LayerSpec};
pub use network::{BackwardOpts, Mode, Network};
pub use optim::{Adam, AdamConfig};
pub use tensor::{Real, Tensor};
