//! Numerical core for curriculum-scheduled data-free knowledge distillation.
//!
//! Everything here is a pure function over slices of `f64`: closed-form
//! self-paced weights and their latent objective, the adversarial coefficient
//! scheduler, the divergences used by the generator and student objectives
//! (with analytic gradients), and the fidelity metrics. No IO, no threads.
#![no_std]
// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod divergence;
pub mod error;
pub mod gen_loss;
pub mod logits;
mod math;
pub mod metrics;
pub mod norm_stats;
pub mod schedule;
pub mod spl;

pub use error::{Error, Result};
pub use logits::{argmax, Logits};
