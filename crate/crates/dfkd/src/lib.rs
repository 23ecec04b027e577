// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod distill;
pub mod error;
pub mod generation;
pub mod harness;
pub mod models;
pub mod nn;
pub mod rng;
pub mod teacher;
