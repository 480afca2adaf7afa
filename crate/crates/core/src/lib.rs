// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod attention_map;
pub mod dataset;
pub mod eval_saliency;
pub mod features;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod sal2lit;
pub mod split;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
