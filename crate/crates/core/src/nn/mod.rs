//! Minimal feed-forward network substrate shared by the denoiser and the
//! value networks: tanh MLPs with analytic gradients and Adam.
//!
//! Training math is `f64`; checkpoints store `f32`.

mod adam;
pub mod checkpoint;
mod embed;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use embed::{time_embed, TIME_EMBED_BASE};
pub use mlp::{Gradients, Layer, NetworkParams, SharedSide, Trace};
