//! Conditional denoising diffusion over fixed-length vectors (footstep
//! plans, or toy 1-D data): cosine schedule, ε-prediction training, ancestral
//! sampling with per-chain random streams, classifier and classifier-free
//! guidance.

pub mod checkpoint;
mod model;
mod sample;
mod schedule;
mod train;

pub use model::{CondEmbedding, Denoiser, DenoiserSpec, NoisySample, Normalizer};
pub use sample::{cfg_combine, GuidanceObjective, GuidanceSpec, LinearObjective, SampleOptions, DEFAULT_X0_CLIP};
pub use schedule::{NoiseSchedule, BETA_CLIP, COSINE_OFFSET};
pub use train::{draw_training_noise, epsilon_loss, DiffusionTrainer, CFG_DROPOUT};
