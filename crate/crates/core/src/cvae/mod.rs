//! Conditional VAE that refines coarse feedback into channel samples.
//!
//! The encoder sees `[h, ĥ, η]` and is only needed for training; the
//! decoder maps `[ĥ, z, η]` to a channel direction. Networks are dense
//! stacks of FC, batch-norm, ReLU and residual layers with hand-written
//! backward passes.

pub mod io;
pub mod layers;
pub mod model;
pub mod train;

pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use layers::{BatchNorm, Init, Layer, LayerStack, Linear, Mode};
pub use model::{
    cosine_similarity, kl_divergence, reparameterize, Architecture, CqiScaler, CvaeModel, GaussianLatent, LossTerms,
    TrainingRecord, Variant,
};
pub use train::{train_cvae, train_model, Adam, TrainHistory, TrainHyper};
