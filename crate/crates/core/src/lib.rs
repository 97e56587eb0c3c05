//! Momentum pseudo-labeling (MPL) for CTC sequence models at desk scale.
//!
//! The crate bundles log-space CTC kernels with a brute-force oracle, a small
//! context-window MLP with exact gradients, Adam with a Noam schedule,
//! feature masking, the MPL training algorithm alongside PL/IPL baselines, a
//! synthetic corpus generator with domain shift, error-rate metrics, and an
//! experiment harness that drives everything from JSON configs.

mod binio;

pub mod augment;
pub mod checkpoint;
pub mod ctc;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod mpl;
pub mod optim;

pub use ctc::{
    best_path_decode, brute_force_log_prob, ctc_log_prob, ctc_loss_and_grad, LogPosteriorGrid, TokenSequence,
};
pub use data::{generate_corpus, Corpus, CorpusSpec, Split};
pub use error::{Error, Result};
pub use harness::{run, ExperimentConfig, Mode, Summary};
pub use model::{forward, init_params, loss_and_gradient, Architecture, ParamVector};
pub use mpl::{derive_alpha, ema_update, generate_pseudo_label, OfflineUpdate, TrainConfig};
