//! Tied speaker/session factor autoencoders for end-to-end speaker verification.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every numeric piece of the
//! pipeline: the network with tied-factor layers and its hand-derived backward pass,
//! the two-step trainer, the linear-regression output head with its closed-form
//! estimators, speaker enrollment, likelihood-ratio scoring and detection metrics,
//! plus a synthetic corpus generator. File formats and the command line live in the
//! companion `tiedfactor` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adaptation;
mod error;
pub mod head;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod trainer;

pub use adaptation::{AdaptMethod, SpeakerModel, StatsFactors, UbmModel};
pub use error::{Error, Result};
pub use head::{PosteriorParams, RegressionHead, SufficientStats};
pub use linalg::Matrix;
pub use metrics::{CostParams, ScoreSet};
pub use network::{
    Activation, AdamState, Architecture, DropoutMask, GradientBundle, LayerSpec, NetworkParams,
};
pub use rng::Rng;
pub use scoring::{Label, ScoreConfig, Trial, TrialScore};
pub use synth::{SynthConfig, SynthCorpus, Utterance};
pub use trainer::{Dataset, LatentFactors, TrainConfig, TrainOutput};
