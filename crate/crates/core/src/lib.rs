//! Truth inference for crowdsourced single-choice labeling.
//!
//! The central model ties each annotation to the worker's ability and the
//! task's difficulty: the chance of a correct answer is
//! `d / k + (1 - d) * e^d`. [`inference::run_wtim`] alternates label
//! posteriors, per-task error rates and difficulty-weighted worker
//! accuracies until the estimates settle. Five classic aggregators live in
//! [`baselines`], a crowd simulator and budgeted task assignment in
//! [`sim`], file formats in [`io`], and a benchmark harness in [`mod@bench`].
//!
//! Numeric routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod scalar;
pub mod sim;

pub use dataset::{Annotation, Dataset};
pub use error::{Error, Result};
pub use inference::{InferenceConfig, InitMethod, LabelUpdate};
pub use model::LabelId;
pub use scalar::Scalar;

pub type Ability64 = model::Ability<f64>;
pub type Ability32 = model::Ability<f32>;
pub type Difficulty64 = model::Difficulty<f64>;
pub type Difficulty32 = model::Difficulty<f32>;
pub type Confidence64 = model::Confidence<f64>;
pub type Confidence32 = model::Confidence<f32>;
pub type LabelPosterior64 = inference::LabelPosterior<f64>;
pub type LabelPosterior32 = inference::LabelPosterior<f32>;
pub type InferenceState64 = inference::InferenceState<f64>;
pub type InferenceState32 = inference::InferenceState<f32>;
pub type ConfusionMatrix64 = baselines::ConfusionMatrix<f64>;
pub type GladParams64 = baselines::GladParams<f64>;
