//! Unified framework for content-based neural news recommendation.
//!
//! Eight recommender architectures (NPA, NAML, NRMS, LSTUR-ini/con,
//! CenNewsRec, MINS, DKN, CAUM) share one data pipeline, one evaluation
//! protocol, and one parameter-accounting scheme, and can each be run
//! under two orthogonal switches:
//!
//! * **click-behavior fusion** — *early* (a dedicated user encoder builds
//!   a user embedding, then one dot product against the candidate) or
//!   *late* (mean of per-click dot products; a parameterless user model);
//! * **training objective** — cross-entropy over one positive and `K`
//!   sampled negatives, or a temperature-scaled supervised contrastive
//!   loss.
//!
//! Everything runs on a small reverse-mode autodiff core ([`tensor`])
//! and is deterministic given a seed. See the `examples/` directory for
//! one runnable program per capability and the `newsrec` binary for the
//! `train` / `evaluate` / `sweep` / `report` command line.

pub mod data;
pub mod error;
pub mod fusion;
pub mod model;
pub mod news;
pub mod objectives;
pub mod metrics;
pub mod params;
pub mod runner;
pub mod tensor;
pub mod user;

pub use error::{Error, Result};
pub use model::{FusionMode, Model, ModelConfig, ModelVariant, VocabSizes};
pub use tensor::{Scalar, Tensor};
