//! Simulation and debiasing toolkit for topic-level preference elicitation.
//!
//! Preference-elicitation logs are sparse and self-selected, so observed
//! user-topic ratings are missing not at random. This crate provides:
//!
//! - generators for fully-synthetic user-topic preferences with a tunable
//!   positivity-biased observation mechanism ([`synth`]);
//! - a simulator that converts item-level rating datasets into topic-level
//!   elicitation data via bipartite-graph embeddings and Gaussian-mixture
//!   topic discovery ([`topics`], [`pe`]);
//! - naive, inverse-propensity-scored, and self-normalized loss estimators,
//!   plus matrix-factorization and exposure-model trainers ([`estimators`]);
//! - an evaluation and experiment harness with cross-validation, unbiased
//!   test metrics, and paired significance testing ([`eval`], [`experiment`]).
//!
//! Everything is deterministic per seed: one master seed yields byte-stable
//! outputs regardless of worker count.

pub mod error;
pub mod estimators;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod pe;
pub mod seeding;
pub mod synth;
pub mod topics;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    FactorModel, FullPreferenceMatrix, IdIndex, Interaction, InteractionTable, Predictor,
    PropensityModel, TopicAssignment, TopicDataset, TopicInteraction, TopicInteractionTable,
    DEFAULT_RHO_MIN,
};
