//! Item cluster-wise multi-objective training (ICMT) for long-tail
//! recommendation.
//!
//! The crate covers the whole pipeline: interaction loading and splitting
//! ([`data`]), base recommenders with a disentangled popularity embedding
//! ([`model`]), popularity-correlation item clustering ([`cluster`]), the
//! Frank-Wolfe min-norm solver for Pareto-efficient cluster weights
//! ([`pareto`]), analytic gradients ([`lossgrad`]), the training loop and
//! baselines ([`trainer`]) and long-tail ranking metrics ([`metrics`]).

pub mod cli;
pub mod cluster;
pub mod data;
pub mod error;
pub mod lossgrad;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pareto;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
