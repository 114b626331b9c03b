//! Nested partially-latent class models for case-control multivariate
//! binary data.
//!
//! The crate covers the probability model, prior elicitation, a blocked Gibbs
//! sampler with stick-breaking truncation, convergence diagnostics, posterior
//! predictive checking, data simulation and replication studies, and the
//! large-sample behaviour of a misspecified locally independent model.

pub mod asymptotics;
pub mod checking;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod math;
pub mod model;
pub mod prior;
pub mod rng;
pub mod simulation;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use gibbs::{run, Draw, PosteriorSamples, SamplerConfig};
pub use model::{
    BetaGrid, BetaPrior, BinaryMatrix, Dataset, GammaPrior, HyperPriors, LatentState, ModelParams,
    Population, RateMatrix,
};
pub use prior::{beta_from_quantiles, ElicitedRange};
pub use simulation::{ScenarioName, ScenarioSpec};
