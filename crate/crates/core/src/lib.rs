//! Emotion and influence modelling for image-sharing social networks.
//!
//! A time-varying network of users, friendships and uploaded images is turned
//! into a factor graph whose variables are image emotions, per-slice user
//! emotions and directed influence indicators. Parameters are learned by
//! alternating MAP decoding with gradient ascent on the log-likelihood, and
//! inference runs loopy belief propagation.

pub mod analysis;
pub mod error;
pub mod features;
pub mod graph;
pub mod inference;
pub mod learning;
pub mod network;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision parameter set.
pub type Params = graph::ParameterSet<f64>;
/// Single-precision parameter set.
pub type ParamsF32 = graph::ParameterSet<f32>;
/// Double-precision factor graph.
pub type Graph = graph::FactorGraph<f64>;
/// Single-precision factor graph.
pub type GraphF32 = graph::FactorGraph<f32>;
/// Double-precision marginals.
pub type Marginals = inference::MarginalTable<f64>;
