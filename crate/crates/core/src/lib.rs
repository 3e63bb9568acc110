//! Particle multi-Bernoulli mixture (MBM) multi-target tracking.
//!
//! The crate provides the particle MBM filter with Gibbs-sampled hypothesis
//! truncation, an SMC-PHD baseline, a range-bearing simulation harness with a
//! seeded Monte-Carlo benchmark, and the OSPA metric.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the common instantiations.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod error;
pub mod estimation;
pub mod gibbs;
pub mod io;
pub mod mbm;
pub mod models;
pub mod ospa;
pub mod phd;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod state;
pub mod tracker;
pub mod weights;

pub use density::{Association, BernoulliComponent, GlobalHypothesis, MbmDensity, Particle, ParticleCloud};
pub use error::{Error, Result};
pub use estimation::{FilterParams, StateEstimate};
pub use gibbs::{CostMatrix, GibbsConfig};
pub use models::ModelSet;
pub use scalar::Scalar;
pub use state::{Measurement, State};

pub type State64 = State<f64>;
pub type State32 = State<f32>;
pub type Measurement64 = Measurement<f64>;
pub type Measurement32 = Measurement<f32>;
pub type Particle64 = Particle<f64>;
pub type ParticleCloud64 = ParticleCloud<f64>;
pub type BernoulliComponent64 = BernoulliComponent<f64>;
pub type BernoulliComponent32 = BernoulliComponent<f32>;
pub type MbmDensity64 = MbmDensity<f64>;
pub type MbmDensity32 = MbmDensity<f32>;
pub type ModelSet64 = ModelSet<f64>;
pub type ModelSet32 = ModelSet<f32>;
