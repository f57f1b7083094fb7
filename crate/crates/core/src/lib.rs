//! Learning the random variables of Monte Carlo estimators.
//!
//! The draws that a Monte Carlo, multilevel Monte Carlo or multilevel Picard
//! estimator would consume are turned into trainable parameters `θ` and fitted
//! with stochastic gradient descent so the resulting network `Ψ(p, θ)`
//! approximates a parametric expectation `u(p)` across a parameter box.

pub mod autodiff;
pub mod clock;
pub mod config;
pub mod domain;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod mcnet;
pub mod models;
pub mod normal;
pub mod optim;
pub mod par;
pub mod rng;
pub mod sobol;
mod sobol_table;
pub mod stats;
pub mod trainer;

pub use domain::{region_check, ParameterDomain, ParameterPoint};
pub use error::{LrvError, Result};
pub use rng::RngStream;
pub use sobol::SobolSequence;
