//! Mixed Monte Carlo / PDE pricing of FX options under a four-factor
//! Heston model with CIR domestic and foreign short rates.
//!
//! The variance and both rates are simulated with a full-truncation Euler
//! scheme; conditional on those paths the spot is log-normal, so European
//! payoffs are priced in closed form and barrier payoffs with a
//! Crank-Nicolson solve.

pub mod baseline;
pub mod conditional;
pub mod error;
pub mod estimators;
pub mod model;
pub mod paths;
pub mod pde;
pub mod rng;
pub mod special;
pub mod theory;
pub mod variance;

pub use error::{Error, Result};
pub use estimators::{estimate, variance_report, EstimatorResult, Method, SimulationSettings, VarianceReport};
pub use model::{
    cholesky_coefficients, CholeskyFactors, Contract, CorrelationMatrix, ModelParams, OptionType, TimeGrid,
    ValidatedModel,
};
pub use paths::FactorPaths;
pub use pde::PdeSettings;
pub use theory::{full_report, ExtReal, TheoryReport};
