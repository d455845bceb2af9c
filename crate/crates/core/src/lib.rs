//! Calibration toolkit for the Heston and Bates stochastic-volatility models.
//!
//! Exact prices come from a Fourier-cosine expansion of the risk-neutral
//! density ([`cos`]) and are converted to Black-Scholes implied volatilities
//! ([`bs_iv`]). Those feed a Latin-hypercube training set ([`datagen`]) for a
//! multilayer-perceptron surrogate ([`nnet`]). Calibration ([`calibrate`])
//! minimizes a weighted implied-volatility objective with differential
//! evolution ([`de`]) against either backend.

pub mod bs_iv;
pub mod calibrate;
pub mod cos;
pub mod datagen;
pub mod de;
pub mod error;
pub mod models;
pub mod nnet;
pub mod sampling;

pub use error::{Error, Result};
