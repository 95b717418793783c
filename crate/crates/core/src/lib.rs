//! Heston pricing and calibration with a deep differential network surrogate.
//!
//! The crate is organised bottom-up:
//!
//! * [`heston`] prices European calls and puts by Fourier quadrature and
//!   produces finite-difference sensitivities to the five model parameters.
//! * [`dataset`] draws Latin-hypercube training inputs, labels them with the
//!   pricer, and handles min-max scaling and persistence.
//! * [`ddn`] is the network itself: forward pass, input gradient
//!   (differentiation layer), double backpropagation and Adam training.
//! * [`calibration`] fits the Heston parameters to quotes, either with
//!   multistart Adam on the network or multistart Nelder-Mead on the pricer.
//! * [`config`] bundles every tunable in one key-value document.

pub mod calibration;
pub mod config;
pub mod dataset;
pub mod ddn;
mod binio;
mod error;
pub mod heston;
mod rng;

pub use error::{Error, Result};
