//! Acoustic indices for field recordings and hierarchical Bayesian models of
//! disturbance effects on soundscapes.
//!
//! The pipeline runs in stages that hand off through files:
//! [`spectral`] and [`indices`] turn WAV recordings into index tables,
//! [`dataset`] groups recordings into repeated-measures individuals and builds
//! design matrices, [`gibbs`] fits the univariate and multivariate mixed
//! models, and [`posterior`] summarizes draws and computes WAIC.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gibbs;
pub mod indices;
pub mod posterior;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
