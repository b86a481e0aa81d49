//! Community structure of credit spread correlation matrices and
//! multi-factor portfolio default-risk simulation.
//!
//! The pipeline runs from raw spread panels ([`timeseries`]) through
//! random-matrix filtering of the correlation spectrum ([`spectra`]),
//! modularity-based community detection on the filtered matrix
//! ([`community`]) and partition comparison ([`partition_analysis`]), to
//! factor-model calibration ([`factor_model`]) and Monte Carlo loss
//! quantiles ([`risk_engine`]).

pub mod community;
pub mod error;
pub mod factor_model;
pub mod matrix_io;
pub mod normal;
pub mod partition_analysis;
pub mod risk_engine;
pub mod rng;
pub mod spectra;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
