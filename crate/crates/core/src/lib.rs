//! Deterministic simulator of proximal over-the-air federated learning.
//!
//! Clients solve a proximal surrogate of their local loss with a few epochs of
//! SGD, precode their model updates and transmit them simultaneously over an
//! analog multiple-access channel. The server receives the noisy superposition
//! and decodes a new global model. The crate covers the whole pipeline:
//!
//! - [`datagen`]: synthetic Gaussian-cluster datasets, label-skew partitioning
//!   across clients and CSV ingestion.
//! - [`model`]: multiclass logistic and MLP losses, the proximal objective, the
//!   mini-batch SGD local solver and inexactness measurements.
//! - [`channel`]: precoding factor, encoding with and without fading inversion,
//!   AWGN superposition and the decoding rules.
//! - [`protocol`]: round orchestration, stragglers, participation regimes and
//!   the baseline variants expressed as configurations.
//! - [`diagnostics`]: global gradient norms, gradient-dissimilarity envelopes,
//!   precoding-bound checks and convergence-rate fits.
//! - [`harness`]: config files, sweeps, channel verification and plot data.
//!
//! Every run is a pure function of its configuration and master seed.

pub mod channel;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod params;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
pub use params::ParamVector;
