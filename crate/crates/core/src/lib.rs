//! Autoencoders for short block codes, built from spline-parameterized
//! Kolmogorov-Arnold layers or plain MLP layers, trained end-to-end through a
//! noisy channel.
//!
//! The toolkit covers the full pipeline:
//!
//! * [`splines`] — uniform B-spline bases on extended knot vectors, plus
//!   least-squares grid refits when the activation domain drifts;
//! * [`network`] — KAN / MLP / symbolic layers, forward + hand-derived
//!   backward passes, Adam, and magnitude-based pruning;
//! * [`autoencoder`] — (n, k) encoder/decoder pairs with average-power
//!   normalization and maximum-likelihood message detection;
//! * [`channel`] — AWGN and Rayleigh flat-fading models, MMSE equalization,
//!   and the linear noise-variance training schedule;
//! * [`golay`] — the extended (24,12) Golay and (8,4) Hamming reference codes
//!   with QPSK mapping and codebook MLD;
//! * [`nonlinearity`] — the piecewise-linear non-linearity score N(f) and the
//!   network-level score Q for MLP, KAN, and baseline detectors;
//! * [`symreg`] — grid-search symbolic regression that replaces learned
//!   spline activations with closed-form candidates;
//! * [`harness`] — training loop, BLER simulation, model persistence, and
//!   score reports behind the `kanae` CLI.

pub mod autoencoder;
pub mod channel;
pub mod error;
pub mod golay;
pub mod harness;
pub mod network;
pub mod nonlinearity;
pub mod rng;
pub mod splines;
pub mod symreg;

pub use error::{Error, Result};
