//! AWGN and Rayleigh flat-fading channels, MMSE equalization, and the
//! training noise schedule.
//!
//! The received symbol model is `s_rx = h·s_tx + w` with
//! `w ∼ CN(0, σₙ²)` (each real dimension carries variance σₙ²/2). AWGN is
//! the `h = 1` special case; Rayleigh flat fading draws an independent
//! `h ∼ CN(0, 1)` per symbol, and the realization records `h` (perfect CSI).
//!
//! E_b/N_0 convention (documented in the README as well): symbols have unit
//! energy and a rate-r code carries 2r information bits per complex symbol,
//! so `σₙ² = 1 / (2·r·10^(EbN0_dB/10))`. For r = 1/2 this gives σₙ² = 1 at
//! 0 dB.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::{stream, Domain};

/// Channel family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    RayleighFlat,
}

impl ChannelKind {
    /// Stable lowercase label used in CSV output and CLI parsing.
    pub fn label(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::RayleighFlat => "rayleigh",
        }
    }
}

/// A channel with its noise level and a seed for self-contained application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    /// Noise variance σₙ² per complex symbol (≥ 0).
    pub noise_var: f64,
    pub seed: u64,
}

/// One pass through the channel: the fading coefficients that acted on each
/// symbol (all ones for AWGN) and the received symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub coefficients: Vec<Complex64>,
    pub received: Vec<Complex64>,
}

/// Converts an E_b/N_0 point in dB to the noise variance σₙ² for a rate-r
/// code under the unit-symbol-energy convention above.
pub fn ebn0_to_noise_var(rate: f64, ebn0_db: f64) -> f64 {
    assert!(
        rate > 0.0 && rate <= 1.0,
        "code rate must be in (0, 1], got {rate}"
    );
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// Applies the configured channel using a stream derived from `config.seed`.
pub fn apply_channel(config: &ChannelConfig, s_tx: &[Complex64]) -> ChannelRealization {
    let mut rng = stream(config.seed, Domain::Bler, 0, 0);
    apply_channel_with(config.kind, config.noise_var, s_tx, &mut rng)
}

/// Applies the channel drawing from a caller-supplied stream. Per symbol the
/// draw order is fixed (h real, h imag for Rayleigh; then w real, w imag) so
/// realizations are reproducible for a given stream.
pub fn apply_channel_with(
    kind: ChannelKind,
    noise_var: f64,
    s_tx: &[Complex64],
    rng: &mut impl Rng,
) -> ChannelRealization {
    assert!(noise_var >= 0.0, "noise variance must be >= 0");
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    // CN(0, v) has variance v/2 in each real dimension.
    let fade_amp = (0.5f64).sqrt();
    let noise_amp = (0.5 * noise_var).sqrt();
    let mut coefficients = Vec::with_capacity(s_tx.len());
    let mut received = Vec::with_capacity(s_tx.len());
    for &s in s_tx {
        let h = match kind {
            ChannelKind::Awgn => Complex64::new(1.0, 0.0),
            ChannelKind::RayleighFlat => Complex64::new(
                fade_amp * std_normal.sample(rng),
                fade_amp * std_normal.sample(rng),
            ),
        };
        let w = Complex64::new(
            noise_amp * std_normal.sample(rng),
            noise_amp * std_normal.sample(rng),
        );
        coefficients.push(h);
        received.push(h * s + w);
    }
    ChannelRealization {
        coefficients,
        received,
    }
}

/// Per-symbol MMSE equalization `ŝ = h*·s_rx / (|h|² + σₙ²)`.
///
/// The degenerate point h = 0 with σₙ² = 0 returns 0 (the defined limit)
/// rather than NaN.
pub fn mmse_equalize(realization: &ChannelRealization, noise_var: f64) -> Vec<Complex64> {
    realization
        .coefficients
        .iter()
        .zip(&realization.received)
        .map(|(&h, &r)| {
            let denom = h.norm_sqr() + noise_var;
            if denom == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                h.conj() * r / denom
            }
        })
        .collect()
}

/// Training noise schedule: linear anneal from `var_max` (before the first
/// update, epoch = 0) down to `var_min` at `epoch = n_epochs`.
pub fn schedule_noise(epoch: usize, n_epochs: usize, var_max: f64, var_min: f64) -> f64 {
    assert!(n_epochs >= 1, "n_epochs must be >= 1");
    assert!(var_max >= var_min, "var_max must be >= var_min");
    assert!(epoch <= n_epochs, "epoch {epoch} beyond n_epochs {n_epochs}");
    // Two-product form: exact at both endpoints, unlike max − t·(max − min).
    let t = epoch as f64 / n_epochs as f64;
    (1.0 - t) * var_max + t * var_min
}
