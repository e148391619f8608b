//! Monte-Carlo block-error-rate estimation.
//!
//! Every trial owns an independent RNG stream keyed by (seed, sweep point,
//! trial index), so estimates are bit-reproducible regardless of thread
//! count, and the per-trial draw order — message first, then channel — is
//! part of the format.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::autoencoder::{depair_complex, AutoencoderModel};
use crate::channel::{apply_channel_with, ebn0_to_noise_var, mmse_equalize, ChannelKind};
use crate::error::{Error, Result};
use crate::golay::{qpsk_demap_hard, qpsk_map, LinearBlockCode};
use crate::rng::{stream, Domain};

/// A transmission scheme under test, with enough precomputed state to make
/// single trials cheap.
#[derive(Debug, Clone)]
pub enum Scheme {
    /// Learned code: table-lookup encoding, network decoding.
    Autoencoder {
        label: String,
        model: AutoencoderModel,
        codebook: Vec<Vec<Complex64>>,
    },
    /// Classical linear block code with exhaustive MLD.
    BlockCode {
        label: &'static str,
        code: LinearBlockCode,
    },
    /// QPSK with no coding: `k` bits mapped straight to k/2 symbols.
    UncodedQpsk { k: usize },
}

impl Scheme {
    pub fn golay() -> Self {
        Scheme::BlockCode {
            label: "golay24-mld",
            code: LinearBlockCode::extended_golay(),
        }
    }

    pub fn hamming84() -> Self {
        Scheme::BlockCode {
            label: "hamming84-mld",
            code: LinearBlockCode::extended_hamming84(),
        }
    }

    /// Labels the scheme from the model architecture: `kan-ae`, `mlp-ae`,
    /// or `sr-ae` once symbolified.
    pub fn autoencoder(model: AutoencoderModel) -> Result<Self> {
        let label = match model.arch_label() {
            "kan" => "kan-ae",
            "mlp" => "mlp-ae",
            _ => "sr-ae",
        };
        let codebook = model.codebook()?;
        Ok(Scheme::Autoencoder {
            label: label.to_string(),
            model,
            codebook,
        })
    }

    pub fn uncoded_qpsk(k: usize) -> Result<Self> {
        if k == 0 || k % 2 != 0 || k > 62 {
            return Err(Error::InvalidParameter(format!(
                "uncoded QPSK needs an even bit count in 2..=62, got {k}"
            )));
        }
        Ok(Scheme::UncodedQpsk { k })
    }

    pub fn label(&self) -> &str {
        match self {
            Scheme::Autoencoder { label, .. } => label,
            Scheme::BlockCode { label, .. } => label,
            Scheme::UncodedQpsk { .. } => "uncoded-qpsk",
        }
    }

    pub fn k_bits(&self) -> usize {
        match self {
            Scheme::Autoencoder { model, .. } => model.k(),
            Scheme::BlockCode { code, .. } => code.k_bits(),
            Scheme::UncodedQpsk { k } => *k,
        }
    }

    pub fn n_bits(&self) -> usize {
        match self {
            Scheme::Autoencoder { model, .. } => model.n(),
            Scheme::BlockCode { code, .. } => code.n_bits(),
            Scheme::UncodedQpsk { k } => *k,
        }
    }

    /// Information bits per complex symbol, halved: the Eb/N0 convention
    /// measures rate in bits per real dimension, so uncoded QPSK is 1.
    pub fn rate(&self) -> f64 {
        self.k_bits() as f64 / self.n_bits() as f64
    }

    /// One transmission: returns true on block error. `rng` must be a fresh
    /// per-trial stream.
    fn trial(&self, channel: ChannelKind, noise_var: f64, rng: &mut impl Rng) -> Result<bool> {
        match self {
            Scheme::Autoencoder {
                model, codebook, ..
            } => {
                let message = rng.random_range(0..codebook.len());
                let realization =
                    apply_channel_with(channel, noise_var, &codebook[message], rng);
                let symbols = match channel {
                    ChannelKind::Awgn => realization.received.clone(),
                    ChannelKind::RayleighFlat => mmse_equalize(&realization, noise_var),
                };
                let (_, detected) = model.decode_detect(&depair_complex(&symbols))?;
                Ok(detected != message)
            }
            Scheme::BlockCode { code, .. } => {
                let message = rng.random_range(0..code.message_count());
                let realization =
                    apply_channel_with(channel, noise_var, code.modulated(message)?, rng);
                let symbols = match channel {
                    ChannelKind::Awgn => realization.received.clone(),
                    ChannelKind::RayleighFlat => mmse_equalize(&realization, noise_var),
                };
                let detected = code.mld_detect(&symbols)?;
                Ok(detected != message)
            }
            Scheme::UncodedQpsk { k } => {
                let message: u64 = rng.random_range(0..(1u64 << k));
                let bits: Vec<u8> = (0..*k)
                    .map(|b| ((message >> (k - 1 - b)) & 1) as u8)
                    .collect();
                let tx = qpsk_map(&bits)?;
                let realization = apply_channel_with(channel, noise_var, &tx, rng);
                let symbols = match channel {
                    ChannelKind::Awgn => realization.received.clone(),
                    ChannelKind::RayleighFlat => mmse_equalize(&realization, noise_var),
                };
                Ok(qpsk_demap_hard(&symbols) != bits)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlerPoint {
    pub ebn0_db: f64,
    pub trials: u64,
    pub block_errors: u64,
    pub bler: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlerResult {
    pub scheme: String,
    pub channel: String,
    pub seed: u64,
    pub points: Vec<BlerPoint>,
}

/// Estimates BLER at each Eb/N0 point with `trials` independent
/// transmissions, parallelized over trials.
pub fn simulate_bler(
    scheme: &Scheme,
    channel: ChannelKind,
    ebn0_points_db: &[f64],
    trials: u64,
    seed: u64,
) -> Result<BlerResult> {
    if ebn0_points_db.is_empty() {
        return Err(Error::InvalidParameter(
            "BLER sweep needs at least one Eb/N0 point".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "BLER estimation needs at least one trial".into(),
        ));
    }
    let mut points = Vec::with_capacity(ebn0_points_db.len());
    for (p, &ebn0_db) in ebn0_points_db.iter().enumerate() {
        let noise_var = ebn0_to_noise_var(scheme.rate(), ebn0_db);
        let block_errors = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream(seed, Domain::Bler, p as u64, t);
                scheme.trial(channel, noise_var, &mut rng).map(u64::from)
            })
            .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
        points.push(BlerPoint {
            ebn0_db,
            trials,
            block_errors,
            bler: block_errors as f64 / trials as f64,
        });
    }
    Ok(BlerResult {
        scheme: scheme.label().to_string(),
        channel: channel.label().to_string(),
        seed,
        points,
    })
}

/// Renders results as CSV with the fixed header
/// `scheme,channel,ebn0_db,trials,block_errors,bler`.
pub fn bler_csv(results: &[BlerResult]) -> String {
    let mut out = String::from("scheme,channel,ebn0_db,trials,block_errors,bler\n");
    for result in results {
        for point in &result.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                result.scheme,
                result.channel,
                point.ebn0_db,
                point.trials,
                point.block_errors,
                point.bler
            ));
        }
    }
    out
}

pub fn write_bler_csv(results: &[BlerResult], path: &Path) -> Result<()> {
    super::persist::atomic_write(path, bler_csv(results).as_bytes())
}

/// Parses either a single Eb/N0 value or an inclusive `start:step:stop`
/// sweep.
pub fn parse_ebn0_sweep(text: &str) -> Result<Vec<f64>> {
    let bad = |detail: &str| {
        Error::InvalidParameter(format!(
            "Eb/N0 sweep \"{text}\" {detail}; expected a number or start:step:stop"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| bad("has a non-numeric part"))?;
        if !v.is_finite() {
            return Err(bad("has a non-finite part"));
        }
        Ok(v)
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [start, step, stop] => {
            let (start, step, stop) = (parse(start)?, parse(step)?, parse(stop)?);
            if step <= 0.0 {
                return Err(bad("needs a positive step"));
            }
            if stop < start {
                return Err(bad("runs backwards"));
            }
            let mut points = Vec::new();
            let mut i = 0u32;
            loop {
                let v = start + f64::from(i) * step;
                if v > stop + 1e-9 {
                    break;
                }
                points.push(v);
                i += 1;
            }
            Ok(points)
        }
        _ => Err(bad("has the wrong number of fields")),
    }
}
