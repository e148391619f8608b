//! Training driver, Monte-Carlo BLER engine, persistence, and reporting.
//!
//! Everything here is glue over the numeric modules: [`TrainConfig`] +
//! [`Trainer`] run the noise-scheduled training loop, [`bler`] estimates
//! block error rates, [`persist`] round-trips models through versioned
//! JSON files, and [`report`] assembles non-linearity score reports.
//! (seed, config) fully determine training trajectories and BLER counts.

pub mod bler;
pub mod persist;
pub mod report;

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderModel;
use crate::channel::{ebn0_to_noise_var, schedule_noise};
use crate::error::{Error, Result};
use crate::network::{adam_step, loss_and_gradients, AdamState, Layer, TrainSample};
use crate::rng::{stream, Domain};

/// Architecture selector with its size hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArchConfig {
    Kan {
        #[serde(default = "default_degree")]
        degree: usize,
        #[serde(default = "default_basis_count")]
        basis_count: usize,
    },
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: usize,
    },
}

fn default_degree() -> usize {
    3
}

fn default_basis_count() -> usize {
    5
}

fn default_hidden() -> usize {
    150
}

fn default_batch_size() -> usize {
    2048
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_n_epochs() -> usize {
    30_000
}

fn default_ebn0_end_db() -> f64 {
    6.0
}

fn default_refit_every() -> usize {
    500
}

/// Everything the training loop consumes; config files are JSON with these
/// exact field names. Defaults follow the full-scale experiment: B = 2048,
/// α = 1e-3, 30,000 epochs, noise scheduled from 0 dB down to 6 dB, grid
/// refit every 500 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub n: usize,
    pub k: usize,
    pub arch: ArchConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_n_epochs")]
    pub n_epochs: usize,
    /// Eb/N0 at epoch 0 — the noisy end of the schedule (σ²_max).
    #[serde(default)]
    pub ebn0_start_db: f64,
    /// Eb/N0 the schedule anneals toward (σ²_min).
    #[serde(default = "default_ebn0_end_db")]
    pub ebn0_end_db: f64,
    #[serde(default)]
    pub seed: u64,
    /// KAN grid-refit period in epochs; 0 disables refitting.
    #[serde(default = "default_refit_every")]
    pub refit_every: usize,
    /// Checkpoint period in epochs; 0 disables periodic checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.n_epochs == 0 {
            return Err(Error::InvalidParameter("n_epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.ebn0_start_db > self.ebn0_end_db {
            return Err(Error::InvalidParameter(format!(
                "schedule must anneal toward less noise: ebn0_start_db ({}) > ebn0_end_db ({})",
                self.ebn0_start_db, self.ebn0_end_db
            )));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let config: TrainConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn build_model(&self) -> Result<AutoencoderModel> {
        match self.arch {
            ArchConfig::Kan {
                degree,
                basis_count,
            } => AutoencoderModel::kan_default(self.n, self.k, degree, basis_count, self.seed),
            ArchConfig::Mlp { hidden } => {
                AutoencoderModel::mlp_default(self.n, self.k, hidden, self.seed)
            }
        }
    }

    /// Noise-variance schedule endpoints (σ²_max at epoch 0, σ²_min at the
    /// final epoch).
    pub fn noise_endpoints(&self) -> (f64, f64) {
        let rate = self.k as f64 / self.n as f64;
        (
            ebn0_to_noise_var(rate, self.ebn0_start_db),
            ebn0_to_noise_var(rate, self.ebn0_end_db),
        )
    }
}

/// The resumable training loop: one [`Trainer::run_epoch`] call per epoch
/// draws a fresh batch from the epoch-indexed RNG stream, applies one Adam
/// step, renormalizes the codebook, and periodically refits KAN grids to
/// the observed activation ranges.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    model: AutoencoderModel,
    adam: AdamState,
    epoch: usize,
    losses: Vec<f64>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = config.build_model()?;
        let adam = AdamState::new(model.param_count(), config.learning_rate);
        Ok(Trainer {
            config,
            model,
            adam,
            epoch: 0,
            losses: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &AutoencoderModel {
        &self.model
    }

    /// Completed epochs so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.n_epochs
    }

    pub fn into_parts(self) -> (AutoencoderModel, Vec<f64>) {
        (self.model, self.losses)
    }

    /// Draws this epoch's batch. Per sample: the message first, then one
    /// (re, im) noise pair per symbol — the order is part of the format, so
    /// a resumed run replays identical batches.
    fn draw_batch(&self, noise_var: f64) -> Vec<TrainSample> {
        let mut rng = stream(self.config.seed, Domain::Train, self.epoch as u64, 0);
        let m = self.model.message_count();
        let symbols = self.config.n / 2;
        let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).expect("valid std");
        (0..self.config.batch_size)
            .map(|_| TrainSample {
                message: rng.random_range(0..m),
                noise: (0..symbols)
                    .map(|_| {
                        num_complex::Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn run_epoch(&mut self) -> Result<f64> {
        if self.is_done() {
            return Err(Error::InvalidParameter(format!(
                "training already finished at epoch {}",
                self.epoch
            )));
        }
        let (var_max, var_min) = self.config.noise_endpoints();
        let noise_var = schedule_noise(self.epoch, self.config.n_epochs, var_max, var_min);
        let batch = self.draw_batch(noise_var);

        let (loss, grads) = loss_and_gradients(&self.model, &batch)?;
        if !loss.is_finite() {
            return Err(Error::TrainDiverged {
                epoch: self.epoch,
                detail: format!("loss = {loss}"),
            });
        }
        let mut params = self.model.params();
        adam_step(&mut self.adam, &mut params, &grads).map_err(|e| Error::TrainDiverged {
            epoch: self.epoch,
            detail: e.to_string(),
        })?;
        self.model.set_params(&params)?;
        self.model.normalize_codebook()?;

        let refit = self.config.refit_every;
        if refit > 0 && (self.epoch + 1) % refit == 0 && self.has_kan_layers() {
            self.refit_grids(&batch)?;
            self.model.normalize_codebook()?;
        }

        self.losses.push(loss);
        self.epoch += 1;
        Ok(loss)
    }

    /// Runs the remaining epochs, writing a checkpoint every
    /// `checkpoint_every` epochs when a path is given.
    pub fn run_to_completion(&mut self, checkpoint: Option<&Path>) -> Result<()> {
        while !self.is_done() {
            self.run_epoch()?;
            if let (Some(path), period) = (checkpoint, self.config.checkpoint_every) {
                if period > 0 && self.epoch % period == 0 && !self.is_done() {
                    self.save_checkpoint(path)?;
                }
            }
        }
        Ok(())
    }

    fn has_kan_layers(&self) -> bool {
        self.model
            .encoder()
            .iter()
            .chain(self.model.decoder())
            .any(|l| matches!(l, Layer::Kan(_)))
    }

    /// Refits every KAN grid to the input range its layer saw on this
    /// batch. Only the extremes matter: the refit interval is derived from
    /// sample min/max, and the least-squares probes are synthesized on the
    /// old interior.
    fn refit_grids(&mut self, batch: &[TrainSample]) -> Result<()> {
        let extents = self.layer_input_extents(batch)?;
        let n_enc = self.model.encoder().len();
        for (idx, layer) in self.model.encoder_mut().iter_mut().enumerate() {
            if let Layer::Kan(kan) = layer {
                let (lo, hi) = extents[idx];
                kan.refit_grid(&[lo, hi])?;
            }
        }
        for (idx, layer) in self.model.decoder_mut().iter_mut().enumerate() {
            if let Layer::Kan(kan) = layer {
                let (lo, hi) = extents[n_enc + idx];
                kan.refit_grid(&[lo, hi])?;
            }
        }
        Ok(())
    }

    /// (min, max) of every input coordinate each layer received over the
    /// batch, encoder layers first.
    fn layer_input_extents(&self, batch: &[TrainSample]) -> Result<Vec<(f64, f64)>> {
        let model = &self.model;
        let n_layers = model.encoder().len() + model.decoder().len();
        let mut extents = vec![(f64::INFINITY, f64::NEG_INFINITY); n_layers];
        let track = |ext: &mut (f64, f64), v: &[f64]| {
            for &x in v {
                ext.0 = ext.0.min(x);
                ext.1 = ext.1.max(x);
            }
        };
        let scale = model.power_scale();
        for sample in batch {
            let mut v = model.one_hot(sample.message)?;
            for (idx, layer) in model.encoder().iter().enumerate() {
                track(&mut extents[idx], &v);
                v = layer.forward(&v)?;
            }
            let tx =
                crate::autoencoder::pair_complex(&v.iter().map(|x| x * scale).collect::<Vec<_>>())?;
            let rx: Vec<_> = tx.iter().zip(&sample.noise).map(|(s, w)| s + w).collect();
            let mut d = crate::autoencoder::depair_complex(&rx);
            let n_enc = model.encoder().len();
            for (idx, layer) in model.decoder().iter().enumerate() {
                track(&mut extents[n_enc + idx], &d);
                d = layer.forward(&d)?;
            }
        }
        Ok(extents)
    }

    /// Serializes the complete training state; resuming reproduces the
    /// uninterrupted run bit-exactly.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format_version: persist::MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            epoch: self.epoch,
            model: persist::model_file(&self.model),
            adam: self.adam.clone(),
            losses: self.losses.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        persist::atomic_write(path, json.as_bytes())
    }

    pub fn resume(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let found = persist::probe_version(&text)?;
        if found != persist::MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: persist::MODEL_FORMAT_VERSION,
            });
        }
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| Error::ModelSchema(e.to_string()))?;
        file.config.validate()?;
        let model = persist::model_from_file(file.model)?;
        if file.adam.step_count() != file.epoch as u64 {
            return Err(Error::ModelSchema(format!(
                "checkpoint epoch {} does not match optimizer step {}",
                file.epoch,
                file.adam.step_count()
            )));
        }
        if model.param_count() != file.adam.param_count() {
            return Err(Error::ModelSchema(
                "optimizer state does not match model parameter count".into(),
            ));
        }
        Ok(Trainer {
            config: file.config,
            model,
            adam: file.adam,
            epoch: file.epoch,
            losses: file.losses,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: TrainConfig,
    epoch: usize,
    model: persist::ModelFile,
    adam: AdamState,
    losses: Vec<f64>,
}

/// Trains a model from scratch and returns it with the per-epoch loss
/// trace.
pub fn train_autoencoder(config: &TrainConfig) -> Result<(AutoencoderModel, Vec<f64>)> {
    let mut trainer = Trainer::new(config.clone())?;
    trainer.run_to_completion(None)?;
    Ok(trainer.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            n: 4,
            k: 2,
            arch: ArchConfig::Kan {
                degree: 3,
                basis_count: 5,
            },
            batch_size: 32,
            learning_rate: 5e-3,
            n_epochs: 40,
            ebn0_start_db: 0.0,
            ebn0_end_db: 6.0,
            seed: 5,
            refit_every: 10,
            checkpoint_every: 0,
        }
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let config =
            TrainConfig::from_json(r#"{"n": 8, "k": 4, "arch": {"type": "kan"}}"#).unwrap();
        assert_eq!(config.batch_size, 2048);
        assert_eq!(config.learning_rate, 1e-3);
        assert_eq!(config.n_epochs, 30_000);
        assert_eq!(config.ebn0_start_db, 0.0);
        assert_eq!(config.ebn0_end_db, 6.0);
        assert_eq!(config.refit_every, 500);
        assert_eq!(
            config.arch,
            ArchConfig::Kan {
                degree: 3,
                basis_count: 5
            }
        );

        let mlp = TrainConfig::from_json(r#"{"n": 8, "k": 4, "arch": {"type": "mlp"}}"#).unwrap();
        assert_eq!(mlp.arch, ArchConfig::Mlp { hidden: 150 });

        // Unknown fields and inverted schedules are rejected.
        assert!(TrainConfig::from_json(r#"{"n": 8, "k": 4, "arch": {"type": "kan"}, "nope": 1}"#)
            .is_err());
        assert!(TrainConfig::from_json(
            r#"{"n": 8, "k": 4, "arch": {"type": "kan"}, "ebn0_start_db": 7.0}"#
        )
        .is_err());
        assert!(TrainConfig::from_json(
            r#"{"n": 8, "k": 4, "arch": {"type": "kan"}, "batch_size": 0}"#
        )
        .is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let config = tiny_config();
        let json = serde_json::to_string(&config).unwrap();
        let back = TrainConfig::from_json(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let config = tiny_config();
        let (model_a, losses_a) = train_autoencoder(&config).unwrap();
        let (model_b, losses_b) = train_autoencoder(&config).unwrap();

        assert_eq!(losses_a.len(), 40);
        let head: f64 = losses_a[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = losses_a[35..].iter().sum::<f64>() / 5.0;
        assert!(tail < head, "loss did not decrease: {head} -> {tail}");

        // Bit-identical across runs.
        for (a, b) in model_a.params().iter().zip(&model_b.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in losses_a.iter().zip(&losses_b) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn epoch_noise_follows_schedule() {
        let config = tiny_config();
        let (var_max, var_min) = config.noise_endpoints();
        assert!(var_max > var_min);
        assert_eq!(
            schedule_noise(0, config.n_epochs, var_max, var_min),
            var_max
        );
        assert_eq!(
            schedule_noise(config.n_epochs, config.n_epochs, var_max, var_min),
            var_min
        );
    }

    #[test]
    fn checkpoint_resume_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trainer.ckpt.json");

        let mut straight = Trainer::new(tiny_config()).unwrap();
        for _ in 0..12 {
            straight.run_epoch().unwrap();
        }

        let mut first_half = Trainer::new(tiny_config()).unwrap();
        for _ in 0..5 {
            first_half.run_epoch().unwrap();
        }
        first_half.save_checkpoint(&path).unwrap();
        drop(first_half);
        let mut resumed = Trainer::resume(&path).unwrap();
        assert_eq!(resumed.epoch(), 5);
        for _ in 0..7 {
            resumed.run_epoch().unwrap();
        }

        let a = straight.model().params();
        let b = resumed.model().params();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(
            straight.model().power_scale().to_bits(),
            resumed.model().power_scale().to_bits()
        );
        for (x, y) in straight.losses().iter().zip(resumed.losses()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn resume_rejects_corrupt_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt.json");
        let mut trainer = Trainer::new(tiny_config()).unwrap();
        trainer.run_epoch().unwrap();
        trainer.save_checkpoint(&path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 9", 1);
        std::fs::write(&path, bumped).unwrap();
        assert!(matches!(
            Trainer::resume(&path),
            Err(Error::FormatVersion { found: 9, .. })
        ));
    }

    #[test]
    fn mlp_training_runs_without_refit() {
        let config = TrainConfig {
            arch: ArchConfig::Mlp { hidden: 8 },
            n_epochs: 10,
            ..tiny_config()
        };
        let (model, losses) = train_autoencoder(&config).unwrap();
        assert_eq!(losses.len(), 10);
        assert_eq!(model.arch_label(), "mlp");
    }
}
