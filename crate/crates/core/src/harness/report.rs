//! Score reports: the network-level complexity proxy Q with a breakdown of
//! every scored activation instance.
//!
//! For symbolic models each active edge is listed (and their N values sum
//! to Q); for MLPs the entries list each neuron's activation, while Q also
//! counts the multiply-accumulates feeding it; baselines have no
//! activations at all.

use std::path::Path;

use serde::Serialize;

use crate::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::network::Layer;
use crate::nonlinearity::{
    baseline_mld_score, kan_network_score, mlp_model_score, symbolic_layer_scores,
    NonlinearityParams,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationScore {
    /// "encoder:0", "decoder:1", … — half and layer index.
    pub layer: String,
    /// Input index for edge activations; 0 for neuron-wise activations.
    pub i: usize,
    /// Output index.
    pub j: usize,
    pub candidate: String,
    #[serde(rename = "N")]
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearityReport {
    pub scheme: String,
    #[serde(rename = "Q")]
    pub q: u64,
    pub per_activation: Vec<ActivationScore>,
}

fn layer_label(half: &str, idx: usize) -> String {
    format!("{half}:{idx}")
}

/// Scores a symbolic or MLP model. Raw spline models have no closed-form
/// activations to score and are rejected.
pub fn score_model(
    model: &AutoencoderModel,
    params: &NonlinearityParams,
) -> Result<NonlinearityReport> {
    let halves = [("encoder", model.encoder()), ("decoder", model.decoder())];
    match model.arch_label() {
        "mlp" => {
            let q = mlp_model_score(model)?;
            let mut per_activation = Vec::new();
            for (half, layers) in halves {
                for (idx, layer) in layers.iter().enumerate() {
                    let Layer::Mlp(l) = layer else {
                        return Err(Error::NotSymbolic {
                            layer: layer_label(half, idx),
                        });
                    };
                    let act = l.activation();
                    per_activation.extend((0..l.d_out()).map(|j| ActivationScore {
                        layer: layer_label(half, idx),
                        i: 0,
                        j,
                        candidate: act.label().to_string(),
                        n: act.score(),
                    }));
                }
            }
            Ok(NonlinearityReport {
                scheme: "mlp-ae".into(),
                q,
                per_activation,
            })
        }
        _ => {
            let q = kan_network_score(model, params)?;
            let mut per_activation = Vec::new();
            for (half, layers) in halves {
                for (idx, layer) in layers.iter().enumerate() {
                    if let Layer::Symbolic(l) = layer {
                        per_activation.extend(symbolic_layer_scores(l, params)?.into_iter().map(
                            |e| ActivationScore {
                                layer: layer_label(half, idx),
                                i: e.input,
                                j: e.output,
                                candidate: e.candidate,
                                n: e.n_score,
                            },
                        ));
                    }
                }
            }
            Ok(NonlinearityReport {
                scheme: "sr-ae".into(),
                q,
                per_activation,
            })
        }
    }
}

/// Scores an MLD baseline by its correlation-detector multiplications.
pub fn score_baseline(name: &str) -> Result<NonlinearityReport> {
    let (scheme, n, k) = match name {
        "golay" => ("golay24-mld", 24, 12),
        "hamming84" => ("hamming84-mld", 8, 4),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown baseline \"{other}\"; expected golay or hamming84"
            )))
        }
    };
    Ok(NonlinearityReport {
        scheme: scheme.into(),
        q: baseline_mld_score(n, k),
        per_activation: Vec::new(),
    })
}

pub fn reports_to_json(reports: &[NonlinearityReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn write_reports(reports: &[NonlinearityReport], path: &Path) -> Result<()> {
    super::persist::atomic_write(path, reports_to_json(reports)?.as_bytes())
}
