//! Versioned JSON model files.
//!
//! A model file is a single JSON object: format version, code dimensions,
//! the architecture label, the layer stack (encoder layers first, with
//! `encoder_layers` marking the boundary), and the codebook power scale.
//! Saving is deterministic — field order is fixed and floats are written
//! shortest-roundtrip — so save → load → save is byte-identical.
//!
//! Symbolic edges additionally carry a rendered `expr` string for human
//! consumption; it is regenerated on save and never parsed back.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::network::{
    Activation, KanEdge, KanLayer, Layer, MlpLayer, SymbolicEdge, SymbolicLayer,
};
use crate::splines::SplineGrid;
use crate::symreg::builtin_candidate;

/// Bumped whenever the on-disk layout changes incompatibly.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelFile {
    format_version: u32,
    n: usize,
    k: usize,
    arch: String,
    /// How many leading entries of `layers` form the encoder half.
    encoder_layers: usize,
    power_scale: f64,
    layers: Vec<LayerSchema>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerSchema {
    Kan(KanSchema),
    Mlp(MlpSchema),
    Symbolic(SymbolicSchema),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KanSchema {
    d_in: usize,
    d_out: usize,
    grid: GridSchema,
    edges: Vec<KanEdgeSchema>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSchema {
    degree: usize,
    interval: (f64, f64),
    num_intervals: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KanEdgeSchema {
    coeffs: Vec<f64>,
    w_b: f64,
    w_s: f64,
    active: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpSchema {
    d_in: usize,
    d_out: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolicSchema {
    d_in: usize,
    d_out: usize,
    interval: (f64, f64),
    edges: Vec<SymbolicEdgeSchema>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolicEdgeSchema {
    candidate: String,
    gamma_in: f64,
    beta_in: f64,
    gamma_out: f64,
    beta_out: f64,
    active: bool,
    /// Display only; regenerated on save, ignored on load.
    expr: String,
}

fn layer_schema(layer: &Layer) -> LayerSchema {
    match layer {
        Layer::Kan(l) => LayerSchema::Kan(KanSchema {
            d_in: l.d_in(),
            d_out: l.d_out(),
            grid: GridSchema {
                degree: l.grid().degree(),
                interval: l.grid().interval(),
                num_intervals: l.grid().num_intervals(),
            },
            edges: l
                .edges()
                .iter()
                .map(|e| KanEdgeSchema {
                    coeffs: e.coeffs.clone(),
                    w_b: e.w_b,
                    w_s: e.w_s,
                    active: e.active,
                })
                .collect(),
        }),
        Layer::Mlp(l) => LayerSchema::Mlp(MlpSchema {
            d_in: l.d_in(),
            d_out: l.d_out(),
            activation: l.activation(),
            weights: l.weights().to_vec(),
            bias: l.bias().to_vec(),
        }),
        Layer::Symbolic(l) => LayerSchema::Symbolic(SymbolicSchema {
            d_in: l.d_in(),
            d_out: l.d_out(),
            interval: l.interval(),
            edges: l
                .edges()
                .iter()
                .map(|e| SymbolicEdgeSchema {
                    candidate: e.candidate.id().to_string(),
                    gamma_in: e.gamma_in,
                    beta_in: e.beta_in,
                    gamma_out: e.gamma_out,
                    beta_out: e.beta_out,
                    active: e.active,
                    expr: e.expression(),
                })
                .collect(),
        }),
    }
}

fn layer_from_schema(schema: LayerSchema) -> Result<Layer> {
    match schema {
        LayerSchema::Kan(s) => {
            let grid = SplineGrid::new(s.grid.degree, s.grid.interval, s.grid.num_intervals)?;
            let edges = s
                .edges
                .into_iter()
                .map(|e| KanEdge {
                    coeffs: e.coeffs,
                    w_b: e.w_b,
                    w_s: e.w_s,
                    active: e.active,
                })
                .collect();
            Ok(Layer::Kan(KanLayer::from_parts(s.d_in, s.d_out, grid, edges)?))
        }
        LayerSchema::Mlp(s) => Ok(Layer::Mlp(MlpLayer::from_parts(
            s.d_in,
            s.d_out,
            s.weights,
            s.bias,
            s.activation,
        )?)),
        LayerSchema::Symbolic(s) => {
            let edges = s
                .edges
                .into_iter()
                .map(|e| {
                    Ok(SymbolicEdge {
                        candidate: builtin_candidate(&e.candidate)?,
                        gamma_in: e.gamma_in,
                        beta_in: e.beta_in,
                        gamma_out: e.gamma_out,
                        beta_out: e.beta_out,
                        active: e.active,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Layer::Symbolic(SymbolicLayer::new(
                s.d_in, s.d_out, s.interval, edges,
            )?))
        }
    }
}

pub(crate) fn model_file(model: &AutoencoderModel) -> ModelFile {
    ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        n: model.n(),
        k: model.k(),
        arch: model.arch_label().to_string(),
        encoder_layers: model.encoder().len(),
        power_scale: model.power_scale(),
        layers: model
            .encoder()
            .iter()
            .chain(model.decoder())
            .map(layer_schema)
            .collect(),
    }
}

pub(crate) fn model_from_file(file: ModelFile) -> Result<AutoencoderModel> {
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: file.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    if file.encoder_layers == 0 || file.encoder_layers >= file.layers.len() {
        return Err(Error::ModelSchema(format!(
            "encoder_layers = {} does not split a {}-layer stack",
            file.encoder_layers,
            file.layers.len()
        )));
    }
    let mut layers = file
        .layers
        .into_iter()
        .map(layer_from_schema)
        .collect::<Result<Vec<_>>>()?;
    let decoder = layers.split_off(file.encoder_layers);
    let model = AutoencoderModel::new(file.n, file.k, layers, decoder)?
        .with_power_scale(file.power_scale)?;
    if model.arch_label() != file.arch {
        return Err(Error::ModelSchema(format!(
            "arch label \"{}\" does not match the layer stack (\"{}\")",
            file.arch,
            model.arch_label()
        )));
    }
    Ok(model)
}

/// Reads just the `format_version` field, so stale files fail with a
/// version error instead of schema noise.
pub(crate) fn probe_version(text: &str) -> Result<u32> {
    #[derive(Deserialize)]
    struct Probe {
        format_version: u32,
    }
    let probe: Probe =
        serde_json::from_str(text).map_err(|e| Error::ModelSchema(e.to_string()))?;
    Ok(probe.format_version)
}

pub fn model_to_json(model: &AutoencoderModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&model_file(model))?)
}

pub fn model_from_json(text: &str) -> Result<AutoencoderModel> {
    let found = probe_version(text)?;
    if found != MODEL_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelSchema(e.to_string()))?;
    model_from_file(file)
}

pub fn save_model(model: &AutoencoderModel, path: &Path) -> Result<()> {
    atomic_write(path, model_to_json(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<AutoencoderModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

/// Write-to-temp-then-rename in the destination directory, so readers never
/// observe a half-written file.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::{symbolify_model, CandidateLibrary, SymbolifyParams};

    fn sample_kan() -> AutoencoderModel {
        let mut model = AutoencoderModel::kan_default(4, 2, 3, 5, 77).unwrap();
        // Exercise inactive-edge persistence.
        if let Layer::Kan(l) = &mut model.encoder_mut()[0] {
            l.edge_mut(1, 2).active = false;
        }
        model
    }

    #[test]
    fn kan_roundtrip_is_byte_identical() {
        let model = sample_kan();
        let json = model_to_json(&model).unwrap();
        let back = model_from_json(&json).unwrap();
        assert_eq!(json, model_to_json(&back).unwrap());
        for (a, b) in model.params().iter().zip(&back.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(model.power_scale().to_bits(), back.power_scale().to_bits());
        if let Layer::Kan(l) = &back.encoder()[0] {
            assert!(!l.edge(1, 2).active);
        } else {
            panic!("expected a KAN encoder layer");
        }
    }

    #[test]
    fn mlp_roundtrip_is_byte_identical() {
        let model = AutoencoderModel::mlp_default(4, 2, 6, 3).unwrap();
        let json = model_to_json(&model).unwrap();
        let back = model_from_json(&json).unwrap();
        assert_eq!(json, model_to_json(&back).unwrap());
        assert_eq!(back.arch_label(), "mlp");
    }

    #[test]
    fn symbolic_roundtrip_keeps_expressions() {
        let model = sample_kan();
        let library = CandidateLibrary::default_library();
        let (symbolic, _) = symbolify_model(&model, &library, &SymbolifyParams::default()).unwrap();

        let json = model_to_json(&symbolic).unwrap();
        assert!(json.contains("\"expr\""));
        let back = model_from_json(&json).unwrap();
        assert_eq!(json, model_to_json(&back).unwrap());

        // The reconstructed model computes the same codewords.
        for m in 0..4 {
            let a = symbolic.encode_real(m).unwrap();
            let b = back.encode_real(m).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn save_and_load_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_kan();
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        for (a, b) in model.params().iter().zip(&back.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn version_mismatch_is_reported_as_such() {
        let json = model_to_json(&sample_kan()).unwrap();
        let bumped = json.replacen("\"format_version\": 1", "\"format_version\": 3", 1);
        assert!(matches!(
            model_from_json(&bumped),
            Err(Error::FormatVersion {
                found: 3,
                expected: MODEL_FORMAT_VERSION
            })
        ));
    }

    #[test]
    fn unknown_candidate_is_rejected() {
        let model = sample_kan();
        let library = CandidateLibrary::default_library();
        let (symbolic, _) = symbolify_model(&model, &library, &SymbolifyParams::default()).unwrap();
        let json = model_to_json(&symbolic).unwrap();

        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["layers"][0]["edges"][0]["candidate"] = "zeta".into();
        let text = serde_json::to_string(&value).unwrap();
        assert!(matches!(
            model_from_json(&text),
            Err(Error::CandidateUnknown { .. })
        ));
    }

    #[test]
    fn schema_violations_are_model_schema_errors() {
        let json = model_to_json(&sample_kan()).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();

        // Unknown top-level field.
        value["bogus"] = 1.into();
        let text = serde_json::to_string(&value).unwrap();
        assert!(matches!(model_from_json(&text), Err(Error::ModelSchema(_))));

        // Boundary outside the stack.
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["encoder_layers"] = 9.into();
        let text = serde_json::to_string(&value).unwrap();
        assert!(matches!(model_from_json(&text), Err(Error::ModelSchema(_))));

        // Missing format version entirely.
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value.as_object_mut().unwrap().remove("format_version");
        let text = serde_json::to_string(&value).unwrap();
        assert!(matches!(model_from_json(&text), Err(Error::ModelSchema(_))));
    }
}
