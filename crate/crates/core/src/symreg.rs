//! Symbolic regression of learned activations.
//!
//! Each spline activation φ(x) is approximated by a closed-form expression
//! `φ̂(x) = γₒ·f(γᵢ·x + βᵢ) + βₒ` where `f` ranges over a candidate library.
//! Inner parameters (γᵢ, βᵢ) come from a two-level grid search over
//! [−10, 10]²; outer parameters (γₒ, βₒ) from least squares at every grid
//! point. Candidates compete on the combined score
//!
//! ```text
//! Z = R² + λ / N(φ̂)
//! ```
//!
//! so that between near-equal fits the *simpler* (lower non-linearity score)
//! expression wins.

use rayon::prelude::*;
use serde::Deserialize;

use crate::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::network::{silu, KanLayer, Layer, SymbolicEdge, SymbolicLayer};
use crate::nonlinearity::{nonlinearity_score, NonlinearityParams};

/// A candidate scalar function: identifier, evaluation, domain predicate,
/// and a renderer for human-readable expression strings.
///
/// Function pointers keep candidates `Copy`-cheap, thread-safe, and
/// constructible in tests; persisted models reference candidates by id and
/// resolve them against [`builtin_candidate`] on load.
#[derive(Clone)]
pub struct Candidate {
    id: String,
    eval: fn(f64) -> f64,
    domain: fn(f64) -> bool,
    render: Option<fn(&str) -> String>,
}

impl Candidate {
    pub fn new(id: impl Into<String>, eval: fn(f64) -> f64, domain: fn(f64) -> bool) -> Self {
        Candidate {
            id: id.into(),
            eval,
            domain,
            render: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn in_domain(&self, x: f64) -> bool {
        (self.domain)(x)
    }

    /// Renders the function body applied to `inner` (e.g. `sin(2x + 0.3)`).
    pub fn render(&self, inner: &str) -> String {
        match self.render {
            Some(r) => r(inner),
            None => format!("{}({})", self.id, inner),
        }
    }
}

impl std::fmt::Debug for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Candidate").field("id", &self.id).finish()
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

fn all_reals(_: f64) -> bool {
    true
}

/// The builtin candidate set, in library order.
fn builtins() -> Vec<Candidate> {
    fn c(
        id: &str,
        eval: fn(f64) -> f64,
        domain: fn(f64) -> bool,
        render: fn(&str) -> String,
    ) -> Candidate {
        Candidate {
            id: id.into(),
            eval,
            domain,
            render: Some(render),
        }
    }
    vec![
        c("identity", |x| x, all_reals, |i| format!("({i})")),
        c("square", |x| x * x, all_reals, |i| format!("({i})^2")),
        c("cube", |x| x * x * x, all_reals, |i| format!("({i})^3")),
        c("reciprocal", |x| 1.0 / x, |x| x != 0.0, |i| format!("1/({i})")),
        c("sqrt", f64::sqrt, |x| x >= 0.0, |i| format!("sqrt({i})")),
        c("abs", f64::abs, all_reals, |i| format!("|{i}|")),
        c("exp", f64::exp, all_reals, |i| format!("exp({i})")),
        c("log", f64::ln, |x| x > 0.0, |i| format!("log({i})")),
        c("sin", f64::sin, all_reals, |i| format!("sin({i})")),
        c("cos", f64::cos, all_reals, |i| format!("cos({i})")),
        c("tanh", f64::tanh, all_reals, |i| format!("tanh({i})")),
        c(
            "sigmoid",
            |x| 1.0 / (1.0 + (-x).exp()),
            all_reals,
            |i| format!("sigmoid({i})"),
        ),
        c("silu", silu, all_reals, |i| format!("silu({i})")),
    ]
}

/// Resolves a builtin candidate by id (used when loading persisted models).
pub fn builtin_candidate(id: &str) -> Result<Candidate> {
    builtins()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::CandidateUnknown { id: id.into() })
}

/// An ordered candidate set. Order matters: score ties resolve toward the
/// earlier entry.
#[derive(Debug, Clone)]
pub struct CandidateLibrary {
    candidates: Vec<Candidate>,
}

#[derive(Deserialize)]
struct LibraryEntry {
    id: String,
    #[serde(default = "default_enabled")]
    enabled: bool,
}

fn default_enabled() -> bool {
    true
}

impl CandidateLibrary {
    /// All builtin candidates: identity, square, cube, reciprocal, sqrt,
    /// abs, exp, log, sin, cos, tanh, sigmoid, silu.
    pub fn default_library() -> Self {
        CandidateLibrary {
            candidates: builtins(),
        }
    }

    /// A library restricted to the given builtin ids, in the given order.
    pub fn from_ids(ids: &[&str]) -> Result<Self> {
        let candidates = ids
            .iter()
            .map(|id| builtin_candidate(id))
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateLibrary { candidates })
    }

    /// Parses a JSON config: a list of `{"id": "...", "enabled": true}`
    /// entries (enabled defaults to true). Unknown ids are errors.
    pub fn from_config_str(json: &str) -> Result<Self> {
        let entries: Vec<LibraryEntry> = serde_json::from_str(json)?;
        let candidates = entries
            .iter()
            .filter(|e| e.enabled)
            .map(|e| builtin_candidate(&e.id))
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateLibrary { candidates })
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Appends a (possibly synthetic) candidate; mainly for experiments and
    /// tests that inject custom functions.
    pub fn push(&mut self, candidate: Candidate) {
        self.candidates.push(candidate);
    }
}

/// Resolution of the (γᵢ, βᵢ) grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Half-width of the search square: both parameters range over
    /// [−range, range].
    pub range: f64,
    /// Points per axis in the coarse pass.
    pub coarse: usize,
    /// Points per axis in the refinement pass (1/10 coarse spacing,
    /// centered on the coarse winner; may overshoot ±range slightly).
    pub refine: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            range: 10.0,
            coarse: 41,
            refine: 21,
        }
    }
}

/// Everything symbolification needs besides the samples themselves.
#[derive(Debug, Clone)]
pub struct SymbolifyParams {
    /// Simplicity weight λ in Z = R² + λ/N.
    pub lambda: f64,
    /// Scoring parameters for N(φ̂) (ε defaults to 1e-2).
    pub nonlinearity: NonlinearityParams,
    pub grid: GridSpec,
    /// Uniform sample count per edge when converting whole models.
    pub samples_per_edge: usize,
}

impl Default for SymbolifyParams {
    fn default() -> Self {
        SymbolifyParams {
            lambda: 3e-2,
            nonlinearity: NonlinearityParams::default(),
            grid: GridSpec::default(),
            samples_per_edge: 512,
        }
    }
}

/// One fitted expression: the candidate plus affine parameters and scores.
#[derive(Debug, Clone)]
pub struct SymbolicFit {
    pub candidate: Candidate,
    pub gamma_in: f64,
    pub beta_in: f64,
    pub gamma_out: f64,
    pub beta_out: f64,
    pub r2: f64,
    pub n_score: usize,
    pub z: f64,
}

impl SymbolicFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.gamma_out * self.candidate.eval(self.gamma_in * x + self.beta_in) + self.beta_out
    }
}

/// Coefficient of determination R² = 1 − SS_res/SS_tot.
///
/// Degenerate constant targets (SS_tot = 0) give 1 on an exact fit and −∞
/// otherwise, so they never beat a genuine fit.
pub fn r2_score(targets: &[f64], predictions: &[f64]) -> f64 {
    assert_eq!(targets.len(), predictions.len());
    assert!(!targets.is_empty());
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Combined selection score Z = R² + λ/N.
pub fn combined_score(r2: f64, n_score: usize, lambda: f64) -> f64 {
    assert!(n_score >= 1, "n_score must be >= 1");
    r2 + lambda / n_score as f64
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|t| lo + t as f64 * step).collect()
}

/// Outer least squares of `y ≈ γₒ·u + βₒ`; degenerate predictors (constant
/// u) collapse to the mean fit γₒ = 0, βₒ = ȳ.
fn outer_least_squares(u: &[f64], y: &[f64]) -> (f64, f64) {
    let n = u.len() as f64;
    let um = u.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut var = 0.0;
    let mut cov = 0.0;
    for (&ui, &yi) in u.iter().zip(y) {
        var += (ui - um) * (ui - um);
        cov += (ui - um) * (yi - ym);
    }
    let scale = u.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if var <= 1e-14 * scale {
        (0.0, ym)
    } else {
        let g = cov / var;
        (g, ym - g * um)
    }
}

/// Evaluates one (γᵢ, βᵢ) grid point; `None` when any transformed input
/// leaves the candidate's domain or produces a non-finite value.
fn grid_point_fit(
    samples: &[(f64, f64)],
    candidate: &Candidate,
    gamma_in: f64,
    beta_in: f64,
) -> Option<(f64, f64, f64)> {
    let mut u = Vec::with_capacity(samples.len());
    for &(x, _) in samples {
        let t = gamma_in * x + beta_in;
        if !candidate.in_domain(t) {
            return None;
        }
        let v = candidate.eval(t);
        if !v.is_finite() {
            return None;
        }
        u.push(v);
    }
    let y: Vec<f64> = samples.iter().map(|&(_, y)| y).collect();
    let (gamma_out, beta_out) = outer_least_squares(&u, &y);
    let preds: Vec<f64> = u.iter().map(|&ui| gamma_out * ui + beta_out).collect();
    let r2 = r2_score(&y, &preds);
    if !r2.is_finite() {
        return None;
    }
    Some((gamma_out, beta_out, r2))
}

/// Fits one candidate to `(x, φ(x))` samples: coarse 41×41 grid over
/// [−range, range]², one 1/10-spacing refinement around the winner, outer
/// parameters by least squares, and N(φ̂) scored on `interval`.
pub fn fit_candidate(
    samples: &[(f64, f64)],
    candidate: &Candidate,
    interval: (f64, f64),
    params: &SymbolifyParams,
) -> Result<SymbolicFit> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "fit_candidate needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    if params.grid.coarse < 2 || params.grid.refine < 1 || params.grid.range <= 0.0 {
        return Err(Error::InvalidParameter(
            "grid spec needs coarse >= 2, refine >= 1, range > 0".into(),
        ));
    }

    let mut best: Option<(f64, f64, f64, f64, f64)> = None; // (r2, γi, βi, γo, βo)
    let consider = |gi: f64, bi: f64, best: &mut Option<(f64, f64, f64, f64, f64)>| {
        if let Some((go, bo, r2)) = grid_point_fit(samples, candidate, gi, bi) {
            if best.map_or(true, |(r, ..)| r2 > r) {
                *best = Some((r2, gi, bi, go, bo));
            }
        }
    };

    let axis = linspace(-params.grid.range, params.grid.range, params.grid.coarse);
    for &gi in &axis {
        for &bi in &axis {
            consider(gi, bi, &mut best);
        }
    }
    let (_, coarse_gi, coarse_bi, ..) = best.ok_or_else(|| Error::CandidateDomain {
        candidate: candidate.id.clone(),
    })?;

    let coarse_step = 2.0 * params.grid.range / (params.grid.coarse - 1) as f64;
    let fine_step = coarse_step / 10.0;
    let half = fine_step * (params.grid.refine - 1) as f64 / 2.0;
    let gi_axis = linspace(coarse_gi - half, coarse_gi + half, params.grid.refine);
    let bi_axis = linspace(coarse_bi - half, coarse_bi + half, params.grid.refine);
    for &gi in &gi_axis {
        for &bi in &bi_axis {
            consider(gi, bi, &mut best);
        }
    }

    let (r2, gamma_in, beta_in, gamma_out, beta_out) = best.expect("coarse stage found a point");
    let expr = move |x: f64| gamma_out * candidate.eval(gamma_in * x + beta_in) + beta_out;
    let n_score = nonlinearity_score(expr, interval, &params.nonlinearity)?;
    Ok(SymbolicFit {
        candidate: candidate.clone(),
        gamma_in,
        beta_in,
        gamma_out,
        beta_out,
        r2,
        n_score,
        z: combined_score(r2, n_score, params.lambda),
    })
}

/// Converts one activation's samples to the best symbolic fit across the
/// library (highest Z; ties resolve to the earliest candidate).
///
/// Constant activations short-circuit to an exact constant expression on the
/// identity candidate (γₒ = 0, βₒ = the constant): R² = 1, N = 1.
pub fn symbolify_activation(
    samples: &[(f64, f64)],
    library: &CandidateLibrary,
    interval: (f64, f64),
    params: &SymbolifyParams,
) -> Result<SymbolicFit> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "symbolify_activation needs >= 2 samples, got {}",
            samples.len()
        )));
    }

    let mean = samples.iter().map(|&(_, y)| y).sum::<f64>() / samples.len() as f64;
    let ss_tot: f64 = samples.iter().map(|&(_, y)| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Ok(SymbolicFit {
            candidate: builtin_candidate("identity").expect("identity is builtin"),
            gamma_in: 1.0,
            beta_in: 0.0,
            gamma_out: 0.0,
            beta_out: mean,
            r2: 1.0,
            n_score: 1,
            z: combined_score(1.0, 1, params.lambda),
        });
    }

    let mut best: Option<SymbolicFit> = None;
    let mut last_err = None;
    for candidate in library.candidates() {
        match fit_candidate(samples, candidate, interval, params) {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.z > b.z) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("no fit implies at least one error"))
}

/// One row of the per-edge conversion report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EdgeFitRecord {
    pub side: String,
    pub layer: usize,
    /// Input index i of the edge (i → j).
    pub i: usize,
    /// Output index j.
    pub j: usize,
    pub candidate: String,
    pub r2: f64,
    pub n_score: usize,
    pub z: f64,
}

/// Replaces every active spline edge of a KAN model with its best symbolic
/// fit. Pruned edges stay pruned; layer intervals and the power scale carry
/// over unchanged.
pub fn symbolify_model(
    model: &AutoencoderModel,
    library: &CandidateLibrary,
    params: &SymbolifyParams,
) -> Result<(AutoencoderModel, Vec<EdgeFitRecord>)> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if params.samples_per_edge < 2 {
        return Err(Error::InvalidParameter(
            "samples_per_edge must be >= 2".into(),
        ));
    }

    let mut records = Vec::new();
    let mut convert_side = |side: &str, layers: &[Layer]| -> Result<Vec<Layer>> {
        layers
            .iter()
            .enumerate()
            .map(|(layer_idx, layer)| {
                let kan = match layer {
                    Layer::Kan(kan) => kan,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "symbolify_model expects KAN layers; {side} layer {layer_idx} is {}",
                            other.kind_label()
                        )))
                    }
                };
                let (sym, mut recs) =
                    symbolify_kan_layer(kan, side, layer_idx, library, params)?;
                records.append(&mut recs);
                Ok(Layer::Symbolic(sym))
            })
            .collect()
    };

    let encoder = convert_side("encoder", model.encoder())?;
    let decoder = convert_side("decoder", model.decoder())?;
    let converted = AutoencoderModel::new(model.n(), model.k(), encoder, decoder)?
        .with_power_scale(model.power_scale())?;
    Ok((converted, records))
}

fn symbolify_kan_layer(
    kan: &KanLayer,
    side: &str,
    layer_idx: usize,
    library: &CandidateLibrary,
    params: &SymbolifyParams,
) -> Result<(SymbolicLayer, Vec<EdgeFitRecord>)> {
    let interval = kan.grid().interval();
    let xs = linspace(interval.0, interval.1, params.samples_per_edge);
    let (d_in, d_out) = (kan.d_in(), kan.d_out());

    let fits: Vec<Result<Option<SymbolicFit>>> = (0..d_out * d_in)
        .into_par_iter()
        .map(|flat| {
            let (j, i) = (flat / d_in, flat % d_in);
            let edge = kan.edge(j, i);
            if !edge.active {
                return Ok(None);
            }
            let samples: Vec<(f64, f64)> =
                xs.iter().map(|&x| (x, edge.eval(kan.grid(), x))).collect();
            symbolify_activation(&samples, library, interval, params)
                .map(Some)
                .map_err(|e| Error::SymbolifyEdge {
                    layer: format!("{side} layer {layer_idx}"),
                    output: j,
                    input: i,
                    source: Box::new(e),
                })
        })
        .collect();

    let mut edges = Vec::with_capacity(d_out * d_in);
    let mut records = Vec::new();
    for (flat, fit) in fits.into_iter().enumerate() {
        let (j, i) = (flat / d_in, flat % d_in);
        match fit? {
            Some(fit) => {
                records.push(EdgeFitRecord {
                    side: side.into(),
                    layer: layer_idx,
                    i,
                    j,
                    candidate: fit.candidate.id().into(),
                    r2: fit.r2,
                    n_score: fit.n_score,
                    z: fit.z,
                });
                edges.push(SymbolicEdge {
                    candidate: fit.candidate,
                    gamma_in: fit.gamma_in,
                    beta_in: fit.beta_in,
                    gamma_out: fit.gamma_out,
                    beta_out: fit.beta_out,
                    active: true,
                });
            }
            None => edges.push(SymbolicEdge::inactive_placeholder()),
        }
    }
    Ok((SymbolicLayer::new(d_in, d_out, interval, edges)?, records))
}
