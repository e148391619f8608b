//! Piecewise-linear non-linearity scoring.
//!
//! The score N(f) of a scalar function on an interval is the smallest number
//! of uniform sub-intervals such that the total squared residual of per-
//! segment least-squares line fits falls below a tolerance ε:
//!
//! ```text
//! E(N) = Σⱼ eⱼ,   eⱼ = ∫ |f(x) − (mⱼx + kⱼ)|² dx over segment j,
//! N(f) = min { N ≥ 1 : E(N) < ε }.
//! ```
//!
//! A cheap function (near-linear) needs few segments; an oscillatory one
//! needs many. Aggregating per-activation scores gives a network-level
//! complexity proxy Q that can be compared across MLP, KAN, and classical
//! ML detector implementations of the same (n, k) code.

use crate::error::{Error, Result};

/// Tolerance and discretization knobs for [`nonlinearity_score`].
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityParams {
    /// Total-residual tolerance ε.
    pub epsilon: f64,
    /// Uniform samples per segment for the trapezoid discretization.
    pub samples_per_segment: usize,
    /// Search cap; exceeding it is an error, not a score.
    pub n_max: usize,
}

impl NonlinearityParams {
    pub fn new(epsilon: f64, samples_per_segment: usize, n_max: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and > 0, got {epsilon}"
            )));
        }
        if samples_per_segment < 8 {
            return Err(Error::InvalidParameter(format!(
                "samples_per_segment must be >= 8, got {samples_per_segment}"
            )));
        }
        if n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        Ok(NonlinearityParams {
            epsilon,
            samples_per_segment,
            n_max,
        })
    }

    /// Same discretization, different tolerance.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        NonlinearityParams::new(epsilon, self.samples_per_segment, self.n_max)
    }
}

impl Default for NonlinearityParams {
    /// ε = 1e-2 (the symbolic-regression operating point), 64 samples per
    /// segment, N capped at 10,000.
    fn default() -> Self {
        NonlinearityParams {
            epsilon: 1e-2,
            samples_per_segment: 64,
            n_max: 10_000,
        }
    }
}

/// Least-squares line fit of `f` on `[a, b]`, returning `(m, k, e)` where
/// `ψ(x) = m·x + k` and `e ≈ ∫ |f − ψ|² dx` by the trapezoid rule.
///
/// The fit minimizes the same trapezoid-weighted objective that `e` reports,
/// so at moderate oversampling both converge to the continuous L2 projection
/// (f(x) = x² on [0, 1] already recovers m = 1, k = −1/6, e = 1/180 to well
/// under a percent at 64 samples).
pub fn fit_segment(f: impl Fn(f64) -> f64, a: f64, b: f64, samples: usize) -> Result<(f64, f64, f64)> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidParameter(format!(
            "segment must satisfy a < b with finite bounds, got [{a}, {b}]"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "segment fit needs >= 2 samples, got {samples}"
        )));
    }
    let h = (b - a) / (samples - 1) as f64;

    // Trapezoid weights h·[1/2, 1, …, 1, 1/2]; weighted least squares in
    // closed form from the 2×2 normal equations.
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut pts = Vec::with_capacity(samples);
    for t in 0..samples {
        let x = a + t as f64 * h;
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::non_finite(format!("segment sample f({x})")));
        }
        let w = if t == 0 || t == samples - 1 { 0.5 * h } else { h };
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        pts.push((x, y, w));
    }
    let denom = sw * sxx - sx * sx;
    let (m, k) = if denom.abs() < 1e-300 {
        (0.0, sy / sw)
    } else {
        let m = (sw * sxy - sx * sy) / denom;
        (m, (sy - m * sx) / sw)
    };
    let e: f64 = pts
        .iter()
        .map(|&(x, y, w)| {
            let r = y - (m * x + k);
            w * r * r
        })
        .sum();
    Ok((m, k, e))
}

/// Total residual `E(N) = Σⱼ eⱼ` over `n` uniform segments of `interval`.
pub fn total_error(
    f: impl Fn(f64) -> f64,
    interval: (f64, f64),
    n: usize,
    samples_per_segment: usize,
) -> Result<f64> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidParameter(format!(
            "interval must satisfy a < b with finite bounds, got ({a}, {b})"
        )));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("segment count must be >= 1".into()));
    }
    let width = (b - a) / n as f64;
    let mut total = 0.0;
    for j in 0..n {
        let lo = a + j as f64 * width;
        let hi = if j + 1 == n { b } else { a + (j + 1) as f64 * width };
        let (_, _, e) = fit_segment(&f, lo, hi, samples_per_segment)?;
        total += e;
    }
    Ok(total)
}

/// The non-linearity score N(f): the smallest segment count whose total
/// residual is below `params.epsilon`, searching N = 1, 2, 3, … (E(N) is not
/// monotone in N for uniform partitions, so the linear scan is load-bearing.)
pub fn nonlinearity_score(
    f: impl Fn(f64) -> f64,
    interval: (f64, f64),
    params: &NonlinearityParams,
) -> Result<usize> {
    let mut last = f64::INFINITY;
    for n in 1..=params.n_max {
        last = total_error(&f, interval, n, params.samples_per_segment)?;
        if last < params.epsilon {
            return Ok(n);
        }
    }
    Err(Error::NonlinearityExceeded {
        n_max: params.n_max,
        residual: last,
    })
}

/// Network-level score for an MLP:
/// `Q = Σ_l d_l · (d_{l−1} + N(σ⁽ˡ⁾))` with the activation scores supplied
/// per layer (convention: ReLU → 2, no activation → 0).
pub fn mlp_network_score(layer_dims: &[usize], activation_scores: &[u64]) -> Result<u64> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidParameter(
            "mlp_network_score needs at least input and output dims".into(),
        ));
    }
    if activation_scores.len() != layer_dims.len() - 1 {
        return Err(Error::dim(
            "mlp_network_score activation scores",
            layer_dims.len() - 1,
            activation_scores.len(),
        ));
    }
    let mut q: u64 = 0;
    for l in 1..layer_dims.len() {
        let d_out = layer_dims[l] as u64;
        let d_in = layer_dims[l - 1] as u64;
        q += d_out * (d_in + activation_scores[l - 1]);
    }
    Ok(q)
}

/// Score of the classical maximum-likelihood detector for an (n, k) block
/// code: `n² · 2^k` linear operations, no non-linear terms.
pub fn baseline_mld_score(n: usize, k: usize) -> u64 {
    assert!(n > 0 && k > 0, "baseline_mld_score needs positive n, k");
    assert!(k < 32, "baseline_mld_score: 2^k overflows the supported range");
    (n as u64) * (n as u64) * (1u64 << k)
}

/// N(φ̂) for one active symbolic edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeScore {
    /// Output index j of the edge i → j.
    pub output: usize,
    /// Input index i.
    pub input: usize,
    pub candidate: String,
    pub n_score: u64,
}

/// Scores every active edge of a symbolic layer on the layer's interval,
/// row-major (all inputs of output 0 first).
pub fn symbolic_layer_scores(
    layer: &crate::network::SymbolicLayer,
    params: &NonlinearityParams,
) -> Result<Vec<EdgeScore>> {
    let interval = layer.interval();
    let mut out = Vec::new();
    for j in 0..layer.d_out() {
        for i in 0..layer.d_in() {
            let e = layer.edge(j, i);
            if !e.active {
                continue;
            }
            let n = nonlinearity_score(|x| e.eval_raw(x), interval, params)?;
            out.push(EdgeScore {
                output: j,
                input: i,
                candidate: e.candidate.id().to_string(),
                n_score: n as u64,
            });
        }
    }
    Ok(out)
}

/// Q for a symbolically converted autoencoder: the sum of N(φ̂) over every
/// active edge (encoder and decoder). Fully pruned KAN layers contribute
/// zero; a layer still carrying active raw spline edges is not scoreable in
/// closed form and is reported as [`Error::NotSymbolic`].
pub fn kan_network_score(
    model: &crate::autoencoder::AutoencoderModel,
    params: &NonlinearityParams,
) -> Result<u64> {
    use crate::network::Layer;
    let mut total: u64 = 0;
    let sides = [("encoder", model.encoder()), ("decoder", model.decoder())];
    for (side, layers) in sides {
        for (idx, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Symbolic(sym) => {
                    for s in symbolic_layer_scores(sym, params)? {
                        total += s.n_score;
                    }
                }
                Layer::Kan(kan) => {
                    if kan.edges().iter().any(|e| e.active) {
                        return Err(Error::NotSymbolic {
                            layer: format!("{side} layer {idx} (kan)"),
                        });
                    }
                }
                Layer::Mlp(_) => {
                    return Err(Error::NotSymbolic {
                        layer: format!("{side} layer {idx} (mlp)"),
                    });
                }
            }
        }
    }
    Ok(total)
}

/// Q for a pure-MLP autoencoder: Σ d_out·(d_in + N(σ)) over all layers of
/// both halves.
pub fn mlp_model_score(model: &crate::autoencoder::AutoencoderModel) -> Result<u64> {
    use crate::network::Layer;
    let mut total: u64 = 0;
    for layer in model.encoder().iter().chain(model.decoder()) {
        let Layer::Mlp(mlp) = layer else {
            return Err(Error::InvalidParameter(format!(
                "mlp_model_score expects MLP layers, found {}",
                layer.kind_label()
            )));
        };
        total += mlp.d_out() as u64 * (mlp.d_in() as u64 + mlp.activation().score());
    }
    Ok(total)
}
