//! Network layers and training primitives.
//!
//! Three layer kinds share one [`Layer`] interface:
//!
//! * [`KanLayer`] — every edge i → j carries its own learnable activation
//!   `φ(x) = w_b·SiLU(x) + w_s·Σ c_r·B_r(x)` on a shared [`SplineGrid`];
//!   node outputs are plain sums of incoming active edges.
//! * [`MlpLayer`] — affine map plus a fixed activation (the conventional
//!   baseline).
//! * [`SymbolicLayer`] — a KAN layer after symbolic conversion, each active
//!   edge a closed-form `γₒ·f(γᵢx + βᵢ) + βₒ`.
//!
//! Gradients are hand-derived and exposed through [`loss_and_gradients`] as
//! one flat vector matching the model's parameter layout; [`adam_step`]
//! consumes that same layout. Pruning ([`prune_stack`]) deactivates edges or
//! whole hidden neurons by the mean-|φ| magnitude criterion.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{depair_complex, pair_complex, AutoencoderModel};
use crate::error::{Error, Result};
use crate::splines::{grid_refit_batch, SplineGrid};
use crate::symreg::Candidate;

/// SiLU (swish) basis function: `x·σ(x)`.
pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Derivative of SiLU: `σ(x)·(1 + x·(1 − σ(x)))`.
pub fn silu_deriv(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Fixed MLP activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::None => x,
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }

    /// Non-linearity score contribution per unit: ReLU is exactly
    /// two-segment piecewise linear (N = 2), identity needs one.
    pub fn score(self) -> u64 {
        match self {
            Activation::Relu => 2,
            Activation::None => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::None => "none",
        }
    }
}

/// One learnable edge activation of a KAN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct KanEdge {
    /// Spline coefficients, one per basis function of the layer grid.
    pub coeffs: Vec<f64>,
    /// Weight of the SiLU basis term.
    pub w_b: f64,
    /// Weight of the spline term.
    pub w_s: f64,
    /// Pruned edges stay in place (stable parameter layout) but contribute
    /// nothing and receive zero gradients.
    pub active: bool,
}

impl KanEdge {
    /// Full activation value `w_b·SiLU(x) + w_s·spline(x)`.
    pub fn eval(&self, grid: &SplineGrid, x: f64) -> f64 {
        self.w_b * silu(x) + self.w_s * grid.spline_value(&self.coeffs, x)
    }
}

/// A Kolmogorov–Arnold layer: `d_out × d_in` edges sharing one spline grid.
/// Edges are stored row-major (`j·d_in + i` for edge i → j).
#[derive(Debug, Clone)]
pub struct KanLayer {
    d_in: usize,
    d_out: usize,
    grid: SplineGrid,
    edges: Vec<KanEdge>,
}

impl KanLayer {
    /// Fresh layer: spline coefficients ~ N(0, 0.1²), `w_b = w_s = 1`, all
    /// edges active. Draws coefficients edge by edge in row-major order, so
    /// layer initialization is a pure function of the RNG stream.
    pub fn new(d_in: usize, d_out: usize, grid: SplineGrid, rng: &mut impl Rng) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidParameter(
                "layer dimensions must be positive".into(),
            ));
        }
        let normal = Normal::new(0.0, 0.1).expect("valid std");
        let nb = grid.basis_count();
        let edges = (0..d_in * d_out)
            .map(|_| KanEdge {
                coeffs: (0..nb).map(|_| normal.sample(rng)).collect(),
                w_b: 1.0,
                w_s: 1.0,
                active: true,
            })
            .collect();
        Ok(KanLayer {
            d_in,
            d_out,
            grid,
            edges,
        })
    }

    /// Reassembles a layer from stored parts (model deserialization).
    pub fn from_parts(
        d_in: usize,
        d_out: usize,
        grid: SplineGrid,
        edges: Vec<KanEdge>,
    ) -> Result<Self> {
        if edges.len() != d_in * d_out {
            return Err(Error::dim("KAN edge count", d_in * d_out, edges.len()));
        }
        let nb = grid.basis_count();
        for e in &edges {
            if e.coeffs.len() != nb {
                return Err(Error::dim("KAN edge coefficients", nb, e.coeffs.len()));
            }
        }
        Ok(KanLayer {
            d_in,
            d_out,
            grid,
            edges,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn edges(&self) -> &[KanEdge] {
        &self.edges
    }

    pub fn edge(&self, output: usize, input: usize) -> &KanEdge {
        &self.edges[output * self.d_in + input]
    }

    pub fn edge_mut(&mut self, output: usize, input: usize) -> &mut KanEdge {
        &mut self.edges[output * self.d_in + input]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.d_in {
            return Err(Error::dim("KAN layer input", self.d_in, input.len()));
        }
        Ok(())
    }

    /// `out_j = Σ_i φ_{j,i}(x_i)` over active edges. The basis is evaluated
    /// once per input coordinate and shared across all outputs.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut out = vec![0.0; self.d_out];
        let p = self.grid.degree();
        for (i, &x) in input.iter().enumerate() {
            let lb = self.grid.local_basis(x, false);
            let silu_v = silu(x);
            let base = lb.span - p;
            for j in 0..self.d_out {
                let e = &self.edges[j * self.d_in + i];
                if !e.active {
                    continue;
                }
                let mut spline_v = 0.0;
                for r in 0..=p {
                    spline_v += e.coeffs[base + r] * lb.values[r];
                }
                out[j] += e.w_b * silu_v + e.w_s * spline_v;
            }
        }
        Ok(out)
    }

    /// Forward pass for a one-hot input (coordinate `hot` is 1, the rest 0):
    /// equals the dense evaluation, with zero coordinates contributing φ(0).
    /// The two basis evaluations are hoisted out of the edge loop, which is
    /// what makes codebook enumeration over 2^k messages cheap.
    pub fn forward_onehot(&self, hot: usize) -> Result<Vec<f64>> {
        if hot >= self.d_in {
            return Err(Error::dim("one-hot index", self.d_in, hot));
        }
        let p = self.grid.degree();
        let lb0 = self.grid.local_basis(0.0, false);
        let lb1 = self.grid.local_basis(1.0, false);
        let silu1 = silu(1.0); // SiLU(0) = 0
        let mut out = vec![0.0; self.d_out];
        for j in 0..self.d_out {
            for i in 0..self.d_in {
                let e = &self.edges[j * self.d_in + i];
                if !e.active {
                    continue;
                }
                let (lb, silu_v) = if i == hot { (&lb1, silu1) } else { (&lb0, 0.0) };
                let base = lb.span - p;
                let mut spline_v = 0.0;
                for r in 0..=p {
                    spline_v += e.coeffs[base + r] * lb.values[r];
                }
                out[j] += e.w_b * silu_v + e.w_s * spline_v;
            }
        }
        Ok(out)
    }

    fn backward(&self, input: &[f64], upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        if upstream.len() != self.d_out {
            return Err(Error::dim("KAN upstream gradient", self.d_out, upstream.len()));
        }
        let nb = self.grid.basis_count();
        let per_edge = nb + 2;
        debug_assert_eq!(grads.len(), self.edges.len() * per_edge);
        let p = self.grid.degree();
        let mut down = vec![0.0; self.d_in];
        for (i, &x) in input.iter().enumerate() {
            let lb = self.grid.local_basis(x, true);
            let silu_v = silu(x);
            let silu_d = silu_deriv(x);
            let base = lb.span - p;
            for j in 0..self.d_out {
                let e = &self.edges[j * self.d_in + i];
                if !e.active {
                    continue;
                }
                let up = upstream[j];
                let off = (j * self.d_in + i) * per_edge;
                let mut spline_v = 0.0;
                let mut spline_d = 0.0;
                for r in 0..=p {
                    let c = e.coeffs[base + r];
                    spline_v += c * lb.values[r];
                    spline_d += c * lb.derivs[r];
                    grads[off + base + r] += up * e.w_s * lb.values[r];
                }
                grads[off + nb] += up * silu_v;
                grads[off + nb + 1] += up * spline_v;
                down[i] += up * (e.w_b * silu_d + e.w_s * spline_d);
            }
        }
        Ok(down)
    }

    /// Refits the shared grid to the observed input range (all edges at
    /// once, including inactive ones so their coefficients stay meaningful).
    pub fn refit_grid(&mut self, samples: &[f64]) -> Result<()> {
        let sets: Vec<Vec<f64>> = self.edges.iter().map(|e| e.coeffs.clone()).collect();
        let (new_grid, refit) = grid_refit_batch(&self.grid, &sets, samples, None)?;
        for (e, c) in self.edges.iter_mut().zip(refit) {
            e.coeffs = c;
        }
        self.grid = new_grid;
        Ok(())
    }

    fn param_count(&self) -> usize {
        self.edges.len() * (self.grid.basis_count() + 2)
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        for e in &self.edges {
            out.extend_from_slice(&e.coeffs);
            out.push(e.w_b);
            out.push(e.w_s);
        }
    }

    fn read_params(&mut self, src: &[f64]) {
        let nb = self.grid.basis_count();
        for (e, chunk) in self.edges.iter_mut().zip(src.chunks_exact(nb + 2)) {
            e.coeffs.copy_from_slice(&chunk[..nb]);
            e.w_b = chunk[nb];
            e.w_s = chunk[nb + 1];
        }
    }
}

/// A conventional dense layer `σ(Wx + b)` with weights stored row-major.
#[derive(Debug, Clone)]
pub struct MlpLayer {
    d_in: usize,
    d_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl MlpLayer {
    /// Kaiming-uniform initialization: weights ~ U(−1/√d_in, 1/√d_in),
    /// biases zero.
    pub fn new(
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidParameter(
                "layer dimensions must be positive".into(),
            ));
        }
        let bound = 1.0 / (d_in as f64).sqrt();
        let uniform = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        let weights = (0..d_in * d_out).map(|_| uniform.sample(rng)).collect();
        Ok(MlpLayer {
            d_in,
            d_out,
            weights,
            bias: vec![0.0; d_out],
            activation,
        })
    }

    pub fn from_parts(
        d_in: usize,
        d_out: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != d_in * d_out {
            return Err(Error::dim("MLP weights", d_in * d_out, weights.len()));
        }
        if bias.len() != d_out {
            return Err(Error::dim("MLP bias", d_out, bias.len()));
        }
        Ok(MlpLayer {
            d_in,
            d_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn pre_activation(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.d_in {
            return Err(Error::dim("MLP layer input", self.d_in, input.len()));
        }
        let mut z = self.bias.clone();
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &self.weights[j * self.d_in..(j + 1) * self.d_in];
            *zj += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
        Ok(z)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.pre_activation(input)?;
        for v in &mut z {
            *v = self.activation.apply(*v);
        }
        Ok(z)
    }

    pub fn forward_onehot(&self, hot: usize) -> Result<Vec<f64>> {
        if hot >= self.d_in {
            return Err(Error::dim("one-hot index", self.d_in, hot));
        }
        Ok((0..self.d_out)
            .map(|j| self.activation.apply(self.weights[j * self.d_in + hot] + self.bias[j]))
            .collect())
    }

    fn backward(
        &self,
        input: &[f64],
        pre: &[f64],
        upstream: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        if upstream.len() != self.d_out {
            return Err(Error::dim("MLP upstream gradient", self.d_out, upstream.len()));
        }
        debug_assert_eq!(grads.len(), self.param_count());
        let w_len = self.weights.len();
        let mut down = vec![0.0; self.d_in];
        for j in 0..self.d_out {
            let dz = upstream[j] * self.activation.deriv(pre[j]);
            if dz == 0.0 {
                continue;
            }
            let row = j * self.d_in;
            for i in 0..self.d_in {
                grads[row + i] += dz * input[i];
                down[i] += dz * self.weights[row + i];
            }
            grads[w_len + j] += dz;
        }
        Ok(down)
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    fn read_params(&mut self, src: &[f64]) {
        let w = self.weights.len();
        self.weights.copy_from_slice(&src[..w]);
        self.bias.copy_from_slice(&src[w..]);
    }
}

/// A closed-form edge activation `γₒ·f(γᵢ·x + βᵢ) + βₒ`.
#[derive(Debug, Clone)]
pub struct SymbolicEdge {
    pub candidate: Candidate,
    pub gamma_in: f64,
    pub beta_in: f64,
    pub gamma_out: f64,
    pub beta_out: f64,
    pub active: bool,
}

impl SymbolicEdge {
    /// The placeholder stored where a pruned spline edge used to be.
    pub fn inactive_placeholder() -> Self {
        SymbolicEdge {
            candidate: crate::symreg::builtin_candidate("identity").expect("identity is builtin"),
            gamma_in: 1.0,
            beta_in: 0.0,
            gamma_out: 0.0,
            beta_out: 0.0,
            active: false,
        }
    }

    /// The transformed inner argument `γᵢ·x + βᵢ`.
    pub fn transformed(&self, x: f64) -> f64 {
        self.gamma_in * x + self.beta_in
    }

    /// Unchecked evaluation; may return non-finite values outside the
    /// candidate's domain.
    pub fn eval_raw(&self, x: f64) -> f64 {
        self.gamma_out * self.candidate.eval(self.transformed(x)) + self.beta_out
    }

    /// Domain-checked evaluation. `None` signals the inner argument left
    /// the candidate's domain (the caller knows the edge coordinates).
    pub fn eval(&self, x: f64) -> Option<f64> {
        let t = self.transformed(x);
        if !self.candidate.in_domain(t) {
            return None;
        }
        let v = self.eval_raw(x);
        v.is_finite().then_some(v)
    }

    /// Human-readable form, e.g. `0.5*sin(2*x + 0.3) + 0.1`. Inactive edges
    /// render as `0`.
    pub fn expression(&self) -> String {
        if !self.active {
            return "0".into();
        }
        let mut inner = if self.gamma_in == 1.0 {
            "x".to_string()
        } else {
            format!("{}*x", self.gamma_in)
        };
        if self.beta_in != 0.0 {
            inner = format!("{inner} {} {}", sign_word(self.beta_in), self.beta_in.abs());
        }
        if self.gamma_out == 0.0 {
            return format!("{}", self.beta_out);
        }
        let body = self.candidate.render(&inner);
        let mut expr = if self.gamma_out == 1.0 {
            body
        } else {
            format!("{}*{}", self.gamma_out, body)
        };
        if self.beta_out != 0.0 {
            expr = format!("{expr} {} {}", sign_word(self.beta_out), self.beta_out.abs());
        }
        expr
    }
}

fn sign_word(v: f64) -> &'static str {
    if v < 0.0 {
        "-"
    } else {
        "+"
    }
}

/// A layer of symbolic edges; `interval` is the spline-grid interval the
/// expressions were fitted (and are scored) on.
#[derive(Debug, Clone)]
pub struct SymbolicLayer {
    d_in: usize,
    d_out: usize,
    interval: (f64, f64),
    edges: Vec<SymbolicEdge>,
}

impl SymbolicLayer {
    pub fn new(
        d_in: usize,
        d_out: usize,
        interval: (f64, f64),
        edges: Vec<SymbolicEdge>,
    ) -> Result<Self> {
        if edges.len() != d_in * d_out {
            return Err(Error::dim("symbolic edge count", d_in * d_out, edges.len()));
        }
        if !interval.0.is_finite() || !interval.1.is_finite() || interval.0 >= interval.1 {
            return Err(Error::InvalidParameter(format!(
                "symbolic layer interval [{}, {}] is not a proper interval",
                interval.0, interval.1
            )));
        }
        Ok(SymbolicLayer {
            d_in,
            d_out,
            interval,
            edges,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn edges(&self) -> &[SymbolicEdge] {
        &self.edges
    }

    pub fn edge(&self, output: usize, input: usize) -> &SymbolicEdge {
        &self.edges[output * self.d_in + input]
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.d_in {
            return Err(Error::dim("symbolic layer input", self.d_in, input.len()));
        }
        let mut out = vec![0.0; self.d_out];
        for j in 0..self.d_out {
            for (i, &x) in input.iter().enumerate() {
                let e = &self.edges[j * self.d_in + i];
                if !e.active {
                    continue;
                }
                match e.eval(x) {
                    Some(v) => out[j] += v,
                    None => {
                        return Err(Error::SymbolicDomain {
                            candidate: e.candidate.id().into(),
                            output: j,
                            input: i,
                            value: e.transformed(x),
                        })
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Any layer of an autoencoder half.
#[derive(Debug, Clone)]
pub enum Layer {
    Kan(KanLayer),
    Mlp(MlpLayer),
    Symbolic(SymbolicLayer),
}

/// Per-layer values recorded by [`Layer::forward_train`] and consumed by
/// [`Layer::backward`].
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Vec<f64>,
    /// MLP pre-activations; empty for other layer kinds.
    pre: Vec<f64>,
}

impl Layer {
    pub fn d_in(&self) -> usize {
        match self {
            Layer::Kan(l) => l.d_in(),
            Layer::Mlp(l) => l.d_in(),
            Layer::Symbolic(l) => l.d_in(),
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            Layer::Kan(l) => l.d_out(),
            Layer::Mlp(l) => l.d_out(),
            Layer::Symbolic(l) => l.d_out(),
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            Layer::Kan(_) => "kan",
            Layer::Mlp(_) => "mlp",
            Layer::Symbolic(_) => "symbolic",
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        match self {
            Layer::Kan(l) => l.forward(input),
            Layer::Mlp(l) => l.forward(input),
            Layer::Symbolic(l) => l.forward(input),
        }
    }

    pub fn forward_onehot(&self, hot: usize) -> Result<Vec<f64>> {
        match self {
            Layer::Kan(l) => l.forward_onehot(hot),
            Layer::Mlp(l) => l.forward_onehot(hot),
            Layer::Symbolic(l) => {
                if hot >= l.d_in() {
                    return Err(Error::dim("one-hot index", l.d_in(), hot));
                }
                let mut input = vec![0.0; l.d_in()];
                input[hot] = 1.0;
                l.forward(&input)
            }
        }
    }

    /// Forward pass that records what [`Layer::backward`] needs.
    pub fn forward_train(&self, input: &[f64]) -> Result<(Vec<f64>, LayerCache)> {
        match self {
            Layer::Kan(l) => {
                let out = l.forward(input)?;
                Ok((
                    out,
                    LayerCache {
                        input: input.to_vec(),
                        pre: Vec::new(),
                    },
                ))
            }
            Layer::Mlp(l) => {
                let pre = l.pre_activation(input)?;
                let out = pre.iter().map(|&z| l.activation.apply(z)).collect();
                Ok((
                    out,
                    LayerCache {
                        input: input.to_vec(),
                        pre,
                    },
                ))
            }
            Layer::Symbolic(_) => Err(Error::InvalidParameter(
                "symbolic layers are not trainable".into(),
            )),
        }
    }

    /// Accumulates parameter gradients into this layer's `grads` region and
    /// returns the gradient with respect to the layer input.
    pub fn backward(
        &self,
        cache: &LayerCache,
        upstream: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        match self {
            Layer::Kan(l) => l.backward(&cache.input, upstream, grads),
            Layer::Mlp(l) => l.backward(&cache.input, &cache.pre, upstream, grads),
            Layer::Symbolic(_) => Err(Error::InvalidParameter(
                "symbolic layers are not trainable".into(),
            )),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Kan(l) => l.param_count(),
            Layer::Mlp(l) => l.param_count(),
            Layer::Symbolic(_) => 0,
        }
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            Layer::Kan(l) => l.write_params(out),
            Layer::Mlp(l) => l.write_params(out),
            Layer::Symbolic(_) => {}
        }
    }

    /// Reads this layer's parameters back from a flat slice sized by
    /// [`Layer::param_count`].
    pub fn read_params(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.param_count() {
            return Err(Error::dim("layer parameters", self.param_count(), src.len()));
        }
        match self {
            Layer::Kan(l) => l.read_params(src),
            Layer::Mlp(l) => l.read_params(src),
            Layer::Symbolic(_) => {}
        }
        Ok(())
    }

    pub fn as_kan(&self) -> Option<&KanLayer> {
        match self {
            Layer::Kan(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_kan_mut(&mut self) -> Option<&mut KanLayer> {
        match self {
            Layer::Kan(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_symbolic(&self) -> Option<&SymbolicLayer> {
        match self {
            Layer::Symbolic(l) => Some(l),
            _ => None,
        }
    }
}

/// Numerically stable softmax cross-entropy: returns the loss and
/// `∂L/∂logits = softmax(logits) − onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::dim("cross-entropy target", logits.len(), target));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::non_finite("cross-entropy logits"));
    }
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (logits[target] - max);
    let mut dlogits: Vec<f64> = exps.iter().map(|&e| e / z).collect();
    dlogits[target] -= 1.0;
    Ok((loss, dlogits))
}

/// One training example: a message index and the complex noise realization
/// added to the transmitted symbols. Pre-drawing the noise keeps the
/// gradient a deterministic function of the batch.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub message: usize,
    pub noise: Vec<Complex64>,
}

/// Gradient accumulation splits the batch into this many chunks, processed
/// in parallel and reduced in index order — results are bitwise independent
/// of thread scheduling.
const GRAD_CHUNKS: usize = 16;

/// Mean cross-entropy over the batch and its gradient with respect to every
/// model parameter (encoder layers first, then decoder, as one flat vector).
pub fn loss_and_gradients(
    model: &AutoencoderModel,
    batch: &[TrainSample],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty training batch".into()));
    }
    let symbols = model.n() / 2;
    for s in batch {
        if s.noise.len() != symbols {
            return Err(Error::dim("noise symbols", symbols, s.noise.len()));
        }
        if s.message >= model.message_count() {
            return Err(Error::MessageOutOfRange {
                index: s.message,
                count: model.message_count(),
            });
        }
    }

    let layout = model.param_layout();
    let total = model.param_count();
    let chunk_len = batch.len().div_ceil(GRAD_CHUNKS);
    let partials: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_chunks(chunk_len)
        .map(|chunk| {
            let mut grads = vec![0.0; total];
            let mut loss = 0.0;
            for sample in chunk {
                loss += accumulate_sample(model, sample, &layout, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect();

    let mut grads = vec![0.0; total];
    let mut loss = 0.0;
    for partial in partials {
        let (l, g) = partial?;
        loss += l;
        for (acc, v) in grads.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    let inv_b = 1.0 / batch.len() as f64;
    loss *= inv_b;
    for g in &mut grads {
        *g *= inv_b;
    }
    Ok((loss, grads))
}

fn accumulate_sample(
    model: &AutoencoderModel,
    sample: &TrainSample,
    layout: &[std::ops::Range<usize>],
    grads: &mut [f64],
) -> Result<f64> {
    let scale = model.power_scale();

    // Encoder forward.
    let mut v = model.one_hot(sample.message)?;
    let mut enc_caches = Vec::with_capacity(model.encoder().len());
    for layer in model.encoder() {
        let (out, cache) = layer.forward_train(&v)?;
        enc_caches.push(cache);
        v = out;
    }

    // Channel: scale to unit mean power, pair into symbols, add noise.
    let tx = pair_complex(&v.iter().map(|&x| x * scale).collect::<Vec<_>>())?;
    let rx: Vec<Complex64> = tx.iter().zip(&sample.noise).map(|(s, w)| s + w).collect();
    let mut d = depair_complex(&rx);

    // Decoder forward.
    let mut dec_caches = Vec::with_capacity(model.decoder().len());
    for layer in model.decoder() {
        let (out, cache) = layer.forward_train(&d)?;
        dec_caches.push(cache);
        d = out;
    }

    let (loss, mut upstream) = softmax_cross_entropy(&d, sample.message)?;

    // Decoder backward.
    let n_enc = model.encoder().len();
    for (l, layer) in model.decoder().iter().enumerate().rev() {
        let range = layout[n_enc + l].clone();
        upstream = layer.backward(&dec_caches[l], &upstream, &mut grads[range])?;
    }

    // Through the channel: received = scale·encoded + noise.
    for g in &mut upstream {
        *g *= scale;
    }

    // Encoder backward.
    for (l, layer) in model.encoder().iter().enumerate().rev() {
        let range = layout[l].clone();
        upstream = layer.backward(&enc_caches[l], &upstream, &mut grads[range])?;
    }

    Ok(loss)
}

/// Adam optimizer state over one flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize, alpha: f64) -> Self {
        AdamState {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Length of the flat parameter vector this state was sized for.
    pub fn param_count(&self) -> usize {
        self.m.len()
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::dim("Adam parameters", state.m.len(), params.len()));
    }
    if grads.len() != params.len() {
        return Err(Error::dim("Adam gradients", params.len(), grads.len()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::non_finite("Adam gradients"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.alpha * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Magnitude-pruning granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMode {
    /// Deactivate individual edges whose mean |φ| falls below η.
    Edge,
    /// Deactivate whole hidden neurons between consecutive KAN layers when
    /// either their strongest incoming or strongest outgoing edge falls
    /// below η.
    Neuron,
}

/// What [`prune_stack`] deactivated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PruneOutcome {
    pub edges: usize,
    pub neurons: usize,
}

/// Mean |φ_{j,i}(x_i)| over the batch for every edge (inactive edges score
/// zero). Row-major like the edge storage.
pub fn kan_edge_norms(layer: &KanLayer, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty calibration batch".into()));
    }
    let p = layer.grid.degree();
    let mut sums = vec![0.0; layer.edges.len()];
    for input in batch {
        layer.check_input(input)?;
        for (i, &x) in input.iter().enumerate() {
            let lb = layer.grid.local_basis(x, false);
            let silu_v = silu(x);
            let base = lb.span - p;
            for j in 0..layer.d_out {
                let e = &layer.edges[j * layer.d_in + i];
                if !e.active {
                    continue;
                }
                let mut spline_v = 0.0;
                for r in 0..=p {
                    spline_v += e.coeffs[base + r] * lb.values[r];
                }
                sums[j * layer.d_in + i] += (e.w_b * silu_v + e.w_s * spline_v).abs();
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for s in &mut sums {
        *s *= inv;
    }
    Ok(sums)
}

/// Prunes a stack of layers in place using activations produced by the
/// calibration `inputs`. Norms are measured on the unpruned network (one
/// forward sweep), then deactivations are applied in a single shot.
///
/// Edge mode treats every KAN layer independently. Neuron mode operates on
/// junctions between consecutive KAN layers and requires at least one such
/// junction ([`Error::SingleLayerNeuronPrune`] otherwise); a hidden neuron
/// survives only if both its strongest incoming and strongest outgoing edge
/// reach η.
pub fn prune_stack(
    layers: &mut [Layer],
    inputs: &[Vec<f64>],
    eta: f64,
    mode: PruneMode,
) -> Result<PruneOutcome> {
    if layers.is_empty() {
        return Err(Error::InvalidParameter("empty layer stack".into()));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pruning threshold must be positive and finite, got {eta}"
        )));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("empty calibration batch".into()));
    }

    // Pre-prune forward sweep: calibration batch at every layer input, and
    // edge norms for every KAN layer.
    let mut batch = inputs.to_vec();
    let mut norms: Vec<Option<Vec<f64>>> = Vec::with_capacity(layers.len());
    for layer in layers.iter() {
        norms.push(match layer {
            Layer::Kan(kan) => Some(kan_edge_norms(kan, &batch)?),
            _ => None,
        });
        batch = batch
            .iter()
            .map(|x| layer.forward(x))
            .collect::<Result<Vec<_>>>()?;
    }

    let mut outcome = PruneOutcome::default();
    match mode {
        PruneMode::Edge => {
            for (layer, layer_norms) in layers.iter_mut().zip(&norms) {
                let (Layer::Kan(kan), Some(layer_norms)) = (layer, layer_norms) else {
                    continue;
                };
                for (e, &norm) in kan.edges.iter_mut().zip(layer_norms) {
                    if e.active && norm < eta {
                        e.active = false;
                        outcome.edges += 1;
                    }
                }
            }
        }
        PruneMode::Neuron => {
            let mut junctions = Vec::new();
            for l in 0..layers.len().saturating_sub(1) {
                if layers[l].as_kan().is_some() && layers[l + 1].as_kan().is_some() {
                    junctions.push(l);
                }
            }
            if junctions.is_empty() {
                return Err(Error::SingleLayerNeuronPrune);
            }
            for l in junctions {
                let lower_norms = norms[l].as_ref().expect("KAN layer has norms");
                let upper_norms = norms[l + 1].as_ref().expect("KAN layer has norms");
                let (d_in, d_mid) = (layers[l].d_in(), layers[l].d_out());
                let d_out = layers[l + 1].d_out();
                for i in 0..d_mid {
                    let incoming = (0..d_in)
                        .map(|k| lower_norms[i * d_in + k])
                        .fold(0.0, f64::max);
                    let outgoing = (0..d_out)
                        .map(|j| upper_norms[j * d_mid + i])
                        .fold(0.0, f64::max);
                    if incoming >= eta && outgoing >= eta {
                        continue;
                    }
                    outcome.neurons += 1;
                    let lower = layers[l].as_kan_mut().expect("checked above");
                    for k in 0..d_in {
                        let e = lower.edge_mut(i, k);
                        if e.active {
                            e.active = false;
                            outcome.edges += 1;
                        }
                    }
                    let upper = layers[l + 1].as_kan_mut().expect("checked above");
                    for j in 0..d_out {
                        let e = upper.edge_mut(j, i);
                        if e.active {
                            e.active = false;
                            outcome.edges += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(outcome)
}
