//! (n, k) block-code autoencoders.
//!
//! A model maps a k-bit message (as a one-hot vector of length 2^k) through
//! an encoder stack to n real channel dimensions, pairs them into n/2
//! complex symbols scaled to unit mean power over the full codebook, and
//! decodes noisy observations back to 2^k logits. Detection is argmax — the
//! autoencoder analogue of maximum-likelihood lookup.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::Layer;
use crate::rng::{stream, Domain};
use crate::splines::SplineGrid;

/// Messages are bounded to k ≤ 12 so the one-hot width 2^k stays within a
/// few thousand; larger blocks need a different input encoding entirely.
pub const MAX_MESSAGE_BITS: usize = 12;

/// Packs interleaved reals `[a₀, a₁, a₂, a₃, …]` into complex symbols
/// `[a₀ + j·a₁, a₂ + j·a₃, …]`. Errors on odd input length.
pub fn pair_complex(values: &[f64]) -> Result<Vec<Complex64>> {
    if values.len() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot pair an odd number of reals ({})",
            values.len()
        )));
    }
    Ok(values
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect())
}

/// Inverse of [`pair_complex`].
pub fn depair_complex(symbols: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        out.push(s.re);
        out.push(s.im);
    }
    out
}

/// An (n, k) autoencoder: encoder and decoder layer stacks plus the codebook
/// power normalization factor.
#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    n: usize,
    k: usize,
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
    power_scale: f64,
}

impl AutoencoderModel {
    /// Validates the layer stacks against the (n, k) contract:
    /// 2^k → … → n and n → … → 2^k, with n even. The power scale starts at
    /// 1; call [`AutoencoderModel::normalize_codebook`] after construction
    /// (the `*_default` constructors do).
    pub fn new(n: usize, k: usize, encoder: Vec<Layer>, decoder: Vec<Layer>) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "block length n must be positive and even, got {n}"
            )));
        }
        if k == 0 || k > MAX_MESSAGE_BITS {
            return Err(Error::InvalidParameter(format!(
                "message bits k must be in 1..={MAX_MESSAGE_BITS}, got {k}"
            )));
        }
        let m = 1usize << k;
        check_stack("encoder", &encoder, m, n)?;
        check_stack("decoder", &decoder, n, m)?;
        Ok(AutoencoderModel {
            n,
            k,
            encoder,
            decoder,
            power_scale: 1.0,
        })
    }

    /// Restores a persisted power scale.
    pub fn with_power_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power scale must be positive and finite, got {scale}"
            )));
        }
        self.power_scale = scale;
        Ok(self)
    }

    /// The default KAN architecture: one spline layer per side, encoder grid
    /// on [0, 1] (one-hot inputs), decoder grid on [−2.2, 2.2] (noisy unit-
    /// power symbols rarely exceed it; training refits follow the data).
    pub fn kan_default(
        n: usize,
        k: usize,
        degree: usize,
        basis_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if basis_count <= degree {
            return Err(Error::InvalidParameter(format!(
                "basis_count ({basis_count}) must exceed spline degree ({degree})"
            )));
        }
        let g = basis_count - degree;
        let mut rng = stream(seed, Domain::Init, 0, 0);
        let m = 1usize << k;
        let enc_grid = SplineGrid::new(degree, (0.0, 1.0), g)?;
        let dec_grid = SplineGrid::new(degree, (-2.2, 2.2), g)?;
        let encoder = vec![Layer::Kan(crate::network::KanLayer::new(
            m, n, enc_grid, &mut rng,
        )?)];
        let decoder = vec![Layer::Kan(crate::network::KanLayer::new(
            n, m, dec_grid, &mut rng,
        )?)];
        let mut model = AutoencoderModel::new(n, k, encoder, decoder)?;
        model.normalize_codebook()?;
        Ok(model)
    }

    /// The MLP baseline: one hidden ReLU layer per side, linear outputs.
    pub fn mlp_default(n: usize, k: usize, hidden: usize, seed: u64) -> Result<Self> {
        use crate::network::{Activation, MlpLayer};
        if hidden == 0 {
            return Err(Error::InvalidParameter("hidden width must be positive".into()));
        }
        let mut rng = stream(seed, Domain::Init, 0, 0);
        let m = 1usize << k;
        let encoder = vec![
            Layer::Mlp(MlpLayer::new(m, hidden, Activation::Relu, &mut rng)?),
            Layer::Mlp(MlpLayer::new(hidden, n, Activation::None, &mut rng)?),
        ];
        let decoder = vec![
            Layer::Mlp(MlpLayer::new(n, hidden, Activation::Relu, &mut rng)?),
            Layer::Mlp(MlpLayer::new(hidden, m, Activation::None, &mut rng)?),
        ];
        let mut model = AutoencoderModel::new(n, k, encoder, decoder)?;
        model.normalize_codebook()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Code rate in information bits per real channel dimension.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn message_count(&self) -> usize {
        1 << self.k
    }

    pub fn encoder(&self) -> &[Layer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Layer] {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut [Layer] {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut [Layer] {
        &mut self.decoder
    }

    pub fn power_scale(&self) -> f64 {
        self.power_scale
    }

    /// "symbolic" if any layer has been converted, else "kan" if any layer
    /// is a spline layer, else "mlp".
    pub fn arch_label(&self) -> &'static str {
        let layers = self.encoder.iter().chain(&self.decoder);
        let mut has_kan = false;
        for l in layers {
            match l {
                Layer::Symbolic(_) => return "symbolic",
                Layer::Kan(_) => has_kan = true,
                Layer::Mlp(_) => {}
            }
        }
        if has_kan {
            "kan"
        } else {
            "mlp"
        }
    }

    pub fn one_hot(&self, message: usize) -> Result<Vec<f64>> {
        let m = self.message_count();
        if message >= m {
            return Err(Error::MessageOutOfRange {
                index: message,
                count: m,
            });
        }
        let mut v = vec![0.0; m];
        v[message] = 1.0;
        Ok(v)
    }

    /// Scaled encoder output for one message (length n, before pairing).
    pub fn encode_real(&self, message: usize) -> Result<Vec<f64>> {
        let mut v = self.raw_encode(message)?;
        for x in &mut v {
            *x *= self.power_scale;
        }
        Ok(v)
    }

    /// The transmitted symbols for one message: n/2 unit-mean-power complex
    /// symbols.
    pub fn encode(&self, message: usize) -> Result<Vec<Complex64>> {
        pair_complex(&self.encode_real(message)?)
    }

    /// Unscaled encoder output; the one-hot structure of the input is
    /// exploited on the first layer.
    fn raw_encode(&self, message: usize) -> Result<Vec<f64>> {
        if message >= self.message_count() {
            return Err(Error::MessageOutOfRange {
                index: message,
                count: self.message_count(),
            });
        }
        let mut v = self.encoder[0].forward_onehot(message)?;
        for layer in &self.encoder[1..] {
            v = layer.forward(&v)?;
        }
        Ok(v)
    }

    /// All 2^k transmitted codewords.
    pub fn codebook(&self) -> Result<Vec<Vec<Complex64>>> {
        (0..self.message_count()).map(|m| self.encode(m)).collect()
    }

    /// Sets the power scale so the codebook's mean symbol power is exactly
    /// one, and returns the new scale. Idempotent: the scale is recomputed
    /// from the unscaled codebook each time.
    pub fn normalize_codebook(&mut self) -> Result<f64> {
        let mut sum_sq = 0.0;
        for m in 0..self.message_count() {
            for x in self.raw_encode(m)? {
                sum_sq += x * x;
            }
        }
        if !sum_sq.is_finite() {
            return Err(Error::non_finite("codebook power"));
        }
        // Each symbol contributes two squared reals; mean power averages
        // over 2^k codewords of n/2 symbols.
        let mean_power = sum_sq / (self.message_count() as f64 * self.n as f64 / 2.0);
        if mean_power <= 0.0 {
            return Err(Error::ZeroCodebook);
        }
        self.power_scale = 1.0 / mean_power.sqrt();
        Ok(self.power_scale)
    }

    /// Runs the decoder on n received reals and returns the logits plus the
    /// detected message (argmax, lowest index on ties).
    pub fn decode_detect(&self, received: &[f64]) -> Result<(Vec<f64>, usize)> {
        if received.len() != self.n {
            return Err(Error::dim("decoder input", self.n, received.len()));
        }
        let mut v = received.to_vec();
        for layer in &self.decoder {
            v = layer.forward(&v)?;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::non_finite("decoder logits"));
        }
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        Ok((v, best))
    }

    pub fn param_count(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(|l| l.param_count())
            .sum()
    }

    /// Contiguous parameter ranges, one per layer (encoder layers first).
    pub fn param_layout(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges = Vec::with_capacity(self.encoder.len() + self.decoder.len());
        let mut offset = 0;
        for l in self.encoder.iter().chain(&self.decoder) {
            let c = l.param_count();
            ranges.push(offset..offset + c);
            offset += c;
        }
        ranges
    }

    /// All trainable parameters as one flat vector (the layout consumed by
    /// [`crate::network::loss_and_gradients`] and [`crate::network::adam_step`]).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.encoder.iter().chain(&self.decoder) {
            l.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim("model parameters", self.param_count(), params.len()));
        }
        let layout = self.param_layout();
        for (l, range) in self
            .encoder
            .iter_mut()
            .chain(&mut self.decoder)
            .zip(layout)
        {
            l.read_params(&params[range])?;
        }
        Ok(())
    }
}

fn check_stack(name: &str, layers: &[Layer], d_in: usize, d_out: usize) -> Result<()> {
    let Some(first) = layers.first() else {
        return Err(Error::InvalidParameter(format!("{name} stack is empty")));
    };
    if first.d_in() != d_in {
        return Err(Error::dim(format!("{name} input width"), d_in, first.d_in()));
    }
    for (l, pair) in layers.windows(2).enumerate() {
        if pair[0].d_out() != pair[1].d_in() {
            return Err(Error::dim(
                format!("{name} layer {} input width", l + 1),
                pair[0].d_out(),
                pair[1].d_in(),
            ));
        }
    }
    let last = layers.last().expect("nonempty");
    if last.d_out() != d_out {
        return Err(Error::dim(format!("{name} output width"), d_out, last.d_out()));
    }
    Ok(())
}
