//! Classical linear block-code baselines: the (24,12) extended binary Golay
//! code and the (8,4) extended Hamming code, QPSK mapping, and exhaustive
//! maximum-likelihood detection over the modulated codebook.
//!
//! The extended Golay generator is built the textbook way: systematic
//! encoding by the [23,12] perfect Golay generator polynomial
//! `g(x) = x¹¹ + x¹⁰ + x⁶ + x⁵ + x⁴ + x² + 1`, then an overall parity bit.
//! The (8,4) variant extends the [7,4] Hamming code (`g(x) = x³ + x + 1`)
//! the same way.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A binary linear block code with its full codebook precomputed, both as
/// packed bits and as QPSK symbol vectors.
#[derive(Debug, Clone)]
pub struct LinearBlockCode {
    n_bits: usize,
    k_bits: usize,
    /// Generator rows, one per information bit; bit `n−1−pos` of the word is
    /// codeword position `pos` (MSB-first layout).
    generator: Vec<u32>,
    /// Codeword bits for every message index, packed like the generator.
    codebook: Vec<u32>,
    /// QPSK-modulated codewords, `n/2` symbols each.
    modulated: Vec<Vec<Complex64>>,
}

/// Systematic cyclic encoding: `c(x) = m(x)·x^(n−k) + (m(x)·x^(n−k) mod g)`,
/// followed by an appended overall parity bit. Words are MSB-first.
fn extend_cyclic(message: u32, k: usize, n_cyclic: usize, generator_poly: u32) -> u32 {
    let parity_bits = n_cyclic - k;
    let mut rem = message << parity_bits;
    for bit in (parity_bits..n_cyclic).rev() {
        if rem >> bit & 1 == 1 {
            rem ^= generator_poly << (bit - parity_bits);
        }
    }
    let cyclic = (message << parity_bits) | rem;
    let overall = (cyclic.count_ones() & 1) as u32;
    (cyclic << 1) | overall
}

impl LinearBlockCode {
    /// The (24,12) extended binary Golay code (minimum distance 8).
    pub fn extended_golay() -> Self {
        // g(x) = x^11 + x^10 + x^6 + x^5 + x^4 + x^2 + 1
        const G23: u32 = 0b1100_0111_0101;
        Self::from_systematic_cyclic(24, 12, 23, G23)
    }

    /// The (8,4) extended Hamming code (minimum distance 4), a desk-scale
    /// stand-in with the same structure.
    pub fn extended_hamming84() -> Self {
        // g(x) = x^3 + x + 1
        const G7: u32 = 0b1011;
        Self::from_systematic_cyclic(8, 4, 7, G7)
    }

    fn from_systematic_cyclic(n: usize, k: usize, n_cyclic: usize, poly: u32) -> Self {
        let generator: Vec<u32> = (0..k)
            .map(|row| extend_cyclic(1 << (k - 1 - row), k, n_cyclic, poly))
            .collect();
        let codebook: Vec<u32> = (0..1usize << k)
            .map(|m| {
                let mut word = 0u32;
                for (row, &g) in generator.iter().enumerate() {
                    if m >> (k - 1 - row) & 1 == 1 {
                        word ^= g;
                    }
                }
                word
            })
            .collect();
        let modulated = codebook
            .iter()
            .map(|&word| {
                let bits: Vec<u8> = (0..n).map(|pos| (word >> (n - 1 - pos) & 1) as u8).collect();
                qpsk_map(&bits).expect("codeword length is even")
            })
            .collect();
        LinearBlockCode {
            n_bits: n,
            k_bits: k,
            generator,
            codebook,
            modulated,
        }
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn k_bits(&self) -> usize {
        self.k_bits
    }

    pub fn rate(&self) -> f64 {
        self.k_bits as f64 / self.n_bits as f64
    }

    pub fn message_count(&self) -> usize {
        1 << self.k_bits
    }

    /// Encodes an information bit vector (length k) to a codeword bit vector
    /// (length n) via the generator matrix over GF(2).
    pub fn encode_block(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k_bits {
            return Err(Error::dim("encode_block info bits", self.k_bits, info.len()));
        }
        let mut word = 0u32;
        for (row, &bit) in info.iter().enumerate() {
            if bit & 1 == 1 {
                word ^= self.generator[row];
            }
        }
        Ok(self.unpack(word))
    }

    /// Codeword bits for a message index (information bits = MSB-first
    /// binary expansion of the index).
    pub fn codeword_bits(&self, index: usize) -> Result<Vec<u8>> {
        self.check_index(index)?;
        Ok(self.unpack(self.codebook[index]))
    }

    /// QPSK symbols of the codeword at `index`.
    pub fn modulated(&self, index: usize) -> Result<&[Complex64]> {
        self.check_index(index)?;
        Ok(&self.modulated[index])
    }

    /// Maximum-likelihood detection: `argmax_c Re{s^H c}` over the full
    /// modulated codebook; the lowest index wins ties. For this equal-energy
    /// codebook the correlation rule coincides with minimum Euclidean
    /// distance.
    pub fn mld_detect(&self, received: &[Complex64]) -> Result<usize> {
        let n_sym = self.n_bits / 2;
        if received.len() != n_sym {
            return Err(Error::dim("mld_detect symbols", n_sym, received.len()));
        }
        let mut best = 0usize;
        let mut best_corr = f64::NEG_INFINITY;
        for (idx, cw) in self.modulated.iter().enumerate() {
            let corr: f64 = received
                .iter()
                .zip(cw)
                .map(|(s, c)| (s.conj() * c).re)
                .sum();
            if corr > best_corr {
                best_corr = corr;
                best = idx;
            }
        }
        Ok(best)
    }

    /// Hamming-weight histogram over the full codebook.
    pub fn weight_distribution(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut hist = std::collections::BTreeMap::new();
        for &word in &self.codebook {
            *hist.entry(word.count_ones() as usize).or_insert(0) += 1;
        }
        hist
    }

    /// Minimum Hamming distance = minimum nonzero weight (the code is
    /// linear; `tests` additionally brute-force all pairs).
    pub fn min_distance(&self) -> usize {
        self.codebook
            .iter()
            .filter(|&&w| w != 0)
            .map(|w| w.count_ones() as usize)
            .min()
            .unwrap_or(0)
    }

    /// Generator rows as bit vectors (for structural checks).
    pub fn generator_rows(&self) -> Vec<Vec<u8>> {
        self.generator.iter().map(|&row| self.unpack(row)).collect()
    }

    fn unpack(&self, word: u32) -> Vec<u8> {
        (0..self.n_bits)
            .map(|pos| (word >> (self.n_bits - 1 - pos) & 1) as u8)
            .collect()
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.message_count() {
            return Err(Error::MessageOutOfRange {
                index,
                count: self.message_count(),
            });
        }
        Ok(())
    }
}

/// Gray-mapped QPSK: bit pair (b₀, b₁) → ((1−2b₁) + j(1−2b₀))/√2, i.e.
/// 00 → (+1+j)/√2, 01 → (−1+j)/√2, 11 → (−1−j)/√2, 10 → (+1−j)/√2.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "qpsk_map needs an even number of bits, got {}",
            bits.len()
        )));
    }
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    Ok(bits
        .chunks_exact(2)
        .map(|pair| {
            let (b0, b1) = (pair[0] & 1, pair[1] & 1);
            Complex64::new(
                amp * (1.0 - 2.0 * b1 as f64),
                amp * (1.0 - 2.0 * b0 as f64),
            )
        })
        .collect())
}

/// Hard-decision QPSK demapping (nearest constellation point; ties resolve
/// toward bit 0).
pub fn qpsk_demap_hard(symbols: &[Complex64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        bits.push(if s.im < 0.0 { 1 } else { 0 });
        bits.push(if s.re < 0.0 { 1 } else { 0 });
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand::Rng;

    #[test]
    fn all_zero_message_encodes_to_zero() {
        let code = LinearBlockCode::extended_golay();
        assert_eq!(code.encode_block(&[0; 12]).unwrap(), vec![0; 24]);
        assert_eq!(code.codeword_bits(0).unwrap(), vec![0; 24]);
    }

    #[test]
    fn encoding_is_linear() {
        let code = LinearBlockCode::extended_golay();
        let mut rng = stream(1, Domain::Init, 0, 0);
        for _ in 0..50 {
            let u: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let v: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let xor: Vec<u8> = u.iter().zip(&v).map(|(a, b)| a ^ b).collect();
            let eu = code.encode_block(&u).unwrap();
            let ev = code.encode_block(&v).unwrap();
            let exor = code.encode_block(&xor).unwrap();
            let manual: Vec<u8> = eu.iter().zip(&ev).map(|(a, b)| a ^ b).collect();
            assert_eq!(exor, manual);
        }
    }

    #[test]
    fn golay_weight_distribution_and_distance() {
        let code = LinearBlockCode::extended_golay();
        let hist = code.weight_distribution();
        let expected: std::collections::BTreeMap<usize, usize> =
            [(0, 1), (8, 759), (12, 2576), (16, 759), (24, 1)]
                .into_iter()
                .collect();
        assert_eq!(hist, expected);
        assert_eq!(code.min_distance(), 8);
    }

    #[test]
    fn golay_generator_is_self_dual() {
        let code = LinearBlockCode::extended_golay();
        let rows = code.generator_rows();
        for a in &rows {
            for b in &rows {
                let dot: u8 = a.iter().zip(b).map(|(x, y)| x & y).fold(0, |acc, v| acc ^ v);
                assert_eq!(dot, 0, "generator rows not orthogonal over GF(2)");
            }
        }
    }

    #[test]
    fn hamming84_weights_and_distance() {
        let code = LinearBlockCode::extended_hamming84();
        let hist = code.weight_distribution();
        let expected: std::collections::BTreeMap<usize, usize> =
            [(0, 1), (4, 14), (8, 1)].into_iter().collect();
        assert_eq!(hist, expected);
        assert_eq!(code.min_distance(), 4);
    }

    #[test]
    fn qpsk_worked_symbols() {
        let s = qpsk_map(&[0, 0]).unwrap();
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - Complex64::new(amp, amp)).norm() < 1e-15);
        let s = qpsk_map(&[0, 1]).unwrap();
        assert!((s[0] - Complex64::new(-amp, amp)).norm() < 1e-15);
        let s = qpsk_map(&[1, 1]).unwrap();
        assert!((s[0] - Complex64::new(-amp, -amp)).norm() < 1e-15);
        let s = qpsk_map(&[1, 0]).unwrap();
        assert!((s[0] - Complex64::new(amp, -amp)).norm() < 1e-15);
    }

    #[test]
    fn qpsk_unit_power_and_length() {
        let bits: Vec<u8> = (0..24).map(|i| (i % 3 == 0) as u8).collect();
        let syms = qpsk_map(&bits).unwrap();
        assert_eq!(syms.len(), 12);
        for s in &syms {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
        assert!(qpsk_map(&bits[..23]).is_err());
    }

    #[test]
    fn qpsk_roundtrip() {
        let mut rng = stream(2, Domain::Init, 0, 0);
        let bits: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
        let syms = qpsk_map(&bits).unwrap();
        assert_eq!(qpsk_demap_hard(&syms), bits);
    }

    #[test]
    fn mld_recovers_noiseless_codewords() {
        let code = LinearBlockCode::extended_golay();
        for idx in [0, 1, 77, 2048, 4095] {
            let rx = code.modulated(idx).unwrap().to_vec();
            assert_eq!(code.mld_detect(&rx).unwrap(), idx);
        }
    }

    #[test]
    fn mld_corrects_a_sign_flipped_symbol() {
        // One symbol sign flip = 2 bit errors; distance 8 corrects up to 3.
        let code = LinearBlockCode::extended_golay();
        let mut rx = code.modulated(1234).unwrap().to_vec();
        rx[5] = -rx[5];
        assert_eq!(code.mld_detect(&rx).unwrap(), 1234);
    }

    #[test]
    fn mld_corrects_weight_three_bit_errors() {
        let code = LinearBlockCode::extended_golay();
        let mut rng = stream(3, Domain::Init, 0, 0);
        for _ in 0..40 {
            let idx = rng.random_range(0..code.message_count());
            let mut bits = code.codeword_bits(idx).unwrap();
            let mut flipped = std::collections::HashSet::new();
            while flipped.len() < 3 {
                flipped.insert(rng.random_range(0..24usize));
            }
            for &pos in &flipped {
                bits[pos] ^= 1;
            }
            let rx = qpsk_map(&bits).unwrap();
            assert_eq!(code.mld_detect(&rx).unwrap(), idx);
        }
    }

    #[test]
    fn correlation_equals_min_distance_rule() {
        let code = LinearBlockCode::extended_hamming84();
        let mut rng = stream(4, Domain::Init, 0, 0);
        for _ in 0..200 {
            let rx: Vec<Complex64> = (0..4)
                .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect();
            let by_corr = code.mld_detect(&rx).unwrap();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for m in 0..code.message_count() {
                let d: f64 = rx
                    .iter()
                    .zip(code.modulated(m).unwrap())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = m;
                }
            }
            assert_eq!(by_corr, best);
        }
    }

    #[test]
    fn golay_min_pairwise_distance_brute_force() {
        let code = LinearBlockCode::extended_golay();
        let words: Vec<u32> = (0..code.message_count())
            .map(|m| {
                code.codeword_bits(m)
                    .unwrap()
                    .iter()
                    .fold(0u32, |acc, &b| (acc << 1) | b as u32)
            })
            .collect();
        let mut min_d = u32::MAX;
        for i in 0..words.len() {
            for j in (i + 1)..words.len() {
                min_d = min_d.min((words[i] ^ words[j]).count_ones());
            }
        }
        assert_eq!(min_d, 8);
    }

    #[test]
    fn mld_validates_length() {
        let code = LinearBlockCode::extended_golay();
        assert!(code.mld_detect(&[Complex64::new(1.0, 0.0); 11]).is_err());
        assert!(code.encode_block(&[0; 11]).is_err());
        assert!(code.modulated(4096).is_err());
    }
}
