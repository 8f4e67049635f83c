//! Gaussian random codebooks and the random-binning check function used for
//! support-error detection.
//!
//! A composite message `(w, u)` carries `m_R` information bits `w` and `m_δ` check
//! bits `u = μ(w)`. Codeword index is `w · 2^{m_δ} + u`. The binning function `μ` is a
//! seeded random affine map over GF(2), `μ(w) = A·w ⊕ b`, which makes collision
//! probabilities for distinct messages exactly `2^{-m_δ}` over the seed ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_part, hpd_cholesky, CMat, CVec};
use crate::model::{complex_normal_vec, ChannelSpec};
use crate::scalar::Scalar;

/// Largest `m_R + m_δ` a codebook may use.
pub const MAX_CODEBOOK_BITS: u32 = 16;

const CODEWORD_STREAM: u64 = 0;
const BINNING_STREAM: u64 = 1;

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Seeded affine GF(2) map from `info_bits`-bit messages to `crc_bits`-bit checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binning {
    info_bits: u32,
    crc_bits: u32,
    rows: Vec<u64>,
    offset: u64,
    seed: u64,
}

impl Binning {
    pub fn from_seed(info_bits: u32, crc_bits: u32, seed: u64) -> Result<Self> {
        if info_bits > 63 || crc_bits > 63 {
            return Err(invalid("binning supports at most 63 information and 63 check bits"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(BINNING_STREAM);
        let rows = (0..crc_bits).map(|_| rng.random::<u64>() & mask(info_bits)).collect();
        let offset = rng.random::<u64>() & mask(crc_bits);
        Ok(Self {
            info_bits,
            crc_bits,
            rows,
            offset,
            seed,
        })
    }

    pub fn info_bits(&self) -> u32 {
        self.info_bits
    }

    pub fn crc_bits(&self) -> u32 {
        self.crc_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `μ(w)`; bit `j` of the result is the parity of `row_j & w`, flipped by `b_j`.
    pub fn apply(&self, w: u64) -> u64 {
        let w = w & mask(self.info_bits);
        self.rows.iter().enumerate().fold(self.offset, |u, (j, &row)| {
            u ^ (u64::from((row & w).count_ones() & 1) << j)
        })
    }

    pub fn check(&self, w: u64, u: u64) -> bool {
        self.apply(w) == u
    }
}

/// Check bits for a message given LSB-first as booleans.
pub fn crc_bin(message_bits: &[bool], crc_bits: u32, seed: u64) -> Result<Vec<bool>> {
    let binning = Binning::from_seed(message_bits.len() as u32, crc_bits, seed)?;
    let w = bits_to_u64(message_bits);
    let u = binning.apply(w);
    Ok((0..crc_bits).map(|j| (u >> j) & 1 == 1).collect())
}

pub fn bits_to_u64(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (j, &b)| acc | (u64::from(b) << j))
}

pub fn u64_to_bits(value: u64, len: u32) -> Vec<bool> {
    (0..len).map(|j| (value >> j) & 1 == 1).collect()
}

/// `|C| = 2^{m_R + m_δ}` i.i.d. Gaussian codewords spanning `K` blocks.
#[derive(Debug, Clone)]
pub struct Codebook<T: Scalar> {
    /// `codewords[c][k]` is the length `N−P` data vector of codeword `c` in block `k`.
    pub codewords: Vec<Vec<CVec<T>>>,
    /// Per-block data covariance `R_da`.
    pub data_cov: CMat<T>,
    info_bits: u32,
    crc_bits: u32,
    binning: Binning,
}

/// Identity data covariance.
pub fn build_codebook<T: Scalar>(
    spec: &ChannelSpec<T>,
    info_bits: u32,
    crc_bits: u32,
    seed: u64,
) -> Result<Codebook<T>> {
    let nd = spec.data_len();
    build_codebook_with_cov(spec, info_bits, crc_bits, seed, CMat::identity(nd, nd))
}

/// Codewords with each block segment drawn from `CN(0, R_da)`; `seed` also seeds the binning.
pub fn build_codebook_with_cov<T: Scalar>(
    spec: &ChannelSpec<T>,
    info_bits: u32,
    crc_bits: u32,
    seed: u64,
    data_cov: CMat<T>,
) -> Result<Codebook<T>> {
    let bits = info_bits + crc_bits;
    if bits > MAX_CODEBOOK_BITS {
        return Err(Error::Config(format!(
            "codebook of 2^{bits} codewords exceeds the 2^{MAX_CODEBOOK_BITS} limit"
        )));
    }
    let nd = spec.data_len();
    if data_cov.shape() != (nd, nd) {
        return Err(invalid(format!("data covariance must be {nd}×{nd}")));
    }
    let data_cov = hermitian_part(&data_cov);
    let factor = hpd_cholesky(data_cov.clone(), "data covariance")?.unpack();
    let is_identity = data_cov == CMat::identity(nd, nd);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CODEWORD_STREAM);
    let size = 1usize << bits;
    let codewords = (0..size)
        .map(|_| {
            (0..spec.k_blocks())
                .map(|_| {
                    let g = complex_normal_vec(&mut rng, nd, T::one());
                    if is_identity {
                        g
                    } else {
                        &factor * g
                    }
                })
                .collect()
        })
        .collect();
    Ok(Codebook {
        codewords,
        data_cov,
        info_bits,
        crc_bits,
        binning: Binning::from_seed(info_bits, crc_bits, seed)?,
    })
}

impl<T: Scalar> Codebook<T> {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn k_blocks(&self) -> usize {
        self.codewords.first().map_or(0, Vec::len)
    }

    pub fn info_bits(&self) -> u32 {
        self.info_bits
    }

    pub fn crc_bits(&self) -> u32 {
        self.crc_bits
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn binning_seed(&self) -> u64 {
        self.binning.seed()
    }

    pub fn codeword(&self, index: usize) -> &[CVec<T>] {
        &self.codewords[index]
    }

    /// Same codewords, different binning function.
    pub fn with_binning_seed(mut self, seed: u64) -> Result<Self> {
        self.binning = Binning::from_seed(self.info_bits, self.crc_bits, seed)?;
        Ok(self)
    }

    pub fn composite_index(&self, w: u64, u: u64) -> Result<usize> {
        if w > mask(self.info_bits) || u > mask(self.crc_bits) {
            return Err(invalid(format!("composite message ({w}, {u}) out of range")));
        }
        Ok(((w << self.crc_bits) | u) as usize)
    }

    /// Codeword index of information message `w` with its check bits attached.
    pub fn encode(&self, w: u64) -> Result<usize> {
        self.composite_index(w, self.binning.apply(w))
    }

    pub fn split_composite(&self, index: usize) -> Result<(u64, u64)> {
        if index >= self.len() {
            return Err(invalid(format!(
                "codeword index {index} out of range (|C|={})",
                self.len()
            )));
        }
        let index = index as u64;
        Ok((index >> self.crc_bits, index & mask(self.crc_bits)))
    }

    pub fn check_crc(&self, w: u64, u: u64) -> bool {
        self.binning.check(w, u)
    }

    /// Mean `|x|²` over every entry of every codeword.
    pub fn average_power(&self) -> T {
        let mut acc = T::zero();
        let mut count = 0usize;
        for seg in self.codewords.iter().flatten() {
            acc += seg.norm_squared();
            count += seg.len();
        }
        acc / T::from_usize(count.max(1)).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> ChannelSpec<f64> {
        ChannelSpec::builder(7, 4, 2)
            .pilot_count(2)
            .k_blocks(2)
            .build()
            .unwrap()
    }

    #[test]
    fn codebook_size_and_determinism() {
        let a = build_codebook(&spec(), 2, 1, 11).unwrap();
        assert_eq!(a.len(), 8);
        assert!(a
            .codewords
            .iter()
            .all(|c| c.len() == 2 && c.iter().all(|s| s.len() == 5)));
        let b = build_codebook(&spec(), 2, 1, 11).unwrap();
        assert_eq!(a.codewords, b.codewords);
        assert_eq!(a.binning(), b.binning());
        assert!(build_codebook(&spec(), 10, 7, 1).is_err());
    }

    #[test]
    fn average_power_is_unit() {
        let cb = build_codebook(&spec(), 8, 4, 5).unwrap();
        let n = (cb.len() * 2 * 5) as f64;
        // |x|² ~ Exp(1): standard error 1/√n
        assert!((cb.average_power() - 1.0).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn correlated_codebook_matches_covariance() {
        let s = spec();
        let r = CMat::from_fn(5, 5, |i, j| {
            num_complex::Complex::new(0.5f64.powi((i as i32 - j as i32).abs()), 0.0)
        });
        let cb = build_codebook_with_cov(&s, 6, 6, 3, r.clone()).unwrap();
        let mut emp = CMat::<f64>::zeros(5, 5);
        for seg in cb.codewords.iter().flatten() {
            emp += seg * seg.adjoint();
        }
        emp /= num_complex::Complex::new((cb.len() * 2) as f64, 0.0);
        assert!((emp - r).norm() < 0.1);
    }

    #[test]
    fn empty_check_always_passes() {
        let b = Binning::from_seed(5, 0, 9).unwrap();
        assert!((0..32).all(|w| b.apply(w) == 0 && b.check(w, 0)));
        assert!(crc_bin(&[true, false, true], 0, 1).unwrap().is_empty());
    }

    #[test]
    fn check_detects_flipped_bit() {
        let cb = build_codebook(&spec(), 3, 2, 17).unwrap();
        let u = cb.binning().apply(3);
        assert!(cb.check_crc(3, u));
        assert!(!cb.check_crc(3, u ^ 1));
        assert!(!cb.check_crc(3, u ^ 2));
    }

    #[test]
    fn composite_indexing_is_bijective() {
        let cb = build_codebook(&spec(), 3, 2, 1).unwrap();
        let mut seen = vec![false; cb.len()];
        for w in 0..8 {
            for u in 0..4 {
                let idx = cb.composite_index(w, u).unwrap();
                assert!(!seen[idx]);
                seen[idx] = true;
                assert_eq!(cb.split_composite(idx).unwrap(), (w, u));
            }
        }
        assert!(seen.into_iter().all(|s| s));
        assert!(cb.split_composite(32).is_err());
        assert!(cb.composite_index(8, 0).is_err());
    }

    #[test]
    fn collision_rate_over_seeds() {
        // Pr{μ(w) = μ(w')} = 2^{-mδ} for w ≠ w' over the affine-map ensemble
        let crc = 3u32;
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|&seed| {
                let b = Binning::from_seed(6, crc, seed).unwrap();
                b.apply(13) == b.apply(40)
            })
            .count();
        let p = 1.0 / 8.0;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 3.0 * se);
    }

    proptest! {
        #[test]
        fn binning_is_affine(w1 in 0u64..1024, w2 in 0u64..1024, seed in any::<u64>()) {
            let b = Binning::from_seed(10, 7, seed).unwrap();
            prop_assert_eq!(b.apply(w1 ^ w2) ^ b.apply(0), b.apply(w1) ^ b.apply(w2));
        }

        #[test]
        fn bit_vector_roundtrip(w in 0u64..(1 << 20), seed in any::<u64>()) {
            let bits = u64_to_bits(w, 20);
            prop_assert_eq!(bits_to_u64(&bits), w);
            let b = Binning::from_seed(20, 9, seed).unwrap();
            let u = crc_bin(&bits, 9, seed).unwrap();
            prop_assert_eq!(bits_to_u64(&u), b.apply(w));
        }
    }
}
