//! Sparse block-fading channel model.
//!
//! Each fading block carries `N` subcarriers. The time-domain impulse response has
//! length `L` with exactly `S` non-zero taps, whose positions (the support) are drawn
//! from a prior over the `M = C(L, S)` possible supports. With a cyclic prefix the
//! channel is diagonal in frequency, so a block observes
//!
//! ```text
//! y_p = √(ρN) · Diag(x_p) · F[pilots, support] · h_nz + v_p
//! y_d = √(ρN) · Diag(x_d) · F[data,   support] · h_nz + v_d
//! ```
//!
//! where `F` is the unitary `N`-point DFT matrix.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cplx, modulus, CMat, CVec};
use crate::scalar::Scalar;

/// Upper bound on the number of support hypotheses a spec may enumerate.
pub const MAX_HYPOTHESES: usize = 1 << 16;

/// Positions of the non-zero taps, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn new(indices: Vec<usize>, l_taps: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("support must contain at least one tap"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!("support {indices:?} is not strictly increasing")));
        }
        if let Some(&last) = indices.last() {
            if last >= l_taps {
                return Err(invalid(format!("support index {last} outside channel length {l_taps}")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for j in 0..k {
        acc = acc.checked_mul(n - j)? / (j + 1);
    }
    Some(acc)
}

/// All `S`-element subsets of `{0, …, L−1}` in lexicographic order.
///
/// Position `i` in the returned list is the hypothesis index used throughout the crate.
pub fn enumerate_supports(l_taps: usize, s_sparsity: usize) -> Result<Vec<SupportSet>> {
    if l_taps == 0 || s_sparsity == 0 || s_sparsity > l_taps {
        return Err(invalid(format!("need 1 ≤ S ≤ L, got S={s_sparsity}, L={l_taps}")));
    }
    match binomial(l_taps, s_sparsity) {
        Some(m) if m <= MAX_HYPOTHESES => {}
        _ => {
            return Err(Error::Config(format!(
                "C({l_taps},{s_sparsity}) exceeds the {MAX_HYPOTHESES}-hypothesis limit"
            )))
        }
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..s_sparsity).collect();
    loop {
        out.push(SupportSet {
            indices: current.clone(),
        });
        // rightmost position that can still be advanced
        let Some(pos) = (0..s_sparsity).rev().find(|&p| current[p] < l_taps - s_sparsity + p) else {
            break;
        };
        current[pos] += 1;
        for q in pos + 1..s_sparsity {
            current[q] = current[q - 1] + 1;
        }
    }
    Ok(out)
}

/// Rows `rows` and columns `cols` of the unitary `N`-point DFT matrix,
/// entry `(a, b) = exp(−j2π·rows[a]·cols[b]/N) / √N`.
pub fn dft_submatrix<T: Scalar>(n_block: usize, rows: &[usize], cols: &[usize]) -> Result<CMat<T>> {
    if n_block == 0 {
        return Err(invalid("DFT size must be positive"));
    }
    if let Some(&bad) = rows.iter().chain(cols).find(|&&i| i >= n_block) {
        return Err(invalid(format!("DFT index {bad} out of range for N={n_block}")));
    }
    let scale = T::one() / T::from_usize(n_block).unwrap().sqrt();
    let n = n_block as u128;
    Ok(CMat::from_fn(rows.len(), cols.len(), |a, b| {
        // reduce the phase index exactly before converting to floating point
        let k = (rows[a] as u128 * cols[b] as u128 % n) as f64;
        let angle = T::lit(-2.0 * std::f64::consts::PI * k / n_block as f64);
        Complex::new(angle.cos() * scale, angle.sin() * scale)
    }))
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Why a pilot pattern cannot guarantee full-rank DFT submatrices for composite `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotViolation {
    /// Pilots form the subgroup `{0, step, 2·step, …}` of `Z_N`.
    Subgroup { step: usize },
    /// Pilots form the coset `offset + {0, step, …}` of a subgroup of `Z_N`.
    Coset { offset: usize, step: usize },
    /// Composite `N` additionally requires `L < N/2`.
    ChannelTooLong { l_taps: usize, n_block: usize },
}

impl fmt::Display for PilotViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PilotViolation::Subgroup { step } => {
                write!(
                    f,
                    "pilot indices form the subgroup generated by {step} under addition mod N"
                )
            }
            PilotViolation::Coset { offset, step } => write!(
                f,
                "pilot indices form the coset {offset} + <{step}> of a subgroup under addition mod N"
            ),
            PilotViolation::ChannelTooLong { l_taps, n_block } => {
                write!(
                    f,
                    "channel length L={l_taps} must satisfy L < N/2 for composite N={n_block}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotPatternReport {
    Pass,
    Fail(PilotViolation),
}

impl PilotPatternReport {
    pub fn is_pass(&self) -> bool {
        matches!(self, PilotPatternReport::Pass)
    }
}

/// Checks that pilot placement keeps every square pilot/support DFT submatrix full rank.
///
/// Prime `N` always passes. Composite `N` passes only if the pilots are neither a
/// subgroup of `Z_N` nor a coset of one, and `L < N/2`.
pub fn validate_pilot_pattern(n_block: usize, l_taps: usize, pilot_indices: &[usize]) -> PilotPatternReport {
    if is_prime(n_block) {
        return PilotPatternReport::Pass;
    }
    let p = pilot_indices.len();
    if p > 0 && n_block.is_multiple_of(p) {
        let step = n_block / p;
        let first = pilot_indices[0];
        let is_coset = first < step && pilot_indices.iter().enumerate().all(|(j, &i)| i == first + j * step);
        if is_coset {
            return PilotPatternReport::Fail(if first == 0 {
                PilotViolation::Subgroup { step }
            } else {
                PilotViolation::Coset { offset: first, step }
            });
        }
    }
    if 2 * l_taps >= n_block {
        return PilotPatternReport::Fail(PilotViolation::ChannelTooLong { l_taps, n_block });
    }
    PilotPatternReport::Pass
}

/// DFT submatrices belonging to one support hypothesis.
#[derive(Debug, Clone)]
pub struct HypothesisGeometry<T: Scalar> {
    pub support: SupportSet,
    /// `F_i`: all `N` rows, support columns.
    pub f_full: CMat<T>,
    /// `F_pl,i`: pilot rows.
    pub f_pilot: CMat<T>,
    /// `F_d,i`: data rows.
    pub f_data: CMat<T>,
}

impl<T: Scalar> HypothesisGeometry<T> {
    fn new(n_block: usize, pilots: &[usize], data: &[usize], support: SupportSet) -> Result<Self> {
        let all: Vec<usize> = (0..n_block).collect();
        Ok(Self {
            f_full: dft_submatrix(n_block, &all, support.indices())?,
            f_pilot: dft_submatrix(n_block, pilots, support.indices())?,
            f_data: dft_submatrix(n_block, data, support.indices())?,
            support,
        })
    }
}

/// Static problem definition. Immutable once built; derived DFT geometry is shared.
#[derive(Debug, Clone)]
pub struct ChannelSpec<T: Scalar> {
    n_block: usize,
    l_taps: usize,
    s_sparsity: usize,
    support_prior: Vec<T>,
    snr_linear: T,
    pilot_indices: Vec<usize>,
    pilot_values: CVec<T>,
    k_blocks: usize,
    data_indices: Vec<usize>,
    geometry: Arc<[HypothesisGeometry<T>]>,
}

#[derive(Debug, Clone)]
pub struct ChannelSpecBuilder<T: Scalar> {
    n_block: usize,
    l_taps: usize,
    s_sparsity: usize,
    support_prior: Option<Vec<T>>,
    snr_linear: T,
    pilot_indices: Option<Vec<usize>>,
    pilot_values: Option<Vec<Complex<T>>>,
    k_blocks: usize,
}

impl<T: Scalar> ChannelSpecBuilder<T> {
    pub fn snr_linear(mut self, rho: T) -> Self {
        self.snr_linear = rho;
        self
    }

    pub fn snr_db(self, db: f64) -> Self {
        self.snr_linear(T::lit(db_to_linear(db)))
    }

    /// Pilots on subcarriers `{0, …, P−1}`.
    pub fn pilot_count(mut self, p: usize) -> Self {
        self.pilot_indices = Some((0..p).collect());
        self
    }

    pub fn pilot_indices(mut self, indices: Vec<usize>) -> Self {
        self.pilot_indices = Some(indices);
        self
    }

    pub fn pilot_values(mut self, values: Vec<Complex<T>>) -> Self {
        self.pilot_values = Some(values);
        self
    }

    pub fn support_prior(mut self, prior: Vec<T>) -> Self {
        self.support_prior = Some(prior);
        self
    }

    pub fn k_blocks(mut self, k: usize) -> Self {
        self.k_blocks = k;
        self
    }

    pub fn build(self) -> Result<ChannelSpec<T>> {
        let Self {
            n_block,
            l_taps,
            s_sparsity,
            ..
        } = self;
        if n_block < 2 {
            return Err(invalid(format!("block length N={n_block} must be at least 2")));
        }
        if l_taps == 0 || l_taps >= n_block {
            return Err(invalid(format!("need 1 ≤ L < N, got L={l_taps}, N={n_block}")));
        }
        let supports = enumerate_supports(l_taps, s_sparsity)?;
        let m = supports.len();

        let pilot_indices = self.pilot_indices.unwrap_or_else(|| (0..s_sparsity).collect());
        let p = pilot_indices.len();
        if p == 0 || p >= n_block {
            return Err(invalid(format!("need 1 ≤ P < N pilots, got P={p}")));
        }
        if pilot_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("pilot indices must be strictly increasing"));
        }
        if pilot_indices[p - 1] >= n_block {
            return Err(invalid(format!("pilot index {} out of range", pilot_indices[p - 1])));
        }

        let tol = T::structural_tol();
        let pilot_values = self.pilot_values.unwrap_or_else(|| vec![cplx(T::one()); p]);
        if pilot_values.len() != p {
            return Err(invalid(format!(
                "{} pilot values for {p} pilot indices",
                pilot_values.len()
            )));
        }
        if pilot_values.iter().any(|x| (modulus(x) - T::one()).abs() > tol) {
            return Err(invalid("pilot values must have unit modulus"));
        }

        let support_prior = self
            .support_prior
            .unwrap_or_else(|| vec![T::one() / T::from_usize(m).unwrap(); m]);
        if support_prior.len() != m {
            return Err(invalid(format!(
                "support prior has {} entries, expected M={m}",
                support_prior.len()
            )));
        }
        if support_prior.iter().any(|&w| !w.is_finite() || w < T::zero()) {
            return Err(invalid("support prior entries must be finite and nonnegative"));
        }
        let total = support_prior.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs() > tol {
            return Err(invalid(format!("support prior sums to {total}, not 1")));
        }

        if !self.snr_linear.is_finite() || self.snr_linear < T::zero() {
            return Err(invalid("SNR must be finite and nonnegative"));
        }
        if self.k_blocks == 0 {
            return Err(invalid("need at least one fading block"));
        }
        if let PilotPatternReport::Fail(v) = validate_pilot_pattern(n_block, l_taps, &pilot_indices) {
            return Err(Error::PilotPattern(v));
        }

        let data_indices: Vec<usize> = (0..n_block)
            .filter(|i| pilot_indices.binary_search(i).is_err())
            .collect();
        let geometry = supports
            .into_iter()
            .map(|s| HypothesisGeometry::new(n_block, &pilot_indices, &data_indices, s))
            .collect::<Result<Vec<_>>>()?;

        Ok(ChannelSpec {
            n_block,
            l_taps,
            s_sparsity,
            support_prior,
            snr_linear: self.snr_linear,
            pilot_indices,
            pilot_values: CVec::from_vec(pilot_values),
            k_blocks: self.k_blocks,
            data_indices,
            geometry: geometry.into(),
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl<T: Scalar> ChannelSpec<T> {
    /// Starts a spec with uniform support prior, all-ones pilots on the first `S`
    /// subcarriers, `ρ = 1` and a single fading block.
    pub fn builder(n_block: usize, l_taps: usize, s_sparsity: usize) -> ChannelSpecBuilder<T> {
        ChannelSpecBuilder {
            n_block,
            l_taps,
            s_sparsity,
            support_prior: None,
            snr_linear: T::one(),
            pilot_indices: None,
            pilot_values: None,
            k_blocks: 1,
        }
    }

    pub fn n_block(&self) -> usize {
        self.n_block
    }

    pub fn l_taps(&self) -> usize {
        self.l_taps
    }

    pub fn s_sparsity(&self) -> usize {
        self.s_sparsity
    }

    pub fn support_prior(&self) -> &[T] {
        &self.support_prior
    }

    pub fn snr_linear(&self) -> T {
        self.snr_linear
    }

    pub fn pilot_indices(&self) -> &[usize] {
        &self.pilot_indices
    }

    pub fn data_indices(&self) -> &[usize] {
        &self.data_indices
    }

    pub fn pilot_values(&self) -> &CVec<T> {
        &self.pilot_values
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_indices.len()
    }

    pub fn data_len(&self) -> usize {
        self.data_indices.len()
    }

    pub fn k_blocks(&self) -> usize {
        self.k_blocks
    }

    /// `M = C(L, S)`.
    pub fn hypothesis_count(&self) -> usize {
        self.geometry.len()
    }

    pub fn support(&self, i: usize) -> &SupportSet {
        &self.geometry[i].support
    }

    pub fn supports(&self) -> impl Iterator<Item = &SupportSet> {
        self.geometry.iter().map(|g| &g.support)
    }

    pub fn geometry(&self, i: usize) -> &HypothesisGeometry<T> {
        &self.geometry[i]
    }

    pub fn hypothesis_index(&self, support: &SupportSet) -> Option<usize> {
        self.geometry.binary_search_by(|g| g.support.cmp(support)).ok()
    }

    pub(crate) fn check_hypothesis(&self, i: usize) -> Result<&HypothesisGeometry<T>> {
        self.geometry
            .get(i)
            .ok_or_else(|| invalid(format!("hypothesis {i} out of range (M={})", self.hypothesis_count())))
    }

    pub(crate) fn resolve(&self, support: &SupportSet) -> Result<&HypothesisGeometry<T>> {
        self.hypothesis_index(support)
            .map(|i| &self.geometry[i])
            .ok_or_else(|| {
                invalid(format!(
                    "support {support} is not a valid S={} hypothesis",
                    self.s_sparsity
                ))
            })
    }

    pub fn pilot_pattern_report(&self) -> PilotPatternReport {
        validate_pilot_pattern(self.n_block, self.l_taps, &self.pilot_indices)
    }

    /// Same spec at a different SNR; DFT geometry is shared, not recomputed.
    pub fn with_snr_linear(&self, rho: T) -> Result<Self> {
        if !rho.is_finite() || rho < T::zero() {
            return Err(invalid("SNR must be finite and nonnegative"));
        }
        let mut out = self.clone();
        out.snr_linear = rho;
        Ok(out)
    }

    pub fn with_snr_db(&self, db: f64) -> Result<Self> {
        self.with_snr_linear(T::lit(db_to_linear(db)))
    }

    pub fn with_k_blocks(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("need at least one fading block"));
        }
        let mut out = self.clone();
        out.k_blocks = k;
        Ok(out)
    }

    /// The same pilot layout viewed as a non-sparse `L`-tap channel (`S = L`, `M = 1`).
    pub fn as_nonsparse(&self) -> Result<Self> {
        ChannelSpec::builder(self.n_block, self.l_taps, self.l_taps)
            .snr_linear(self.snr_linear)
            .pilot_indices(self.pilot_indices.clone())
            .pilot_values(self.pilot_values.iter().copied().collect())
            .k_blocks(self.k_blocks)
            .build()
    }

    pub(crate) fn sqrt_rho_n(&self) -> T {
        (self.snr_linear * T::from_usize(self.n_block).unwrap()).sqrt()
    }
}

/// One fading block's hidden state: which support is active, the non-zero taps, and
/// the frequency-domain noise.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRealization<T: Scalar> {
    /// Zero-based index into the lexicographic support list.
    pub support_index: usize,
    /// `h_nz ~ CN(0, S⁻¹ I)`.
    pub taps_nz: CVec<T>,
    /// `v_f ~ CN(0, I)`, all `N` subcarriers.
    pub noise_freq: CVec<T>,
}

impl<T: Scalar> BlockRealization<T> {
    pub fn validate(&self, spec: &ChannelSpec<T>) -> Result<()> {
        spec.check_hypothesis(self.support_index)?;
        if self.taps_nz.len() != spec.s_sparsity() {
            return Err(invalid(format!(
                "{} taps for S={}",
                self.taps_nz.len(),
                spec.s_sparsity()
            )));
        }
        if self.noise_freq.len() != spec.n_block() {
            return Err(invalid(format!(
                "{} noise samples for N={}",
                self.noise_freq.len(),
                spec.n_block()
            )));
        }
        Ok(())
    }

    /// Full time-domain impulse response of length `L`.
    pub fn impulse_response(&self, spec: &ChannelSpec<T>) -> CVec<T> {
        let mut h = CVec::zeros(spec.l_taps());
        for (&pos, &tap) in spec
            .support(self.support_index)
            .indices()
            .iter()
            .zip(self.taps_nz.iter())
        {
            h[pos] = tap;
        }
        h
    }

    /// `h_f = √N · F_true · h_nz` on all `N` subcarriers.
    pub fn frequency_response(&self, spec: &ChannelSpec<T>) -> CVec<T> {
        let root_n = T::from_usize(spec.n_block()).unwrap().sqrt();
        &spec.geometry(self.support_index).f_full * &self.taps_nz * cplx(root_n)
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    let sd = (variance / T::lit(2.0)).sqrt();
    let re = T::standard_normal(rng);
    let im = T::standard_normal(rng);
    Complex::new(re * sd, im * sd)
}

pub fn complex_normal_vec<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, variance: T) -> CVec<T> {
    CVec::from_iterator(len, (0..len).map(|_| complex_normal(rng, variance)))
}

/// Draws support from the prior, taps from `CN(0, S⁻¹ I)` and noise from `CN(0, I)`.
pub fn draw_block<T: Scalar, R: Rng + ?Sized>(spec: &ChannelSpec<T>, rng: &mut R) -> BlockRealization<T> {
    let support_index = draw_support(spec.support_prior(), rng);
    let s = T::from_usize(spec.s_sparsity()).unwrap();
    BlockRealization {
        support_index,
        taps_nz: complex_normal_vec(rng, spec.s_sparsity(), T::one() / s),
        noise_freq: complex_normal_vec(rng, spec.n_block(), T::one()),
    }
}

fn draw_support<T: Scalar, R: Rng + ?Sized>(prior: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, w) in prior.iter().map(|w| w.as_f64()).enumerate() {
        if w > 0.0 {
            last_positive = i;
            cum += w;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

/// Pilot and data observations of one block for the given data vector `x_d`.
pub fn transmit_receive<T: Scalar>(
    spec: &ChannelSpec<T>,
    block: &BlockRealization<T>,
    x_data: &CVec<T>,
) -> Result<(CVec<T>, CVec<T>)> {
    block.validate(spec)?;
    if x_data.len() != spec.data_len() {
        return Err(invalid(format!(
            "data vector has {} entries, expected N−P={}",
            x_data.len(),
            spec.data_len()
        )));
    }
    if x_data.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(invalid("data vector is not finite"));
    }
    let g = spec.geometry(block.support_index);
    let amp = cplx(spec.sqrt_rho_n());
    let y_p = (&g.f_pilot * &block.taps_nz).component_mul(spec.pilot_values()) * amp
        + CVec::from_iterator(
            spec.pilot_count(),
            spec.pilot_indices().iter().map(|&i| block.noise_freq[i]),
        );
    let y_d = (&g.f_data * &block.taps_nz).component_mul(x_data) * amp
        + CVec::from_iterator(
            spec.data_len(),
            spec.data_indices().iter().map(|&i| block.noise_freq[i]),
        );
    Ok((y_p, y_d))
}

/// Transmitted and received frequency-domain signals over `K` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T: Scalar> {
    pub x_pilot: CVec<T>,
    pub x_data: Vec<CVec<T>>,
    pub y_pilot: Vec<CVec<T>>,
    pub y_data: Vec<CVec<T>>,
}

impl<T: Scalar> Frame<T> {
    /// Sends `codeword` (one `N−P` segment per block) through the given realizations.
    pub fn transmit(spec: &ChannelSpec<T>, blocks: &[BlockRealization<T>], codeword: &[CVec<T>]) -> Result<Self> {
        if blocks.len() != codeword.len() {
            return Err(invalid(format!(
                "{} blocks but {} codeword segments",
                blocks.len(),
                codeword.len()
            )));
        }
        let (y_pilot, y_data) = blocks
            .iter()
            .zip(codeword)
            .map(|(b, x)| transmit_receive(spec, b, x))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Self {
            x_pilot: spec.pilot_values().clone(),
            x_data: codeword.to_vec(),
            y_pilot,
            y_data,
        })
    }

    pub fn k_blocks(&self) -> usize {
        self.y_pilot.len()
    }

    pub(crate) fn validate(&self, spec: &ChannelSpec<T>) -> Result<()> {
        let k = self.y_pilot.len();
        if k == 0 || self.y_data.len() != k {
            return Err(invalid("frame needs matching, nonempty pilot and data observations"));
        }
        if self.y_pilot.iter().any(|y| y.len() != spec.pilot_count())
            || self.y_data.iter().any(|y| y.len() != spec.data_len())
        {
            return Err(invalid("frame observation lengths do not match the spec"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> ChannelSpec<f64> {
        ChannelSpec::builder(7, 4, 2)
            .pilot_count(3)
            .snr_db(20.0)
            .build()
            .unwrap()
    }

    #[test]
    fn enumerates_lexicographically() {
        let idx = |v: &[SupportSet]| v.iter().map(|s| s.indices().to_vec()).collect::<Vec<_>>();
        assert_eq!(
            idx(&enumerate_supports(3, 2).unwrap()),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        let four = enumerate_supports(4, 2).unwrap();
        assert_eq!(four.len(), 6);
        assert_eq!(four[0].indices(), &[0, 1]);
        assert_eq!(four[5].indices(), &[2, 3]);
        assert_eq!(idx(&enumerate_supports(4, 4).unwrap()), vec![vec![0, 1, 2, 3]]);
        assert!(enumerate_supports(3, 0).is_err());
        assert!(enumerate_supports(3, 4).is_err());
    }

    #[test]
    fn enumeration_counts_match_binomial() {
        for l in 1..9 {
            for s in 1..=l {
                let all = enumerate_supports(l, s).unwrap();
                assert_eq!(all.len(), binomial(l, s).unwrap());
                assert!(all.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn dft_scaling_and_range_checks() {
        let m = dft_submatrix::<f64>(4, &[0], &[0]).unwrap();
        assert!((m[(0, 0)] - Complex::new(0.5, 0.0)).norm() < 1e-15);
        assert!(dft_submatrix::<f64>(4, &[4], &[0]).is_err());
        assert!(dft_submatrix::<f64>(4, &[0], &[7]).is_err());
    }

    #[test]
    fn dft_submatrix_rank() {
        let full = dft_submatrix::<f64>(5, &[0, 1], &[0, 2]).unwrap();
        let sv = full.singular_values();
        assert!(sv.min() > 1e-9);
        // composite N: rows {0,4} and cols {0,4} of the 8-point DFT are rank one
        let deficient = dft_submatrix::<f64>(8, &[0, 4], &[0, 4]).unwrap();
        let sv = deficient.singular_values();
        assert!(sv.max() > 0.1 && sv.min() < 1e-12);
    }

    #[test]
    fn pilot_pattern_checks() {
        assert!(validate_pilot_pattern(7, 4, &[0, 2, 4, 6]).is_pass());
        assert_eq!(
            validate_pilot_pattern(8, 3, &[0, 2, 4, 6]),
            PilotPatternReport::Fail(PilotViolation::Subgroup { step: 2 })
        );
        assert_eq!(
            validate_pilot_pattern(8, 3, &[1, 3, 5, 7]),
            PilotPatternReport::Fail(PilotViolation::Coset { offset: 1, step: 2 })
        );
        assert_eq!(
            validate_pilot_pattern(8, 4, &[0, 1, 3]),
            PilotPatternReport::Fail(PilotViolation::ChannelTooLong { l_taps: 4, n_block: 8 })
        );
        assert!(validate_pilot_pattern(8, 3, &[0, 1, 3]).is_pass());
        let err = ChannelSpec::<f64>::builder(8, 3, 2)
            .pilot_indices(vec![0, 2, 4, 6])
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::PilotPattern(PilotViolation::Subgroup { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(ChannelSpec::<f64>::builder(7, 7, 2).build().is_err());
        assert!(ChannelSpec::<f64>::builder(7, 4, 2)
            .pilot_indices(vec![2, 1])
            .build()
            .is_err());
        assert!(ChannelSpec::<f64>::builder(7, 4, 2)
            .pilot_values(vec![Complex::new(0.9, 0.0), Complex::new(1.0, 0.0)])
            .build()
            .is_err());
        assert!(ChannelSpec::<f64>::builder(7, 4, 2)
            .support_prior(vec![0.5; 6])
            .build()
            .is_err());
        assert!(ChannelSpec::<f64>::builder(7, 4, 2).snr_linear(-1.0).build().is_err());
        let s = spec();
        assert_eq!(s.hypothesis_count(), 6);
        assert_eq!(s.data_indices(), &[3, 4, 5, 6]);
        let sup = SupportSet::new(vec![1, 3], 4).unwrap();
        assert_eq!(s.hypothesis_index(&sup), Some(4));
    }

    #[test]
    fn degenerate_prior_always_draws_first_support() {
        let mut prior = vec![0.0; 6];
        prior[0] = 1.0;
        let s = ChannelSpec::<f64>::builder(7, 4, 2)
            .support_prior(prior)
            .build()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..500).all(|_| draw_block(&s, &mut rng).support_index == 0));
    }

    #[test]
    fn zero_snr_returns_noise() {
        let s = spec().with_snr_linear(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = draw_block(&s, &mut rng);
        let x = complex_normal_vec(&mut rng, s.data_len(), 1.0);
        let (yp, yd) = transmit_receive(&s, &b, &x).unwrap();
        for (k, &i) in s.pilot_indices().iter().enumerate() {
            assert_eq!(yp[k], b.noise_freq[i]);
        }
        for (k, &i) in s.data_indices().iter().enumerate() {
            assert_eq!(yd[k], b.noise_freq[i]);
        }
    }

    #[test]
    fn single_tap_pilot_observation() {
        let s = ChannelSpec::<f64>::builder(7, 3, 1)
            .pilot_count(2)
            .snr_linear(4.0)
            .build()
            .unwrap();
        let b = BlockRealization {
            support_index: 2,
            taps_nz: CVec::from_element(1, cplx(1.0)),
            noise_freq: CVec::zeros(7),
        };
        let (yp, _) = transmit_receive(&s, &b, &CVec::zeros(5)).unwrap();
        let col = dft_submatrix::<f64>(7, &[0, 1], &[2]).unwrap();
        let amp = (4.0f64 * 7.0).sqrt();
        for r in 0..2 {
            assert!((yp[r] - col[(r, 0)] * amp).norm() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = draw_block(&s, &mut rng);
        assert!(transmit_receive(&s, &b, &CVec::zeros(3)).is_err());
        let mut bad = b.clone();
        bad.support_index = 6;
        assert!(transmit_receive(&s, &bad, &CVec::zeros(4)).is_err());
    }
}
