//! Codeword decoders: the Bayes-optimal joint channel/data decoder for the sparse
//! channel, its non-sparse counterpart, and the decoupled weighted minimum-distance
//! (WMD) decoder driven by support-hypothesized channel estimates.

use crate::codec::Codebook;
use crate::error::{invalid, Result};
use crate::estimation::{estimate_with_columns, support_posterior, PilotEstimate};
use crate::linalg::{
    cplx, hermitian_part, hpd_cholesky, inverse_sqrt_hermitian, is_psd, log_det, log_sum_exp, modulus, quad_form,
    scale_rows, CMat, CVec,
};
use crate::model::{ChannelSpec, Frame};
use crate::scalar::Scalar;

/// Output of a decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult<T: Scalar> {
    pub codeword_index: usize,
    /// Support hypothesis used in each block, for decoupled decoders.
    pub per_block_support: Option<Vec<usize>>,
    /// Objective at the chosen codeword: the log-likelihood for [`ml_decode_sparse`]
    /// (maximized) and the cost for the minimizing decoders.
    pub metric_value: T,
}

/// Lowest index among the minimizers; NaN entries never win.
pub(crate) fn argmin<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(std::cmp::Ordering::Less) => {}
            _ if v.partial_cmp(&v).is_none() => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn argmax<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<(usize, T)> {
    argmin(values.into_iter().map(|v| -v)).map(|(i, v)| (i, -v))
}

fn check_inputs<T: Scalar>(spec: &ChannelSpec<T>, codebook: &Codebook<T>, frame: &Frame<T>) -> Result<()> {
    frame.validate(spec)?;
    if codebook.is_empty() {
        return Err(invalid("codebook is empty"));
    }
    if codebook.k_blocks() != frame.k_blocks() {
        return Err(invalid(format!(
            "codebook spans {} blocks but the frame has {}",
            codebook.k_blocks(),
            frame.k_blocks()
        )));
    }
    if codebook.codewords[0][0].len() != spec.data_len() {
        return Err(invalid("codeword segments do not have N−P entries"));
    }
    Ok(())
}

/// Terms of the closed-form channel integral
/// `∫ p(y_d | x_d, h, L_i) p(h | y_p, L_i) dh` for one block and one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlBlockTerms<T: Scalar> {
    /// `ln det(ρN F_dᴴ Diag(|x_d|²) F_d + Σ⁻¹)`.
    pub log_det_posterior_precision: T,
    /// `‖y_d − √(ρN) Diag(x_d) F_d ĥ(x_d)‖²`.
    pub residual: T,
    /// `‖ĥ(x_d) − ĥ_p‖²` in the `Σ⁻¹` norm.
    pub prior_deviation: T,
    /// `ln det Σ⁻¹`.
    pub log_det_pilot_precision: T,
    pub data_len: usize,
}

impl<T: Scalar> MlBlockTerms<T> {
    /// `ln det(·) + residual + prior deviation`, the per-block cost minimized by the
    /// non-sparse decoder.
    pub fn objective(&self) -> T {
        self.log_det_posterior_precision + self.residual + self.prior_deviation
    }

    /// Exact log of the Gaussian channel integral,
    /// `−(N−P) ln π + ln det Σ⁻¹ − objective()`.
    pub fn log_marginal(&self) -> T {
        -T::from_usize(self.data_len).unwrap() * T::pi().ln() + self.log_det_pilot_precision - self.objective()
    }
}

/// Pilot-side quantities reused for every codeword.
struct MlHypothesis<T: Scalar> {
    f_data: CMat<T>,
    estimate: PilotEstimate<T>,
    prior_term: CVec<T>,
    log_det_precision: T,
    log_weight: T,
}

impl<T: Scalar> MlHypothesis<T> {
    fn new(f_data: CMat<T>, estimate: PilotEstimate<T>, log_weight: T) -> Result<Self> {
        let ch = hpd_cholesky(estimate.precision.clone(), "pilot precision")?;
        Ok(Self {
            prior_term: &estimate.precision * &estimate.h_nz_hat,
            log_det_precision: log_det(&ch),
            f_data,
            estimate,
            log_weight,
        })
    }

    fn terms(&self, spec: &ChannelSpec<T>, x_d: &CVec<T>, y_d: &CVec<T>) -> Result<MlBlockTerms<T>> {
        let b = scale_rows(x_d, &self.f_data) * cplx(spec.sqrt_rho_n());
        let bh = b.adjoint();
        let post = hermitian_part(&(&self.estimate.precision + &bh * &b));
        let ch = hpd_cholesky(post, "data-conditioned precision")?;
        let h = ch.solve(&(&self.prior_term + &bh * y_d));
        let dev = &h - &self.estimate.h_nz_hat;
        Ok(MlBlockTerms {
            log_det_posterior_precision: log_det(&ch),
            residual: (y_d - &b * &h).norm_squared(),
            prior_deviation: quad_form(&dev, &self.estimate.precision),
            log_det_pilot_precision: self.log_det_precision,
            data_len: y_d.len(),
        })
    }
}

/// Integral terms for one block given a hypothesis's pilot estimate and a candidate `x_d`.
pub fn ml_block_terms<T: Scalar>(
    spec: &ChannelSpec<T>,
    hypothesis_index: usize,
    estimate: &PilotEstimate<T>,
    x_data: &CVec<T>,
    y_data: &CVec<T>,
) -> Result<MlBlockTerms<T>> {
    let nd = spec.data_len();
    if x_data.len() != nd || y_data.len() != nd {
        return Err(invalid(format!("data vectors must have N−P={nd} entries")));
    }
    let s = spec.s_sparsity();
    if estimate.h_nz_hat.len() != s || estimate.precision.shape() != (s, s) {
        return Err(invalid("pilot estimate dimensions do not match S"));
    }
    let g = spec.check_hypothesis(hypothesis_index)?;
    MlHypothesis::new(g.f_data.clone(), estimate.clone(), T::zero())?.terms(spec, x_data, y_data)
}

fn sparse_hypotheses<T: Scalar>(spec: &ChannelSpec<T>, y_pilot: &CVec<T>) -> Result<Vec<MlHypothesis<T>>> {
    let post = support_posterior(spec, y_pilot)?;
    post.into_iter()
        .enumerate()
        .map(|(i, w)| {
            let g = spec.geometry(i);
            let log_weight = if w > T::zero() {
                w.ln()
            } else {
                T::lit(f64::NEG_INFINITY)
            };
            MlHypothesis::new(
                g.f_data.clone(),
                estimate_with_columns(spec, &g.f_pilot, y_pilot)?,
                log_weight,
            )
        })
        .collect()
}

/// `Σ_k ln Σ_i λ̂_i · p(y_d | x_d, y_p, L_i)` for every codeword.
pub fn ml_log_metrics<T: Scalar>(spec: &ChannelSpec<T>, codebook: &Codebook<T>, frame: &Frame<T>) -> Result<Vec<T>> {
    check_inputs(spec, codebook, frame)?;
    let per_block = frame
        .y_pilot
        .iter()
        .map(|y| sparse_hypotheses(spec, y))
        .collect::<Result<Vec<_>>>()?;
    let mut scratch = Vec::with_capacity(spec.hypothesis_count());
    codebook
        .codewords
        .iter()
        .map(|cw| {
            let mut total = T::zero();
            for ((hyps, x), y) in per_block.iter().zip(cw).zip(&frame.y_data) {
                scratch.clear();
                for h in hyps {
                    if h.log_weight.is_finite() {
                        scratch.push(h.log_weight + h.terms(spec, x, y)?.log_marginal());
                    }
                }
                total += log_sum_exp(&scratch);
            }
            Ok(total)
        })
        .collect()
}

/// Maximum-likelihood codeword for the sparse channel, averaging the per-hypothesis
/// channel integrals with the pilot-aided support posterior.
pub fn ml_decode_sparse<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    frame: &Frame<T>,
) -> Result<DecodeResult<T>> {
    let metrics = ml_log_metrics(spec, codebook, frame)?;
    let (codeword_index, metric_value) = argmax(metrics).ok_or_else(|| invalid("no codeword has a finite metric"))?;
    Ok(DecodeResult {
        codeword_index,
        per_block_support: None,
        metric_value,
    })
}

/// Per-codeword cost of the non-sparse ML decoder, which treats all `L` taps as
/// active with prior variance `1/L`.
pub fn ml_nonsparse_costs<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    frame: &Frame<T>,
) -> Result<Vec<T>> {
    check_inputs(spec, codebook, frame)?;
    let dense = spec.as_nonsparse()?;
    let g = dense.geometry(0);
    let per_block = frame
        .y_pilot
        .iter()
        .map(|y| {
            MlHypothesis::new(
                g.f_data.clone(),
                estimate_with_columns(&dense, &g.f_pilot, y)?,
                T::zero(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    codebook
        .codewords
        .iter()
        .map(|cw| {
            per_block
                .iter()
                .zip(cw)
                .zip(&frame.y_data)
                .try_fold(T::zero(), |acc, ((h, x), y)| {
                    Ok(acc + h.terms(&dense, x, y)?.objective())
                })
        })
        .collect()
}

pub fn ml_decode_nonsparse<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    frame: &Frame<T>,
) -> Result<DecodeResult<T>> {
    let costs = ml_nonsparse_costs(spec, codebook, frame)?;
    let (codeword_index, metric_value) = argmin(costs).ok_or_else(|| invalid("no codeword has a finite metric"))?;
    Ok(DecodeResult {
        codeword_index,
        per_block_support: None,
        metric_value,
    })
}

fn psd_tol<T: Scalar>(m: &CMat<T>) -> T {
    let scale = m.iter().fold(T::one(), |acc, z| acc.max(modulus(z)));
    T::structural_tol() * T::lit(1e3) * scale
}

/// Covariance of the WMD effective noise `√ρ Diag(x_d) h̃_f,d + v_d` averaged over
/// `x_d ~ CN(0, R_da)`: `ρ · (R_da ⊙ Σ_f,d) + I`.
pub fn effective_noise_cov<T: Scalar>(
    spec: &ChannelSpec<T>,
    sigma_f_data: &CMat<T>,
    data_cov: &CMat<T>,
) -> Result<CMat<T>> {
    let nd = spec.data_len();
    if sigma_f_data.shape() != (nd, nd) || data_cov.shape() != (nd, nd) {
        return Err(invalid(format!("covariances must be {nd}×{nd}")));
    }
    if !is_psd(sigma_f_data, psd_tol(sigma_f_data)) {
        return Err(invalid(
            "frequency-domain error covariance is not positive semi-definite",
        ));
    }
    if !is_psd(data_cov, psd_tol(data_cov)) {
        return Err(invalid("data covariance is not positive semi-definite"));
    }
    let weighted = data_cov.component_mul(sigma_f_data) * cplx(spec.snr_linear());
    Ok(hermitian_part(&(weighted + CMat::identity(nd, nd))))
}

/// Channel estimate on the data subcarriers and the whitening matrix for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct WmdBlockModel<T: Scalar> {
    /// `ĥ_f,d = √N F_d,i ĥ_nz,p,i`.
    pub h_fd_hat: CVec<T>,
    /// `Q = C^{-1/2}`.
    pub whitener: CMat<T>,
}

impl<T: Scalar> WmdBlockModel<T> {
    /// Builds the model from a hypothesis's tap estimate and error covariance.
    pub fn from_estimate(
        spec: &ChannelSpec<T>,
        hypothesis_index: usize,
        h_nz_hat: &CVec<T>,
        sigma_nz: &CMat<T>,
        data_cov: &CMat<T>,
    ) -> Result<Self> {
        let g = spec.check_hypothesis(hypothesis_index)?;
        let s = spec.s_sparsity();
        if h_nz_hat.len() != s || sigma_nz.shape() != (s, s) {
            return Err(invalid("pilot estimate dimensions do not match S"));
        }
        let n = T::from_usize(spec.n_block()).unwrap();
        let h_fd_hat = &g.f_data * h_nz_hat * cplx(n.sqrt());
        let sigma_fd = hermitian_part(&(&g.f_data * sigma_nz * g.f_data.adjoint() * cplx(n)));
        let c = effective_noise_cov(spec, &sigma_fd, data_cov)?;
        Ok(Self {
            h_fd_hat,
            whitener: inverse_sqrt_hermitian(&c)?,
        })
    }

    /// `‖Q (y_d − √ρ · x_d ⊙ ĥ_f,d)‖²`.
    pub fn metric(&self, spec: &ChannelSpec<T>, x_data: &CVec<T>, y_data: &CVec<T>) -> T {
        let pred = x_data.component_mul(&self.h_fd_hat) * cplx(spec.snr_linear().sqrt());
        (&self.whitener * (y_data - pred)).norm_squared()
    }
}

/// WMD metric of every codeword in one block.
pub(crate) fn wmd_block_metrics<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    block: usize,
    model: &WmdBlockModel<T>,
    y_data: &CVec<T>,
) -> Vec<T> {
    codebook
        .codewords
        .iter()
        .map(|cw| model.metric(spec, &cw[block], y_data))
        .collect()
}

/// WMD decoding with externally supplied per-block channel models, e.g. perfect CSI.
pub fn wmd_decode_with_models<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    y_data: &[CVec<T>],
    models: &[WmdBlockModel<T>],
) -> Result<DecodeResult<T>> {
    if codebook.is_empty() {
        return Err(invalid("codebook is empty"));
    }
    if y_data.len() != models.len() || codebook.k_blocks() != models.len() {
        return Err(invalid("block counts of observations, models and codebook differ"));
    }
    let nd = spec.data_len();
    if y_data.iter().any(|y| y.len() != nd)
        || models
            .iter()
            .any(|m| m.h_fd_hat.len() != nd || m.whitener.shape() != (nd, nd))
    {
        return Err(invalid(format!("data-side vectors must have N−P={nd} entries")));
    }
    let costs = codebook.codewords.iter().map(|cw| {
        models
            .iter()
            .zip(cw)
            .zip(y_data)
            .fold(T::zero(), |acc, ((m, x), y)| acc + m.metric(spec, x, y))
    });
    let (codeword_index, metric_value) = argmin(costs).ok_or_else(|| invalid("no codeword has a finite metric"))?;
    Ok(DecodeResult {
        codeword_index,
        per_block_support: None,
        metric_value,
    })
}

/// WMD models for a support-hypothesis vector, estimated from the frame's pilots.
pub fn wmd_models<T: Scalar>(
    spec: &ChannelSpec<T>,
    frame: &Frame<T>,
    support_hypotheses: &[usize],
    data_cov: &CMat<T>,
) -> Result<Vec<WmdBlockModel<T>>> {
    frame.validate(spec)?;
    if support_hypotheses.len() != frame.k_blocks() {
        return Err(invalid(format!(
            "{} support hypotheses for {} blocks",
            support_hypotheses.len(),
            frame.k_blocks()
        )));
    }
    support_hypotheses
        .iter()
        .zip(&frame.y_pilot)
        .map(|(&i, y)| {
            let g = spec.check_hypothesis(i)?;
            let est = estimate_with_columns(spec, &g.f_pilot, y)?;
            WmdBlockModel::from_estimate(spec, i, &est.h_nz_hat, &est.sigma_nz, data_cov)
        })
        .collect()
}

/// Decoupled decoder: support-hypothesized pilot MMSE estimates followed by WMD decoding.
pub fn wmd_decode<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    frame: &Frame<T>,
    support_hypotheses: &[usize],
) -> Result<DecodeResult<T>> {
    check_inputs(spec, codebook, frame)?;
    let models = wmd_models(spec, frame, support_hypotheses, &codebook.data_cov)?;
    let mut out = wmd_decode_with_models(spec, codebook, &frame.y_data, &models)?;
    out.per_block_support = Some(support_hypotheses.to_vec());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::build_codebook;
    use crate::model::draw_block;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn argmin_prefers_lowest_index_and_skips_nan() {
        assert_eq!(argmin([2.0, 1.0, 1.0, 3.0]), Some((1, 1.0)));
        assert_eq!(argmin([f64::NAN, 5.0, 4.0]), Some((2, 4.0)));
        assert_eq!(argmin::<f64>([f64::NAN]), None);
        assert_eq!(argmax([1.0, 3.0, 3.0]), Some((1, 3.0)));
    }

    #[test]
    fn singleton_codebook() {
        let spec = ChannelSpec::<f64>::builder(7, 4, 2)
            .pilot_count(2)
            .k_blocks(2)
            .build()
            .unwrap();
        let cb = build_codebook(&spec, 0, 0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let blocks: Vec<_> = (0..2).map(|_| draw_block(&spec, &mut rng)).collect();
        let frame = Frame::transmit(&spec, &blocks, cb.codeword(0)).unwrap();
        assert_eq!(ml_decode_sparse(&spec, &cb, &frame).unwrap().codeword_index, 0);
        assert_eq!(ml_decode_nonsparse(&spec, &cb, &frame).unwrap().codeword_index, 0);
        assert_eq!(wmd_decode(&spec, &cb, &frame, &[0, 1]).unwrap().codeword_index, 0);
    }

    #[test]
    fn effective_noise_special_cases() {
        let spec = ChannelSpec::<f64>::builder(7, 4, 2)
            .pilot_count(2)
            .snr_linear(3.0)
            .build()
            .unwrap();
        let nd = spec.data_len();
        let id = CMat::<f64>::identity(nd, nd);
        assert!((effective_noise_cov(&spec, &CMat::zeros(nd, nd), &id).unwrap() - &id).norm() < 1e-15);
        let c = effective_noise_cov(&spec, &(&id * cplx(0.25)), &id).unwrap();
        assert!((c - &id * cplx(1.75)).norm() < 1e-14);
        let mut bad = id.clone();
        bad[(0, 0)] = cplx(-1.0);
        assert!(effective_noise_cov(&spec, &bad, &id).is_err());
        assert!(effective_noise_cov(&spec, &id, &bad).is_err());
    }

    #[test]
    fn zero_error_whitener_is_identity() {
        let spec = ChannelSpec::<f64>::builder(7, 4, 2).pilot_count(2).build().unwrap();
        let m =
            WmdBlockModel::from_estimate(&spec, 3, &CVec::zeros(2), &CMat::zeros(2, 2), &CMat::identity(5, 5)).unwrap();
        assert!((m.whitener - CMat::identity(5, 5)).norm() < 1e-12);
    }
}
