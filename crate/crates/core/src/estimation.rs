//! Support-conditional pilot-aided MMSE channel estimation.
//!
//! Under a support hypothesis `L_i` the pilot observation is a linear Gaussian model
//! in `h_nz`, so the conditional mean and error covariance have closed forms. They
//! are evaluated here in information form,
//!
//! ```text
//! Σ_i = (S·I + ρN·F_pl,iᴴ F_pl,i)⁻¹,     ĥ_i = √(ρN) · Σ_i · F_pl,iᴴ · Diag(x_p*) · y_p,
//! ```
//!
//! which is algebraically identical to the `P×P` regularized-inverse form but only
//! factors an `S×S` matrix whose eigenvalues are bounded below by `S`. That keeps the
//! estimate accurate across the 60+ dB SNR range the experiments sweep.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cplx, hermitian_part, hpd_cholesky, identity, log_det, log_sum_exp, scale_rows, CMat, CVec};
use crate::model::{ChannelSpec, HypothesisGeometry, SupportSet};
use crate::scalar::Scalar;

/// Relative threshold below which a singular value counts as zero.
pub const PINV_RTOL: f64 = 1e-12;

/// Pilot-aided MMSE estimate of `h_nz` under one support hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotEstimate<T: Scalar> {
    pub h_nz_hat: CVec<T>,
    /// Error covariance `Σ_nz,p,i`.
    pub sigma_nz: CMat<T>,
    /// `Σ_nz,p,i⁻¹ = S·I + ρN·F_pl,iᴴ F_pl,i`.
    pub precision: CMat<T>,
}

/// Per-hypothesis estimate together with the pilot-aided support posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportHypothesisEstimate<T: Scalar> {
    pub hypothesis_index: usize,
    pub h_nz_hat: CVec<T>,
    pub sigma_nz: CMat<T>,
    pub posterior: T,
}

pub fn mmse_pilot_estimate<T: Scalar>(
    spec: &ChannelSpec<T>,
    hypothesis: &SupportSet,
    y_pilot: &CVec<T>,
) -> Result<PilotEstimate<T>> {
    pilot_estimate_for(spec, spec.resolve(hypothesis)?, y_pilot)
}

/// [`mmse_pilot_estimate`] addressed by hypothesis index.
pub fn mmse_pilot_estimate_at<T: Scalar>(
    spec: &ChannelSpec<T>,
    hypothesis_index: usize,
    y_pilot: &CVec<T>,
) -> Result<PilotEstimate<T>> {
    pilot_estimate_for(spec, spec.check_hypothesis(hypothesis_index)?, y_pilot)
}

pub(crate) fn pilot_precision<T: Scalar>(spec: &ChannelSpec<T>, f_pilot: &CMat<T>) -> CMat<T> {
    let s = T::from_usize(f_pilot.ncols()).unwrap();
    let rho_n = spec.snr_linear() * T::from_usize(spec.n_block()).unwrap();
    let gram = f_pilot.adjoint() * f_pilot;
    hermitian_part(&(identity::<T>(gram.nrows()) * cplx(s) + gram * cplx(rho_n)))
}

pub(crate) fn pilot_estimate_for<T: Scalar>(
    spec: &ChannelSpec<T>,
    g: &HypothesisGeometry<T>,
    y_pilot: &CVec<T>,
) -> Result<PilotEstimate<T>> {
    estimate_with_columns(spec, &g.f_pilot, y_pilot)
}

/// Estimate for an arbitrary pilot-row column block, which lets the non-sparse
/// decoder reuse the same routine with all `L` columns.
pub(crate) fn estimate_with_columns<T: Scalar>(
    spec: &ChannelSpec<T>,
    f_pilot: &CMat<T>,
    y_pilot: &CVec<T>,
) -> Result<PilotEstimate<T>> {
    if y_pilot.len() != spec.pilot_count() {
        return Err(invalid(format!(
            "pilot observation has {} entries, expected P={}",
            y_pilot.len(),
            spec.pilot_count()
        )));
    }
    let precision = pilot_precision(spec, f_pilot);
    let ch = hpd_cholesky(precision.clone(), "pilot precision")?;
    let sigma_nz = hermitian_part(&ch.inverse());
    let z = y_pilot.zip_map(spec.pilot_values(), |y, x| y * x.conj());
    let rhs = f_pilot.adjoint() * z * cplx(spec.sqrt_rho_n());
    let h_nz_hat = ch.solve(&rhs);
    Ok(PilotEstimate {
        h_nz_hat,
        sigma_nz,
        precision,
    })
}

/// `ln p(y_p | L_i)` for every hypothesis, with `y_p | L_i ~ CN(0, (ρN/S)·D F Fᴴ Dᴴ + I)`.
pub fn support_log_likelihoods<T: Scalar>(spec: &ChannelSpec<T>, y_pilot: &CVec<T>) -> Result<Vec<T>> {
    let p = spec.pilot_count();
    if y_pilot.len() != p {
        return Err(invalid(format!(
            "pilot observation has {} entries, expected P={p}",
            y_pilot.len()
        )));
    }
    let scale = spec.snr_linear() * T::from_usize(spec.n_block()).unwrap() / T::from_usize(spec.s_sparsity()).unwrap();
    let ln_pi = T::pi().ln();
    (0..spec.hypothesis_count())
        .map(|i| {
            let dxf = scale_rows(spec.pilot_values(), &spec.geometry(i).f_pilot);
            let cov = hermitian_part(&(&dxf * dxf.adjoint() * cplx(scale) + identity::<T>(p)));
            let ch = hpd_cholesky(cov, "pilot covariance")?;
            let quad = y_pilot.dotc(&ch.solve(y_pilot)).re;
            Ok(-T::from_usize(p).unwrap() * ln_pi - log_det(&ch) - quad)
        })
        .collect()
}

/// Pilot-aided support posterior `Pr{L = L_i | y_p, x_p}`, normalized in the log domain.
pub fn support_posterior<T: Scalar>(spec: &ChannelSpec<T>, y_pilot: &CVec<T>) -> Result<Vec<T>> {
    let ll = support_log_likelihoods(spec, y_pilot)?;
    let log_w: Vec<T> = ll
        .iter()
        .zip(spec.support_prior())
        .map(|(&l, &w)| {
            if w > T::zero() {
                w.ln() + l
            } else {
                T::lit(f64::NEG_INFINITY)
            }
        })
        .collect();
    let norm = log_sum_exp(&log_w);
    if !norm.is_finite() {
        return Err(Error::Numerical("support posterior is not normalizable".into()));
    }
    Ok(log_w
        .into_iter()
        .map(|w| if w.is_finite() { (w - norm).exp() } else { T::zero() })
        .collect())
}

/// Estimates and posteriors for all `M` hypotheses of one block.
pub fn estimate_all_hypotheses<T: Scalar>(
    spec: &ChannelSpec<T>,
    y_pilot: &CVec<T>,
) -> Result<Vec<SupportHypothesisEstimate<T>>> {
    let post = support_posterior(spec, y_pilot)?;
    post.into_iter()
        .enumerate()
        .map(|(i, posterior)| {
            let est = mmse_pilot_estimate_at(spec, i, y_pilot)?;
            Ok(SupportHypothesisEstimate {
                hypothesis_index: i,
                h_nz_hat: est.h_nz_hat,
                sigma_nz: est.sigma_nz,
                posterior,
            })
        })
        .collect()
}

/// MMSE estimate of `h_nz` given the data hypothesis `x_d`, using the pilot estimate as prior:
///
/// `ĥ(x_d) = ĥ + √(ρN) Σ Aᴴ (ρN A Σ Aᴴ + I)⁻¹ (y_d − √(ρN) A ĥ)`,  `A = Diag(x_d) F_d,i`.
///
/// Accepts any PSD `Σ`, including zero.
pub fn mmse_data_refine<T: Scalar>(
    spec: &ChannelSpec<T>,
    hypothesis: &SupportSet,
    h_nz_hat: &CVec<T>,
    sigma_nz: &CMat<T>,
    x_data: &CVec<T>,
    y_data: &CVec<T>,
) -> Result<CVec<T>> {
    let g = spec.resolve(hypothesis)?;
    let s = spec.s_sparsity();
    let nd = spec.data_len();
    if h_nz_hat.len() != s || sigma_nz.shape() != (s, s) {
        return Err(invalid("pilot estimate dimensions do not match S"));
    }
    if x_data.len() != nd || y_data.len() != nd {
        return Err(invalid(format!("data vectors must have N−P={nd} entries")));
    }
    let b = scale_rows(x_data, &g.f_data) * cplx(spec.sqrt_rho_n());
    let sb = sigma_nz * b.adjoint();
    let k = hermitian_part(&(&b * &sb + identity::<T>(nd)));
    let ch = hpd_cholesky(k, "data innovation covariance")?;
    let innovation = y_data - &b * h_nz_hat;
    Ok(h_nz_hat + sb * ch.solve(&innovation))
}

/// Closed-form `E‖h_nz − ĥ_nz,i‖²` as a function of `ρ` for a fixed pilot layout,
/// hypothesis and true support.
///
/// With `F_pl,i = U Σ Vᴴ` and `F_pl,true = U (Σ + Δ) Vᴴ`:
///
/// * correct hypothesis: `Σ_l 1/(N σ_l² ρ + S)`, decaying like `1/ρ`;
/// * wrong hypothesis: the three-term expansion in `Δ`, converging to the floor
///   `(1/S)·tr{Σ⁺ Δ Δᴴ Σ⁺ᴴ} > 0`.
///
/// Only the first `S` rows of `Δ` enter either expression (the rest are annihilated
/// by `Σ⁺` and the shrinkage matrix), so `Δ` is stored as `Uᴴ F_pl,true V − Σ` with
/// the thin `U`.
#[derive(Debug, Clone)]
pub struct MseCurve<T: Scalar> {
    n_block: usize,
    singular_values: Vec<T>,
    delta: Option<CMat<T>>,
}

impl<T: Scalar> MseCurve<T> {
    pub fn is_correct_support(&self) -> bool {
        self.delta.is_none()
    }

    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    pub fn delta(&self) -> Option<&CMat<T>> {
        self.delta.as_ref()
    }

    /// Expected squared estimation error at SNR `rho`.
    pub fn mse(&self, rho: T) -> T {
        let s = T::from_usize(self.singular_values.len()).unwrap();
        if rho <= T::zero() {
            // estimate is zero, so the error is the whole unit-energy tap vector
            return T::one();
        }
        let n = T::from_usize(self.n_block).unwrap();
        let c = s / (rho * n);
        let matched = self
            .singular_values
            .iter()
            .fold(T::zero(), |acc, &sv| acc + T::one() / (n * sv * sv * rho + s));
        let Some(delta) = &self.delta else {
            return matched;
        };
        let shrink: Vec<T> = self.singular_values.iter().map(|&sv| sv / (sv * sv + c)).collect();
        let resid: Vec<T> = self.singular_values.iter().map(|&sv| c / (sv * sv + c)).collect();
        let mut cross = T::zero();
        let mut quad = T::zero();
        for l in 0..shrink.len() {
            // tr{(I − DᴴΣ)ΔᴴD + DᴴΔ(I − ΣᴴD)} reduces to 2·Re Σ_l r_l d_l Δ_ll
            cross += T::lit(2.0) * resid[l] * shrink[l] * delta[(l, l)].re;
            let row = (0..delta.ncols()).fold(T::zero(), |acc, j| acc + delta[(l, j)].norm_sqr());
            quad += shrink[l] * shrink[l] * row;
        }
        matched - cross / s + quad / s
    }

    /// `lim_{ρ→∞}` of [`Self::mse`]: zero for the correct support.
    pub fn floor(&self) -> T {
        let Some(delta) = &self.delta else {
            return T::zero();
        };
        let s = T::from_usize(self.singular_values.len()).unwrap();
        let smax = self.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let mut acc = T::zero();
        for (l, &sv) in self.singular_values.iter().enumerate() {
            if sv <= T::lit(PINV_RTOL) * smax {
                continue;
            }
            let row = (0..delta.ncols()).fold(T::zero(), |a, j| a + delta[(l, j)].norm_sqr());
            acc += row / (sv * sv);
        }
        acc / s
    }
}

pub fn closed_form_mse<T: Scalar>(
    spec: &ChannelSpec<T>,
    hypothesis: &SupportSet,
    true_support: &SupportSet,
) -> Result<MseCurve<T>> {
    if spec.pilot_count() < spec.s_sparsity() {
        return Err(invalid(format!(
            "closed-form MSE needs P ≥ S, got P={}, S={}",
            spec.pilot_count(),
            spec.s_sparsity()
        )));
    }
    let gi = spec.resolve(hypothesis)?;
    let gt = spec.resolve(true_support)?;
    let svd = gi.f_pilot.clone().svd(true, true);
    let sv: Vec<T> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if sv.iter().any(|&x| x <= T::lit(PINV_RTOL) * smax) {
        return Err(Error::Numerical(format!(
            "pilot submatrix for support {hypothesis} is rank deficient"
        )));
    }
    let delta = if gi.support == gt.support {
        None
    } else {
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested Vᴴ").adjoint();
        let sigma = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            sv.len(),
            sv.iter().map(|&x| Complex::new(x, T::zero())),
        ));
        Some(u.adjoint() * &gt.f_pilot * v - sigma)
    };
    Ok(MseCurve {
        n_block: spec.n_block(),
        singular_values: sv,
        delta,
    })
}
