//! Achievable rate of the decoupled decoder under the support genie.
//!
//! For one draw, `R = (1/N) log₂ det(I + ρ C⁻¹ Diag(ĥ_f,d) R_da Diag(ĥ_f,d)ᴴ)` with
//! `C = ρ (R_da ⊙ Σ_f,d) + I`. It is evaluated as `log det(C + ρG) − log det C` so
//! that both determinants are of Hermitian positive-definite matrices.

use nalgebra::{Cholesky, Dyn};
use num_complex::Complex64;
use sparsepat::{effective_noise_cov, CMat, CVec, ChannelSpec64, PilotEstimate64};

use crate::{HarnessError, Result};

fn ln_det_hpd(m: CMat<f64>, what: &str) -> Result<f64> {
    let ch: Cholesky<Complex64, Dyn> = m
        .cholesky()
        .ok_or_else(|| HarnessError::Spec(sparsepat::Error::Numerical(format!("{what} is not positive definite"))))?;
    Ok(2.0 * ch.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// Per-draw rate in bits per channel use for a data-subcarrier channel estimate
/// `h_fd_hat` with error covariance `sigma_fd`.
pub fn rate_per_draw(
    spec: &ChannelSpec64,
    h_fd_hat: &CVec<f64>,
    sigma_fd: &CMat<f64>,
    data_cov: &CMat<f64>,
) -> Result<f64> {
    let c = effective_noise_cov(spec, sigma_fd, data_cov)?;
    let d = CMat::from_diagonal(h_fd_hat);
    let signal = &d * data_cov * d.adjoint() * Complex64::new(spec.snr_linear(), 0.0);
    let total = &c + signal;
    let total = (&total + total.adjoint()) * Complex64::new(0.5, 0.0);
    let nats = ln_det_hpd(total, "C + ρG")? - ln_det_hpd(c, "effective noise covariance")?;
    Ok(nats / (spec.n_block() as f64 * std::f64::consts::LN_2))
}

/// Data-subcarrier estimate and error covariance for hypothesis `i`:
/// `ĥ_f,d = √N F_d ĥ_nz` and `Σ_f,d = N F_d Σ_nz F_dᴴ`.
pub fn frequency_domain_estimate(spec: &ChannelSpec64, i: usize, est: &PilotEstimate64) -> (CVec<f64>, CMat<f64>) {
    let fd = &spec.geometry(i).f_data;
    let n = spec.n_block() as f64;
    let h = fd * &est.h_nz_hat * Complex64::new(n.sqrt(), 0.0);
    let s = fd * &est.sigma_nz * fd.adjoint() * Complex64::new(n, 0.0);
    (h, (&s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Coherent rate `(1/N) log₂ det(I + ρ Diag(h) R_da Diag(h)ᴴ)` via an LU determinant.
pub fn coherent_rate(spec: &ChannelSpec64, h_fd: &CVec<f64>, data_cov: &CMat<f64>) -> f64 {
    let nd = h_fd.len();
    let d = CMat::from_diagonal(h_fd);
    let m = CMat::identity(nd, nd) + &d * data_cov * d.adjoint() * Complex64::new(spec.snr_linear(), 0.0);
    m.determinant().re.log2() / spec.n_block() as f64
}
