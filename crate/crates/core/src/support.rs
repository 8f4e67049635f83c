//! Channel-support decoders.
//!
//! PASE picks the support whose pilot column space best explains the de-modulated
//! pilot observation. DASD walks through support-hypothesis vectors, decodes data under
//! each with the WMD decoder, and stops at the first message whose check bits agree.

use crate::codec::Codebook;
use crate::decode::{argmin, wmd_block_metrics, WmdBlockModel};
use crate::error::{invalid, Error, Result};
use crate::estimation::{estimate_with_columns, PINV_RTOL};
use crate::linalg::{cplx, modulus, CMat, CVec};
use crate::model::{ChannelSpec, Frame};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PaseResult<T: Scalar> {
    pub chosen_index: usize,
    /// Projection-error energy per hypothesis.
    pub residuals: Vec<T>,
}

/// Orthonormal basis of `range(F_pl,i)` from a thin QR factorization.
pub fn pilot_column_basis<T: Scalar>(spec: &ChannelSpec<T>, hypothesis_index: usize) -> Result<CMat<T>> {
    let f = &spec.check_hypothesis(hypothesis_index)?.f_pilot;
    if f.nrows() < f.ncols() {
        return Err(invalid(format!(
            "P={} pilots cannot resolve S={} taps",
            f.nrows(),
            f.ncols()
        )));
    }
    let qr = f.clone().qr();
    let r = qr.r();
    let diag: Vec<T> = (0..r.ncols()).map(|j| modulus(&r[(j, j)])).collect();
    let largest = diag.iter().fold(T::zero(), |a, &b| a.max(b));
    if diag.iter().any(|&d| d <= largest * T::lit(PINV_RTOL)) {
        return Err(Error::Numerical(format!(
            "pilot submatrix of hypothesis {hypothesis_index} is rank deficient"
        )));
    }
    Ok(qr.q())
}

/// `Π⊥ = I − Q Qᴴ`, the projector onto the orthogonal complement of `range(F_pl,i)`.
pub fn complement_projector<T: Scalar>(spec: &ChannelSpec<T>, hypothesis_index: usize) -> Result<CMat<T>> {
    let q = pilot_column_basis(spec, hypothesis_index)?;
    let p = q.nrows();
    Ok(CMat::identity(p, p) - &q * q.adjoint())
}

/// `z = Diag(x_p*) y_p / √(ρN)`.
fn demodulate<T: Scalar>(spec: &ChannelSpec<T>, y_pilot: &CVec<T>) -> Result<CVec<T>> {
    if y_pilot.len() != spec.pilot_count() {
        return Err(invalid(format!(
            "pilot observation has {} entries, expected P={}",
            y_pilot.len(),
            spec.pilot_count()
        )));
    }
    if spec.snr_linear() <= T::zero() {
        return Err(invalid("support detection from pilots needs ρ > 0"));
    }
    let z = y_pilot.zip_map(spec.pilot_values(), |y, x| y * x.conj());
    Ok(z * cplx(T::one() / spec.sqrt_rho_n()))
}

fn bases<T: Scalar>(spec: &ChannelSpec<T>) -> Result<Vec<CMat<T>>> {
    if spec.pilot_count() == spec.s_sparsity() && spec.hypothesis_count() > 1 {
        log::warn!("P = S pilots: every support fits the pilots exactly, so PASE cannot discriminate");
    }
    (0..spec.hypothesis_count())
        .map(|i| pilot_column_basis(spec, i))
        .collect()
}

fn residual<T: Scalar>(basis: &CMat<T>, z: &CVec<T>) -> T {
    let proj = basis.adjoint() * z;
    (z - basis * proj).norm_squared()
}

fn pick<T: Scalar>(residuals: Vec<T>) -> Result<PaseResult<T>> {
    let (chosen_index, _) =
        argmin(residuals.iter().copied()).ok_or_else(|| Error::Numerical("no finite PASE residual".into()))?;
    Ok(PaseResult {
        chosen_index,
        residuals,
    })
}

/// Pilot-aided support estimate for one block.
pub fn pase_detect<T: Scalar>(spec: &ChannelSpec<T>, y_pilot: &CVec<T>) -> Result<PaseResult<T>> {
    let z = demodulate(spec, y_pilot)?;
    pick(bases(spec)?.iter().map(|q| residual(q, &z)).collect())
}

/// Support estimate for blocks that share one support: residuals averaged over blocks.
pub fn pase_detect_fixed_support<T: Scalar>(spec: &ChannelSpec<T>, y_pilots: &[CVec<T>]) -> Result<PaseResult<T>> {
    if y_pilots.is_empty() {
        return Err(invalid("need at least one pilot observation"));
    }
    let zs = y_pilots
        .iter()
        .map(|y| demodulate(spec, y))
        .collect::<Result<Vec<_>>>()?;
    let k = T::from_usize(zs.len()).unwrap();
    let residuals = bases(spec)?
        .iter()
        .map(|q| zs.iter().fold(T::zero(), |acc, z| acc + residual(q, z)) / k)
        .collect();
    pick(residuals)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DasdOptions {
    /// Visit hypotheses per block in ascending PASE-residual order instead of index order.
    /// Not part of the basic procedure; off by default.
    pub pase_ordering: bool,
}

/// One hypothesis vector tried by DASD.
#[derive(Debug, Clone, PartialEq)]
pub struct DasdStep {
    pub hypotheses: Vec<usize>,
    pub codeword_index: usize,
    pub info: u64,
    pub check: u64,
    pub crc_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DasdOutcome<T: Scalar> {
    /// Decoded information message `ŵ`.
    pub message: u64,
    pub codeword_index: usize,
    /// WMD metric of the returned codeword under the stopping hypothesis.
    pub metric_value: T,
    pub stop_hypotheses: Vec<usize>,
    /// Final hypothesis vector of the visiting order.
    pub last_hypotheses: Vec<usize>,
    pub crc_passed: bool,
    pub visited: Vec<DasdStep>,
}

/// Classification of a DASD run against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DasdEvent {
    Correct,
    /// Stopped at the true support vector but decoded the wrong message.
    E1,
    /// Ran to the last hypothesis vector, which is not the true one, and decoded wrongly.
    E2,
    /// Stopped early at a wrong support vector whose check bits matched by accident.
    E3,
}

/// Labels an outcome given the true per-block supports and the transmitted message.
pub fn label_event<T: Scalar>(outcome: &DasdOutcome<T>, true_hypotheses: &[usize], true_message: u64) -> DasdEvent {
    if outcome.message == true_message {
        DasdEvent::Correct
    } else if outcome.stop_hypotheses == true_hypotheses {
        DasdEvent::E1
    } else if outcome.stop_hypotheses == outcome.last_hypotheses {
        DasdEvent::E2
    } else {
        DasdEvent::E3
    }
}

pub fn dasd_decode<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    frame: &Frame<T>,
) -> Result<DasdOutcome<T>> {
    dasd_decode_with(spec, codebook, frame, DasdOptions::default())
}

/// Data-aided support decoding over all `M^K` hypothesis vectors.
pub fn dasd_decode_with<T: Scalar>(
    spec: &ChannelSpec<T>,
    codebook: &Codebook<T>,
    frame: &Frame<T>,
    options: DasdOptions,
) -> Result<DasdOutcome<T>> {
    frame.validate(spec)?;
    let k = frame.k_blocks();
    let m = spec.hypothesis_count();
    if codebook.is_empty() || codebook.k_blocks() != k {
        return Err(invalid("codebook must be nonempty and span the frame's blocks"));
    }
    if codebook.codewords[0][0].len() != spec.data_len() {
        return Err(invalid("codeword segments do not have N−P entries"));
    }
    if m.checked_pow(k as u32).is_none_or(|n| n > 1 << 24) {
        return Err(invalid(format!(
            "{m}^{k} support hypothesis vectors is too many to enumerate"
        )));
    }

    // tables[b][i][c]: WMD metric of codeword c in block b under hypothesis i
    let tables = (0..k)
        .map(|b| {
            (0..m)
                .map(|i| {
                    let g = spec.geometry(i);
                    let est = estimate_with_columns(spec, &g.f_pilot, &frame.y_pilot[b])?;
                    let model =
                        WmdBlockModel::from_estimate(spec, i, &est.h_nz_hat, &est.sigma_nz, &codebook.data_cov)?;
                    Ok(wmd_block_metrics(spec, codebook, b, &model, &frame.y_data[b]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let orders: Vec<Vec<usize>> = if options.pase_ordering {
        frame
            .y_pilot
            .iter()
            .map(|y| {
                let res = pase_detect(spec, y)?.residuals;
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| res[a].partial_cmp(&res[b]).unwrap_or(std::cmp::Ordering::Equal));
                Ok(order)
            })
            .collect::<Result<_>>()?
    } else {
        vec![(0..m).collect(); k]
    };
    let last_hypotheses: Vec<usize> = orders.iter().map(|o| o[m - 1]).collect();

    let mut digits = vec![0usize; k];
    let mut visited = Vec::new();
    let mut sums = vec![T::zero(); codebook.len()];
    loop {
        let hyps: Vec<usize> = digits.iter().zip(&orders).map(|(&d, o)| o[d]).collect();
        sums.iter_mut().for_each(|s| *s = T::zero());
        for (b, &i) in hyps.iter().enumerate() {
            for (s, &v) in sums.iter_mut().zip(&tables[b][i]) {
                *s += v;
            }
        }
        let (codeword_index, metric_value) =
            argmin(sums.iter().copied()).ok_or_else(|| Error::Numerical("no finite WMD metric".into()))?;
        let (info, check) = codebook.split_composite(codeword_index)?;
        let crc_ok = codebook.check_crc(info, check);
        let is_last = hyps == last_hypotheses;
        visited.push(DasdStep {
            hypotheses: hyps.clone(),
            codeword_index,
            info,
            check,
            crc_ok,
        });
        if crc_ok || is_last {
            return Ok(DasdOutcome {
                message: info,
                codeword_index,
                metric_value,
                stop_hypotheses: hyps,
                last_hypotheses,
                crc_passed: crc_ok,
                visited,
            });
        }
        // odometer step, last block fastest
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < m {
                break;
            }
            *d = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_defect;

    #[test]
    fn projector_matches_normal_equations() {
        let spec = ChannelSpec::<f64>::builder(7, 4, 2).pilot_count(3).build().unwrap();
        for i in 0..spec.hypothesis_count() {
            let pi = complement_projector(&spec, i).unwrap();
            let f = &spec.geometry(i).f_pilot;
            let gram_inv = (f.adjoint() * f).try_inverse().unwrap();
            let textbook = CMat::identity(3, 3) - f * gram_inv * f.adjoint();
            assert!((&pi - textbook).norm() < 1e-12);
            assert!((&pi * &pi - &pi).norm() < 1e-12);
            assert!(hermitian_defect(&pi) < 1e-12);
        }
    }

    #[test]
    fn single_hypothesis_always_chosen() {
        let spec = ChannelSpec::<f64>::builder(7, 3, 3).pilot_count(4).build().unwrap();
        let y = CVec::from_element(4, cplx(0.3));
        assert_eq!(pase_detect(&spec, &y).unwrap().chosen_index, 0);
    }

    #[test]
    fn rejects_zero_snr_and_too_few_pilots() {
        let spec = ChannelSpec::<f64>::builder(7, 4, 2)
            .pilot_count(3)
            .snr_linear(0.0)
            .build()
            .unwrap();
        assert!(pase_detect(&spec, &CVec::zeros(3)).is_err());
        let spec = ChannelSpec::<f64>::builder(7, 4, 2).pilot_count(1).build().unwrap();
        assert!(pase_detect(&spec, &CVec::zeros(1)).is_err());
    }

    #[test]
    fn labels_follow_stop_rules() {
        let base = DasdOutcome::<f64> {
            message: 1,
            codeword_index: 0,
            metric_value: 0.0,
            stop_hypotheses: vec![0, 1],
            last_hypotheses: vec![5, 5],
            crc_passed: true,
            visited: vec![],
        };
        assert_eq!(label_event(&base, &[0, 1], 1), DasdEvent::Correct);
        assert_eq!(label_event(&base, &[0, 1], 2), DasdEvent::E1);
        assert_eq!(label_event(&base, &[2, 1], 2), DasdEvent::E3);
        let exhausted = DasdOutcome {
            stop_hypotheses: vec![5, 5],
            crc_passed: false,
            ..base.clone()
        };
        assert_eq!(label_event(&exhausted, &[2, 1], 2), DasdEvent::E2);
        assert_eq!(label_event(&exhausted, &[5, 5], 2), DasdEvent::E1);
    }
}
