mod common;

use common::*;
use sparsepat::model::complex_normal_vec;
use sparsepat::{
    build_codebook, build_codebook_with_cov, draw_block, effective_noise_cov, ml_block_terms, ml_decode_nonsparse,
    ml_decode_sparse, ml_log_metrics, ml_nonsparse_costs, mmse_data_refine, mmse_pilot_estimate_at, transmit_receive,
    wmd_decode, wmd_decode_with_models, CMat, CVec, ChannelSpec64, Frame, WmdBlockModel,
};

fn frame_for(spec: &ChannelSpec64, cw: &[CVec<f64>], seed: u64) -> (Frame<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let blocks: Vec<_> = (0..cw.len()).map(|_| draw_block(spec, &mut r)).collect();
    let sup = blocks.iter().map(|b| b.support_index).collect();
    (Frame::transmit(spec, &blocks, cw).unwrap(), sup)
}

/// `ln ∫ p(y_d | x_d, h) p(h | y_p) dh` for scalar `h` by trapezoidal quadrature on
/// a `pts × pts` grid spanning ±6 posterior standard deviations per real axis.
fn quadrature_log_integral(
    spec: &ChannelSpec64,
    i: usize,
    h_hat: num_complex::Complex64,
    var: f64,
    x: &CVec<f64>,
    y: &CVec<f64>,
    pts: usize,
) -> f64 {
    let sd = (var / 2.0).sqrt();
    let half = 6.0 * sd;
    let step = 2.0 * half / (pts - 1) as f64;
    let amp = (spec.snr_linear() * spec.n_block() as f64).sqrt();
    let fd = dense_dft(spec.n_block(), spec.data_indices(), spec.support(i).indices())
        .column(0)
        .into_owned();
    let g = x.component_mul(&fd) * c(amp);
    let nd = y.len() as f64;
    let pi = std::f64::consts::PI;
    let mut logs = Vec::with_capacity(pts * pts);
    for a in 0..pts {
        for b in 0..pts {
            let h = h_hat + num_complex::Complex64::new(-half + a as f64 * step, -half + b as f64 * step);
            let w: f64 =
                if a == 0 || a == pts - 1 { 0.5 } else { 1.0 } * if b == 0 || b == pts - 1 { 0.5 } else { 1.0 };
            let resid = (y - &g * h).norm_squared();
            let prior = (h - h_hat).norm_sqr() / var;
            logs.push(w.ln() - nd * pi.ln() - resid - (pi * var).ln() - prior);
        }
    }
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln() + 2.0 * step.ln()
}

#[test]
fn closed_form_integral_matches_quadrature() {
    let spec = ChannelSpec64::builder(7, 3, 1)
        .pilot_count(2)
        .snr_db(0.0)
        .build()
        .unwrap();
    let cb = build_codebook(&spec, 2, 0, 3).unwrap();
    let mut r = rng(61);
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let b = draw_block(&spec, &mut r);
        let (yp, yd) = transmit_receive(&spec, &b, &cb.codeword(trial % 4)[0]).unwrap();
        for i in 0..spec.hypothesis_count() {
            let est = mmse_pilot_estimate_at(&spec, i, &yp).unwrap();
            let mut diffs = Vec::new();
            for cw in &cb.codewords {
                let terms = ml_block_terms(&spec, i, &est, &cw[0], &yd).unwrap();
                let q = quadrature_log_integral(&spec, i, est.h_nz_hat[0], est.sigma_nz[(0, 0)].re, &cw[0], &yd, 201);
                worst = worst.max(((q - terms.log_marginal()).exp() - 1.0).abs());
                diffs.push((terms.log_marginal(), q));
            }
            for w in diffs.windows(2) {
                assert!(((w[0].0 - w[1].0) - (w[0].1 - w[1].1)).abs() < 1e-3);
            }
        }
    }
    assert!(worst < 0.01, "worst relative deviation {worst}");
}

#[test]
fn block_terms_agree_with_data_refinement() {
    let spec = spec(7, 4, 2, 3, 12.0);
    let mut r = rng(62);
    for _ in 0..20 {
        let b = draw_block(&spec, &mut r);
        let x = complex_normal_vec(&mut r, 4, 1.0);
        let (yp, yd) = transmit_receive(&spec, &b, &x).unwrap();
        for i in 0..spec.hypothesis_count() {
            let est = mmse_pilot_estimate_at(&spec, i, &yp).unwrap();
            let t = ml_block_terms(&spec, i, &est, &x, &yd).unwrap();
            let h = mmse_data_refine(&spec, spec.support(i), &est.h_nz_hat, &est.sigma_nz, &x, &yd).unwrap();
            let fd = dense_dft(7, spec.data_indices(), spec.support(i).indices());
            let amp = (spec.snr_linear() * 7.0).sqrt();
            let resid = (&yd - diag(&x) * fd.clone() * &h * c(amp)).norm_squared();
            let dev = &h - &est.h_nz_hat;
            let prior = dev.dotc(&(est.sigma_nz.clone().try_inverse().unwrap() * &dev)).re;
            let post = fd.adjoint() * diag(&x.map(|z| c(z.norm_sqr()))) * &fd * c(amp * amp)
                + est.sigma_nz.clone().try_inverse().unwrap();
            let logdet = post.determinant().re.ln();
            assert!((t.residual - resid).abs() < 1e-8 * (1.0 + resid));
            assert!((t.prior_deviation - prior).abs() < 1e-8 * (1.0 + prior));
            assert!((t.log_det_posterior_precision - logdet).abs() < 1e-8 * (1.0 + logdet.abs()));
        }
    }
}

#[test]
fn sparse_and_nonsparse_agree_when_s_equals_l() {
    let spec = ChannelSpec64::builder(7, 3, 3)
        .pilot_count(3)
        .snr_db(10.0)
        .k_blocks(2)
        .build()
        .unwrap();
    for trial in 0..100u64 {
        let cb = build_codebook(&spec, 3, 1, trial).unwrap();
        let sent = (trial as usize * 7) % cb.len();
        let (frame, _) = frame_for(&spec, cb.codeword(sent), 1000 + trial);
        let a = ml_decode_sparse(&spec, &cb, &frame).unwrap();
        let b = ml_decode_nonsparse(&spec, &cb, &frame).unwrap();
        assert_eq!(a.codeword_index, b.codeword_index);
        // single-hypothesis log metric is minus the non-sparse cost up to a constant
        let lm = ml_log_metrics(&spec, &cb, &frame).unwrap();
        let cost = ml_nonsparse_costs(&spec, &cb, &frame).unwrap();
        let offset = lm[0] + cost[0];
        assert!(lm.iter().zip(&cost).all(|(l, c)| (l + c - offset).abs() < 1e-8));
    }
}

#[test]
fn ml_decodes_reliably_at_high_snr() {
    let spec = ChannelSpec64::builder(7, 3, 1)
        .pilot_count(1)
        .snr_linear(1e4)
        .k_blocks(2)
        .build()
        .unwrap();
    let mut correct = 0;
    for trial in 0..200u64 {
        let cb = build_codebook(&spec, 3, 0, 7 + trial).unwrap();
        let sent = trial as usize % 8;
        let (frame, _) = frame_for(&spec, cb.codeword(sent), 2000 + trial);
        let res = ml_decode_sparse(&spec, &cb, &frame).unwrap();
        correct += usize::from(res.codeword_index == sent);
        let metrics = ml_log_metrics(&spec, &cb, &frame).unwrap();
        let shifted: Vec<f64> = metrics.iter().map(|m| 3.0 * m - 17.0).collect();
        let best =
            shifted.iter().cloned().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        assert_eq!(best.0, res.codeword_index);
        assert_eq!(ml_decode_sparse(&spec, &cb, &frame).unwrap(), res);
    }
    assert!(correct >= 198, "{correct}/200");
}

fn true_models(spec: &ChannelSpec64, frame_seed: u64, k: usize) -> Vec<sparsepat::BlockRealization64> {
    let mut r = rng(frame_seed);
    (0..k).map(|_| draw_block(spec, &mut r)).collect()
}

#[test]
fn wmd_with_perfect_csi_and_no_noise_is_exact() {
    let spec = ChannelSpec64::builder(7, 4, 2)
        .pilot_count(2)
        .snr_db(20.0)
        .k_blocks(2)
        .build()
        .unwrap();
    let cb = build_codebook(&spec, 4, 0, 8).unwrap();
    let mut blocks = true_models(&spec, 71, 2);
    for b in &mut blocks {
        b.noise_freq = CVec::zeros(7);
    }
    let frame = Frame::transmit(&spec, &blocks, cb.codeword(5)).unwrap();
    let models: Vec<_> = blocks
        .iter()
        .map(|b| {
            WmdBlockModel::from_estimate(&spec, b.support_index, &b.taps_nz, &CMat::zeros(2, 2), &cb.data_cov).unwrap()
        })
        .collect();
    let res = wmd_decode_with_models(&spec, &cb, &frame.y_data, &models).unwrap();
    assert_eq!(res.codeword_index, 5);
    assert!(res.metric_value < 1e-15, "{}", res.metric_value);
    // unit whitener: the metric is plain Euclidean distance
    let rho = spec.snr_linear();
    let euclid: Vec<f64> = cb
        .codewords
        .iter()
        .map(|cw| {
            (0..2)
                .map(|k| (&frame.y_data[k] - cw[k].component_mul(&models[k].h_fd_hat) * c(rho.sqrt())).norm_squared())
                .sum()
        })
        .collect();
    let nn = euclid
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
    assert_eq!(nn.0, res.codeword_index);
    for m in &models {
        assert!((&m.whitener - CMat::identity(5, 5)).norm() < 1e-12);
    }
}

#[test]
fn wmd_with_true_support_has_low_block_error() {
    let spec = ChannelSpec64::builder(7, 4, 2)
        .pilot_count(2)
        .snr_linear(1e4)
        .k_blocks(2)
        .build()
        .unwrap();
    let mut errors = 0;
    for trial in 0..500u64 {
        let cb = build_codebook(&spec, 4, 0, 5000 + trial).unwrap();
        let sent = trial as usize % 16;
        let (frame, sup) = frame_for(&spec, cb.codeword(sent), 9000 + trial);
        let res = wmd_decode(&spec, &cb, &frame, &sup).unwrap();
        assert_eq!(res.per_block_support.as_deref(), Some(&sup[..]));
        errors += usize::from(res.codeword_index != sent);
    }
    assert!(errors < 25, "{errors}/500 block errors");
}

#[test]
fn effective_noise_matches_sample_covariance() {
    let spec = spec(7, 4, 2, 3, 3.0);
    let rho = spec.snr_linear();
    let nd = 4;
    // a generic PSD error covariance and a correlated data covariance
    let a = CMat::from_fn(nd, nd, |i, j| {
        num_complex::Complex64::new(0.1 * (i + 2 * j) as f64, 0.05 * (i as f64 - j as f64))
    });
    let sigma = &a * a.adjoint() + CMat::identity(nd, nd) * c(0.05);
    let r_da = CMat::from_fn(nd, nd, |i, j| if i == j { c(0.5 + i as f64 * 0.4) } else { c(0.2) });
    let cov = effective_noise_cov(&spec, &sigma, &r_da).unwrap();
    let l_sigma = sigma.clone().cholesky().unwrap().unpack();
    let l_r = r_da.clone().cholesky().unwrap().unpack();
    let mut r = rng(81);
    let trials = 100_000;
    let mut sum = CMat::<f64>::zeros(nd, nd);
    let mut sum_sq = nalgebra::DMatrix::<f64>::zeros(nd, nd);
    for _ in 0..trials {
        let x = &l_r * complex_normal_vec(&mut r, nd, 1.0);
        let ht = &l_sigma * complex_normal_vec(&mut r, nd, 1.0);
        let v = complex_normal_vec(&mut r, nd, 1.0);
        let e = x.component_mul(&ht) * c(rho.sqrt()) + v;
        let outer = &e * e.adjoint();
        sum_sq += outer.map(|z| z.norm_sqr());
        sum += outer;
    }
    let t = trials as f64;
    for i in 0..nd {
        for j in 0..nd {
            let mean = sum[(i, j)] / c(t);
            let var = sum_sq[(i, j)] / t - mean.norm_sqr();
            let se = (var / t).sqrt();
            assert!(
                (mean - cov[(i, j)]).norm() < 3.0 * se * std::f64::consts::SQRT_2,
                "({i},{j}): {mean} vs {}",
                cov[(i, j)]
            );
        }
    }
    let diag_r = CMat::from_diagonal(&r_da.diagonal());
    let reduced = effective_noise_cov(&spec, &sigma, &diag_r).unwrap();
    let expected = CMat::from_diagonal(
        &sigma
            .diagonal()
            .component_mul(&r_da.diagonal())
            .map(|z| z * c(rho) + c(1.0)),
    );
    assert!((reduced - expected).norm() < 1e-12);
}

#[test]
fn decoders_are_deterministic_in_single_precision_too() {
    let spec = sparsepat::ChannelSpec32::builder(7, 4, 2)
        .pilot_count(3)
        .snr_db(20.0)
        .k_blocks(2)
        .build()
        .unwrap();
    let cb = sparsepat::build_codebook(&spec, 3, 1, 4).unwrap();
    let mut r = rng(91);
    let blocks: Vec<_> = (0..2).map(|_| draw_block(&spec, &mut r)).collect();
    let sup: Vec<usize> = blocks.iter().map(|b| b.support_index).collect();
    let frame = Frame::transmit(&spec, &blocks, cb.codeword(9)).unwrap();
    let a = wmd_decode(&spec, &cb, &frame, &sup).unwrap();
    assert_eq!(a, wmd_decode(&spec, &cb, &frame, &sup).unwrap());
    assert_eq!(a.codeword_index, 9);
    assert_eq!(ml_decode_sparse(&spec, &cb, &frame).unwrap().codeword_index, 9);
    let _ = build_codebook_with_cov(&spec, 1, 1, 1, CMat::<f32>::identity(4, 4)).unwrap();
}
