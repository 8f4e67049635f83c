use num_complex::Complex64;
use rand::Rng;
use sparsepat::linalg::log_sum_exp;
use sparsepat::{
    build_codebook_with_cov, ml_block_terms, mmse_pilot_estimate_at, support_posterior, transmit_receive, CVec,
    ChannelSpec64,
};

use super::{channel_rng, draw_blocks, grid_specs, lane, require, row, run_trials};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::rng::{derived_seed, trial_rng};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOraclePoint {
    pub snr_db: f64,
    /// Largest `|exp(quadrature − closed form) − 1|` over trials, hypotheses and codewords.
    pub max_relative_deviation: f64,
    /// Largest disagreement between closed-form and quadrature log-metric differences
    /// of consecutive codewords.
    pub max_pair_deviation: f64,
    /// Largest gap between the zero-data mixture weights and the support posterior.
    pub max_zero_data_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlOracleSummary {
    pub points: Vec<MlOraclePoint>,
}

/// Square grid of `points × points` nodes spanning `±span` prior standard deviations
/// per real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub points: usize,
    pub span: f64,
}

/// Trapezoidal 2-D quadrature of `ln ∫ p(y_d | x_d, h) CN(h; ĥ, v) dh` for a single tap.
pub fn quadrature_log_integral(
    spec: &ChannelSpec64,
    hypothesis: usize,
    (h_hat, var): (Complex64, f64),
    x: &CVec<f64>,
    y: &CVec<f64>,
    grid: QuadratureGrid,
) -> f64 {
    let QuadratureGrid { points: pts, span } = grid;
    let half = span * (var / 2.0).sqrt();
    let step = 2.0 * half / (pts - 1) as f64;
    let amp = (spec.snr_linear() * spec.n_block() as f64).sqrt();
    let g = x.component_mul(&spec.geometry(hypothesis).f_data.column(0)) * Complex64::new(amp, 0.0);
    let nd = y.len() as f64;
    let ln_pi = std::f64::consts::PI.ln();
    let edge = |a: usize| if a == 0 || a == pts - 1 { 0.5f64.ln() } else { 0.0 };
    let mut logs = Vec::with_capacity(pts * pts);
    for a in 0..pts {
        for b in 0..pts {
            let d = Complex64::new(-half + a as f64 * step, -half + b as f64 * step);
            let h = h_hat + d;
            let resid = y
                .iter()
                .zip(g.iter())
                .map(|(yk, gk)| (yk - gk * h).norm_sqr())
                .sum::<f64>();
            logs.push(edge(a) + edge(b) - nd * ln_pi - resid - ln_pi - var.ln() - d.norm_sqr() / var);
        }
    }
    log_sum_exp(&logs) + 2.0 * step.ln()
}

/// Closed-form per-hypothesis channel integral against quadrature on `S = 1` instances.
pub fn run_ml_vs_oracle(cfg: &ExperimentConfig) -> Result<(MlOracleSummary, Vec<ResultRow>)> {
    require(cfg, Experiment::MlVsOracle)?;
    let (base, specs) = grid_specs(cfg)?;
    if base.s_sparsity() != 1 {
        return Err(HarnessError::Config("ml-vs-oracle needs s_sparsity = 1".into()));
    }
    let base = base.with_k_blocks(1)?;
    let specs = specs
        .iter()
        .map(|s| s.with_k_blocks(1))
        .collect::<sparsepat::Result<Vec<_>>>()?;
    let data_cov = cfg.data_cov(base.data_len());
    let m = base.hypothesis_count();
    let zeros = CVec::zeros(base.data_len());
    let grid = QuadratureGrid {
        points: cfg.quadrature_points,
        span: cfg.quadrature_span,
    };

    let per_trial = run_trials(cfg, |t| {
        let cb = build_codebook_with_cov(
            &base,
            cfg.info_bits,
            cfg.crc_bits,
            derived_seed(cfg.seed, cfg.experiment, t),
            data_cov.clone(),
        )?;
        let sent = trial_rng(cfg.seed, cfg.experiment, lane::MESSAGE, t).random_range(0..cb.len());
        let mut rng = channel_rng(cfg, t);
        let block = draw_blocks(&base, &mut rng, 1, cfg.true_support, cfg.noise_free).remove(0);
        specs
            .iter()
            .map(|spec| {
                let (yp, yd) = transmit_receive(spec, &block, &cb.codeword(sent)[0])?;
                let mut rel = 0.0f64;
                let mut pair = 0.0f64;
                let mut zero_weights = Vec::with_capacity(m);
                let posterior = support_posterior(spec, &yp)?;
                for (i, &weight) in posterior.iter().enumerate() {
                    let est = mmse_pilot_estimate_at(spec, i, &yp)?;
                    let var = est.sigma_nz[(0, 0)].re;
                    let mut prev: Option<(f64, f64)> = None;
                    for cw in &cb.codewords {
                        let closed = ml_block_terms(spec, i, &est, &cw[0], &yd)?.log_marginal();
                        let quad = quadrature_log_integral(spec, i, (est.h_nz_hat[0], var), &cw[0], &yd, grid);
                        rel = rel.max(((quad - closed).exp() - 1.0).abs());
                        if let Some((pc, pq)) = prev {
                            pair = pair.max(((closed - pc) - (quad - pq)).abs());
                        }
                        prev = Some((closed, quad));
                    }
                    let lm0 = ml_block_terms(spec, i, &est, &zeros, &yd)?.log_marginal();
                    zero_weights.push(if weight > 0.0 {
                        weight.ln() + lm0
                    } else {
                        f64::NEG_INFINITY
                    });
                }
                let norm = log_sum_exp(&zero_weights);
                let zero_dev = zero_weights
                    .iter()
                    .zip(&posterior)
                    .map(|(w, p)| ((w - norm).exp() - p).abs())
                    .fold(0.0, f64::max);
                Ok([rel, pair, zero_dev])
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (g, &db) in cfg.snr_db.iter().enumerate() {
        let worst = |j: usize| per_trial.iter().map(|p| p[g][j]).fold(0.0, f64::max);
        let p = MlOraclePoint {
            snr_db: db,
            max_relative_deviation: worst(0),
            max_pair_deviation: worst(1),
            max_zero_data_deviation: worst(2),
        };
        rows.push(row(cfg, db, "max_relative_deviation", p.max_relative_deviation, 0.0));
        rows.push(row(cfg, db, "max_pair_deviation", p.max_pair_deviation, 0.0));
        rows.push(row(cfg, db, "max_zero_data_deviation", p.max_zero_data_deviation, 0.0));
        points.push(p);
    }
    Ok((MlOracleSummary { points }, rows))
}
