use sparsepat::{mmse_pilot_estimate_at, transmit_receive, CMat, CVec};

use super::{channel_rng, draw_blocks, grid_specs, require, row, run_trials};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::rate::{coherent_rate, frequency_domain_estimate, rate_per_draw};
use crate::stats::{mean_se, ols, MeanSe};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub snr_db: f64,
    pub rate: MeanSe,
    /// Finite-difference slope per `log₂ρ` from the previous grid point.
    pub slope_from_previous: Option<MeanSe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePrelogSummary {
    pub points: Vec<RatePoint>,
    /// Per-trial least-squares slope over the slope window, averaged over trials.
    pub window_slope: MeanSe,
    /// `(N−P)/N`.
    pub expected_prelog: f64,
    /// Largest per-draw gap between the rate with injected perfect CSI and the
    /// coherent rate.
    pub perfect_csi_max_deviation: f64,
}

struct Draw {
    rate: f64,
    csi_gap: f64,
}

/// Achievable rate under the support genie and its high-SNR slope.
pub fn run_rate_prelog(cfg: &ExperimentConfig) -> Result<(RatePrelogSummary, Vec<ResultRow>)> {
    require(cfg, Experiment::RatePrelog)?;
    let (base, specs) = grid_specs(cfg)?;
    let data_cov = cfg.data_cov(base.data_len());
    let zeros = CVec::zeros(base.data_len());
    let nd = base.data_len();
    let draws = run_trials(cfg, |t| {
        let mut rng = channel_rng(cfg, t);
        let block = draw_blocks(&base, &mut rng, 1, cfg.true_support, cfg.noise_free).remove(0);
        let i = block.support_index;
        specs
            .iter()
            .map(|spec| {
                let h_true = block.frequency_response(spec);
                let h_true_d = CVec::from_iterator(nd, spec.data_indices().iter().map(|&k| h_true[k]));
                let genie = rate_per_draw(spec, &h_true_d, &CMat::zeros(nd, nd), &data_cov)?;
                let csi_gap = (genie - coherent_rate(spec, &h_true_d, &data_cov)).abs();
                let rate = if cfg.perfect_csi {
                    genie
                } else {
                    let (yp, _) = transmit_receive(spec, &block, &zeros)?;
                    let est = mmse_pilot_estimate_at(spec, i, &yp)?;
                    let (h, sigma) = frequency_domain_estimate(spec, i, &est);
                    rate_per_draw(spec, &h, &sigma, &data_cov)?
                };
                Ok(Draw { rate, csi_gap })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let log2_rho: Vec<f64> = specs.iter().map(|s| s.snr_linear().log2()).collect();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (g, &db) in cfg.snr_db.iter().enumerate() {
        let rate = mean_se(&draws.iter().map(|d| d[g].rate).collect::<Vec<_>>());
        rows.push(row(cfg, db, "rate_bits", rate.mean, rate.stderr));
        let slope_from_previous = (g > 0).then(|| {
            let dx = log2_rho[g] - log2_rho[g - 1];
            mean_se(
                &draws
                    .iter()
                    .map(|d| (d[g].rate - d[g - 1].rate) / dx)
                    .collect::<Vec<_>>(),
            )
        });
        if let Some(s) = slope_from_previous {
            rows.push(row(cfg, db, "slope_per_log2_rho", s.mean, s.stderr));
        }
        points.push(RatePoint {
            snr_db: db,
            rate,
            slope_from_previous,
        });
    }

    let (lo, hi) = cfg.slope_window_db;
    let window: Vec<usize> = (0..specs.len())
        .filter(|&g| cfg.snr_db[g] >= lo && cfg.snr_db[g] <= hi)
        .collect();
    let xs: Vec<f64> = window.iter().map(|&g| log2_rho[g]).collect();
    let per_trial = draws
        .iter()
        .map(|d| {
            let ys: Vec<f64> = window.iter().map(|&g| d[g].rate).collect();
            ols(&xs, &ys).map(|f| f.slope)
        })
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| HarnessError::Config("slope window must contain at least two grid points".into()))?;
    let window_slope = mean_se(&per_trial);
    let expected_prelog = nd as f64 / base.n_block() as f64;
    let perfect_csi_max_deviation = draws.iter().flatten().map(|d| d.csi_gap).fold(0.0, f64::max);
    rows.push(row(cfg, hi, "prelog_slope", window_slope.mean, window_slope.stderr));
    rows.push(row(cfg, hi, "prelog_expected", expected_prelog, 0.0));
    rows.push(row(cfg, hi, "perfect_csi_max_abs_dev", perfect_csi_max_deviation, 0.0));
    Ok((
        RatePrelogSummary {
            points,
            window_slope,
            expected_prelog,
            perfect_csi_max_deviation,
        },
        rows,
    ))
}
