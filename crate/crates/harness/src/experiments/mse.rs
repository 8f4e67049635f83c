use sparsepat::{closed_form_mse, mmse_pilot_estimate_at, transmit_receive, CVec};

use super::{channel_rng, draw_blocks, grid_specs, require, row, run_trials};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::stats::{mean_se, ols, LinearFit, MeanSe};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MsePoint {
    pub snr_db: f64,
    pub hypothesis: usize,
    pub monte_carlo: MeanSe,
    pub closed_form: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseSweepSummary {
    pub true_support: usize,
    pub points: Vec<MsePoint>,
    /// Fit of `ln MSE` against `ln ρ` for the correct hypothesis over the slope window.
    pub correct_slope: Option<LinearFit>,
}

impl MseSweepSummary {
    pub fn point(&self, snr_db: f64, hypothesis: usize) -> Option<&MsePoint> {
        self.points
            .iter()
            .find(|p| p.snr_db == snr_db && p.hypothesis == hypothesis)
    }
}

/// Monte Carlo squared error of the pilot MMSE estimate under every hypothesis,
/// against the closed form, with the true support held fixed (`true_support`, default 0).
pub fn run_mse_sweep(cfg: &ExperimentConfig) -> Result<(MseSweepSummary, Vec<ResultRow>)> {
    require(cfg, Experiment::MseSweep)?;
    let (base, specs) = grid_specs(cfg)?;
    let truth = cfg.true_support.unwrap_or(0);
    let m = base.hypothesis_count();
    let zeros = CVec::zeros(base.data_len());

    // errs[trial][grid][hyp]
    let errs = run_trials(cfg, |t| {
        let mut rng = channel_rng(cfg, t);
        let block = draw_blocks(&base, &mut rng, 1, Some(truth), cfg.noise_free).remove(0);
        specs
            .iter()
            .map(|spec| {
                let (yp, _) = transmit_receive(spec, &block, &zeros)?;
                (0..m)
                    .map(|i| Ok((&block.taps_nz - mmse_pilot_estimate_at(spec, i, &yp)?.h_nz_hat).norm_squared()))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (g, spec) in specs.iter().enumerate() {
        let db = cfg.snr_db[g];
        for i in 0..m {
            let samples: Vec<f64> = errs.iter().map(|e| e[g][i]).collect();
            let mc = mean_se(&samples);
            let curve = closed_form_mse(spec, spec.support(i), spec.support(truth))?;
            let cf = curve.mse(spec.snr_linear());
            let floor = curve.floor();
            rows.push(row(cfg, db, format!("mse_mc_h{i}"), mc.mean, mc.stderr));
            rows.push(row(cfg, db, format!("mse_closed_h{i}"), cf, 0.0));
            rows.push(row(cfg, db, format!("mse_ratio_h{i}"), mc.mean / cf, mc.stderr / cf));
            rows.push(row(cfg, db, format!("mse_floor_h{i}"), floor, 0.0));
            points.push(MsePoint {
                snr_db: db,
                hypothesis: i,
                monte_carlo: mc,
                closed_form: cf,
                floor,
            });
        }
    }

    let (lo, hi) = cfg.slope_window_db;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.hypothesis == truth && p.snr_db >= lo && p.snr_db <= hi)
        .map(|p| (p.snr_db / 10.0 * std::f64::consts::LN_10, p.monte_carlo.mean.ln()))
        .unzip();
    let correct_slope = ols(&xs, &ys);
    if let Some(fit) = correct_slope {
        rows.push(row(cfg, hi, "mse_slope_correct", fit.slope, fit.slope_stderr));
    }
    Ok((
        MseSweepSummary {
            true_support: truth,
            points,
            correct_slope,
        },
        rows,
    ))
}
