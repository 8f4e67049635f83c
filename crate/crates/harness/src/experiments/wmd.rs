use rand::Rng;
use sparsepat::{build_codebook_with_cov, wmd_decode, Frame};

use super::{channel_rng, draw_blocks, grid_specs, lane, require, row, run_trials};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::rng::{derived_seed, trial_rng};
use crate::stats::{wilson, Proportion, Z95};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct WmdPoint {
    pub snr_db: f64,
    pub codeword_error: Proportion,
}

/// Codeword error rate of WMD decoding given the true per-block supports.
pub fn run_wmd_genie(cfg: &ExperimentConfig) -> Result<(Vec<WmdPoint>, Vec<ResultRow>)> {
    require(cfg, Experiment::WmdGenie)?;
    let (base, specs) = grid_specs(cfg)?;
    let data_cov = cfg.data_cov(base.data_len());
    let wrong = run_trials(cfg, |t| {
        let cb = build_codebook_with_cov(
            &base,
            cfg.info_bits,
            cfg.crc_bits,
            derived_seed(cfg.seed, cfg.experiment, t),
            data_cov.clone(),
        )?;
        let sent = trial_rng(cfg.seed, cfg.experiment, lane::MESSAGE, t).random_range(0..cb.len());
        let mut rng = channel_rng(cfg, t);
        let blocks = draw_blocks(&base, &mut rng, base.k_blocks(), cfg.true_support, cfg.noise_free);
        let truth: Vec<usize> = blocks.iter().map(|b| b.support_index).collect();
        specs
            .iter()
            .map(|spec| {
                let frame = Frame::transmit(spec, &blocks, cb.codeword(sent))?;
                Ok(wmd_decode(spec, &cb, &frame, &truth)?.codeword_index != sent)
            })
            .collect::<Result<Vec<bool>>>()
    })?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (g, &db) in cfg.snr_db.iter().enumerate() {
        let e = wilson(wrong.iter().filter(|w| w[g]).count(), cfg.trials, Z95);
        rows.push(row(cfg, db, "codeword_error_rate", e.rate, e.stderr));
        rows.push(row(cfg, db, "ci_low", e.ci_low, 0.0));
        rows.push(row(cfg, db, "ci_high", e.ci_high, 0.0));
        points.push(WmdPoint {
            snr_db: db,
            codeword_error: e,
        });
    }
    Ok((points, rows))
}
