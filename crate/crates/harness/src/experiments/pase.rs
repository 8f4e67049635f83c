use sparsepat::{pase_detect, pase_detect_fixed_support, transmit_receive, CVec};

use super::{channel_rng, draw_blocks, grid_specs, require, row, run_trials};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::stats::{wilson, Proportion, Z95};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PasePoint {
    pub snr_db: f64,
    pub error: Proportion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaseFixedPoint {
    pub snr_db: f64,
    pub k_blocks: usize,
    pub error: Proportion,
}

fn proportion_rows(cfg: &ExperimentConfig, db: f64, prefix: &str, p: &Proportion) -> [ResultRow; 3] {
    [
        row(cfg, db, format!("{prefix}error_rate"), p.rate, p.stderr),
        row(cfg, db, format!("{prefix}ci_low"), p.ci_low, 0.0),
        row(cfg, db, format!("{prefix}ci_high"), p.ci_high, 0.0),
    ]
}

/// Single-block PASE detection error rate at each grid SNR.
pub fn run_pase_error(cfg: &ExperimentConfig) -> Result<(Vec<PasePoint>, Vec<ResultRow>)> {
    require(cfg, Experiment::PaseError)?;
    let (base, specs) = grid_specs(cfg)?;
    let zeros = CVec::zeros(base.data_len());
    let wrong = run_trials(cfg, |t| {
        let mut rng = channel_rng(cfg, t);
        let block = draw_blocks(&base, &mut rng, 1, cfg.true_support, cfg.noise_free).remove(0);
        specs
            .iter()
            .map(|spec| {
                let (yp, _) = transmit_receive(spec, &block, &zeros)?;
                Ok(pase_detect(spec, &yp)?.chosen_index != block.support_index)
            })
            .collect::<Result<Vec<bool>>>()
    })?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (g, &db) in cfg.snr_db.iter().enumerate() {
        let errors = wrong.iter().filter(|w| w[g]).count();
        let error = wilson(errors, cfg.trials, Z95);
        rows.extend(proportion_rows(cfg, db, "", &error));
        points.push(PasePoint { snr_db: db, error });
    }
    Ok((points, rows))
}

/// PASE over `K` blocks sharing one support, for every `K` in `k_values`.
pub fn run_pase_fixed(cfg: &ExperimentConfig) -> Result<(Vec<PaseFixedPoint>, Vec<ResultRow>)> {
    require(cfg, Experiment::PaseFixedSupport)?;
    let (base, specs) = grid_specs(cfg)?;
    let zeros = CVec::zeros(base.data_len());
    // wrong[trial][k_value][grid]
    let wrong = run_trials(cfg, |t| {
        let mut rng = channel_rng(cfg, t);
        cfg.k_values
            .iter()
            .map(|&k| {
                let first = draw_blocks(&base, &mut rng, 1, cfg.true_support, cfg.noise_free).remove(0);
                let truth = first.support_index;
                let mut blocks = vec![first];
                blocks.extend(draw_blocks(&base, &mut rng, k - 1, Some(truth), cfg.noise_free));
                specs
                    .iter()
                    .map(|spec| {
                        let ys = blocks
                            .iter()
                            .map(|b| Ok(transmit_receive(spec, b, &zeros)?.0))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(pase_detect_fixed_support(spec, &ys)?.chosen_index != truth)
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (g, &db) in cfg.snr_db.iter().enumerate() {
        for (j, &k) in cfg.k_values.iter().enumerate() {
            let errors = wrong.iter().filter(|w| w[j][g]).count();
            let error = wilson(errors, cfg.trials, Z95);
            rows.extend(proportion_rows(cfg, db, &format!("k{k}_"), &error));
            points.push(PaseFixedPoint {
                snr_db: db,
                k_blocks: k,
                error,
            });
        }
    }
    Ok((points, rows))
}
