//! Experiment runners. Each `run_*` returns a typed summary together with the CSV rows.

mod dasd;
mod ml_oracle;
mod mse;
mod pase;
mod rate_prelog;
mod wmd;

pub use dasd::{run_dasd_e2e, DasdPoint, DasdSummary};
pub use ml_oracle::{quadrature_log_integral, run_ml_vs_oracle, MlOraclePoint, MlOracleSummary, QuadratureGrid};
pub use mse::{run_mse_sweep, MsePoint, MseSweepSummary};
pub use pase::{run_pase_error, run_pase_fixed, PaseFixedPoint, PasePoint};
pub use rate_prelog::{run_rate_prelog, RatePoint, RatePrelogSummary};
pub use wmd::{run_wmd_genie, WmdPoint};

use rand::Rng;
use rayon::prelude::*;
use sparsepat::{draw_block, BlockRealization64, CVec, ChannelSpec64};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::rng::trial_rng;
use crate::{HarnessError, Result};

/// Validates `cfg` and runs the experiment it names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(match cfg.experiment {
        Experiment::MseSweep => run_mse_sweep(cfg)?.1,
        Experiment::PaseError => run_pase_error(cfg)?.1,
        Experiment::PaseFixedSupport => run_pase_fixed(cfg)?.1,
        Experiment::WmdGenie => run_wmd_genie(cfg)?.1,
        Experiment::DasdE2e => run_dasd_e2e(cfg)?.1,
        Experiment::MlVsOracle => run_ml_vs_oracle(cfg)?.1,
        Experiment::RatePrelog => run_rate_prelog(cfg)?.1,
    })
}

/// The validated base spec and one copy per grid SNR.
pub(crate) fn grid_specs(cfg: &ExperimentConfig) -> Result<(ChannelSpec64, Vec<ChannelSpec64>)> {
    let base = cfg.validate()?;
    let specs = cfg
        .snr_db
        .iter()
        .map(|&db| base.with_snr_db(db))
        .collect::<sparsepat::Result<Vec<_>>>()?;
    Ok((base, specs))
}

/// Runs `trial` for indices `0..cfg.trials` on a pool of `cfg.workers` threads and
/// returns the results in trial order.
pub(crate) fn run_trials<R, F>(cfg: &ExperimentConfig, trial: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..cfg.trials as u64).into_par_iter().map(&trial).collect())
}

/// Stream lanes used inside one trial.
pub(crate) mod lane {
    pub const CHANNEL: u8 = 0;
    pub const MESSAGE: u8 = 1;
}

/// One block realization per requested block. `support` forces the support index;
/// otherwise it is drawn from the prior.
pub(crate) fn draw_blocks<R: Rng>(
    spec: &ChannelSpec64,
    rng: &mut R,
    k: usize,
    support: Option<usize>,
    noise_free: bool,
) -> Vec<BlockRealization64> {
    (0..k)
        .map(|_| {
            let mut b = draw_block(spec, rng);
            if let Some(s) = support {
                b.support_index = s;
            }
            if noise_free {
                b.noise_freq = CVec::zeros(spec.n_block());
            }
            b
        })
        .collect()
}

pub(crate) fn channel_rng(cfg: &ExperimentConfig, trial: u64) -> rand_chacha::ChaCha8Rng {
    trial_rng(cfg.seed, cfg.experiment, lane::CHANNEL, trial)
}

pub(crate) fn row(
    cfg: &ExperimentConfig,
    snr_db: f64,
    metric: impl Into<String>,
    value: f64,
    stderr: f64,
) -> ResultRow {
    ResultRow::new(cfg.experiment, snr_db, metric, value, stderr, cfg.trials, cfg.seed)
}

pub(crate) fn require(cfg: &ExperimentConfig, want: Experiment) -> Result<()> {
    if cfg.experiment == want {
        Ok(())
    } else {
        Err(HarnessError::Config(format!(
            "config names `{}` but `{want}` was requested",
            cfg.experiment
        )))
    }
}
