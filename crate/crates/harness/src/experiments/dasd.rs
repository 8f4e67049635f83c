use rand::Rng;
use sparsepat::{build_codebook_with_cov, dasd_decode_with, label_event, pase_detect, DasdEvent, DasdOptions, Frame};

use super::{channel_rng, draw_blocks, grid_specs, lane, require, row, run_trials};
use crate::config::{Experiment, ExperimentConfig};
use crate::output::ResultRow;
use crate::rng::{derived_seed, trial_rng};
use crate::stats::{mean_se, wilson, MeanSe, Proportion, Z95};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct DasdPoint {
    pub snr_db: f64,
    pub trials: usize,
    pub errors: usize,
    pub e1: usize,
    pub e2: usize,
    pub e3: usize,
    pub message_error: Proportion,
    pub e3_rate: Proportion,
    /// `(M^K − 1) · 2^−m_δ`.
    pub e3_bound: f64,
    /// `2^−m_δ` times the number of wrong hypothesis vectors visited before the true one,
    /// averaged over trials.
    pub e3_union_bound: MeanSe,
    /// Check-bit pass rate at the first visited wrong support vector that decoded a
    /// wrong message; `None` when no trial produced such a step.
    pub missed_detection: Option<Proportion>,
    pub expected_collision: f64,
}

impl DasdPoint {
    /// `errors − (E1 + E2 + E3)`; zero when the labels partition the errors.
    pub fn partition_gap(&self) -> i64 {
        self.errors as i64 - (self.e1 + self.e2 + self.e3) as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DasdSummary {
    pub points: Vec<DasdPoint>,
}

struct TrialOutcome {
    event: DasdEvent,
    wrong_before_truth: usize,
    first_wrong_crc: Option<bool>,
}

/// End-to-end DASD with a fresh codebook and binning per trial.
pub fn run_dasd_e2e(cfg: &ExperimentConfig) -> Result<(DasdSummary, Vec<ResultRow>)> {
    require(cfg, Experiment::DasdE2e)?;
    let (base, specs) = grid_specs(cfg)?;
    let data_cov = cfg.data_cov(base.data_len());
    let k = base.k_blocks();
    let m = base.hypothesis_count();
    let options = DasdOptions {
        pase_ordering: cfg.pase_ordering,
    };
    let outcomes = run_trials(cfg, |t| {
        let cb = build_codebook_with_cov(
            &base,
            cfg.info_bits,
            cfg.crc_bits,
            derived_seed(cfg.seed, cfg.experiment, t),
            data_cov.clone(),
        )?;
        let w = trial_rng(cfg.seed, cfg.experiment, lane::MESSAGE, t).random_range(0..1u64 << cfg.info_bits);
        let sent = cb.encode(w)?;
        let mut rng = channel_rng(cfg, t);
        let blocks = draw_blocks(&base, &mut rng, k, cfg.true_support, cfg.noise_free);
        let truth: Vec<usize> = blocks.iter().map(|b| b.support_index).collect();
        specs
            .iter()
            .map(|spec| {
                let frame = Frame::transmit(spec, &blocks, cb.codeword(sent))?;
                let out = dasd_decode_with(spec, &cb, &frame, options)?;
                let first_wrong_crc = out
                    .visited
                    .iter()
                    .find(|s| s.hypotheses != truth && s.info != w)
                    .map(|s| s.crc_ok);
                let mut wrong_before_truth = 0;
                for (b, &ti) in truth.iter().enumerate() {
                    let rank = if options.pase_ordering {
                        let res = pase_detect(spec, &frame.y_pilot[b])?.residuals;
                        let mut order: Vec<usize> = (0..m).collect();
                        order.sort_by(|&x, &y| res[x].partial_cmp(&res[y]).unwrap_or(std::cmp::Ordering::Equal));
                        order
                            .iter()
                            .position(|&i| i == ti)
                            .expect("true hypothesis is in the order")
                    } else {
                        ti
                    };
                    wrong_before_truth = wrong_before_truth * m + rank;
                }
                Ok(TrialOutcome {
                    event: label_event(&out, &truth, w),
                    wrong_before_truth,
                    first_wrong_crc,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let collision = (-(cfg.crc_bits as f64)).exp2();
    let e3_bound = ((m as f64).powi(k as i32) - 1.0) * collision;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (g, &db) in cfg.snr_db.iter().enumerate() {
        let col: Vec<&TrialOutcome> = outcomes.iter().map(|o| &o[g]).collect();
        let count = |e: DasdEvent| col.iter().filter(|o| o.event == e).count();
        let (e1, e2, e3) = (count(DasdEvent::E1), count(DasdEvent::E2), count(DasdEvent::E3));
        let errors = cfg.trials - count(DasdEvent::Correct);
        let message_error = wilson(errors, cfg.trials, Z95);
        let e3_rate = wilson(e3, cfg.trials, Z95);
        let e3_union_bound = {
            let xs: Vec<f64> = col.iter().map(|o| o.wrong_before_truth as f64 * collision).collect();
            mean_se(&xs)
        };
        let probes: Vec<bool> = col.iter().filter_map(|o| o.first_wrong_crc).collect();
        let missed_detection =
            (!probes.is_empty()).then(|| wilson(probes.iter().filter(|&&p| p).count(), probes.len(), Z95));
        let p = DasdPoint {
            snr_db: db,
            trials: cfg.trials,
            errors,
            e1,
            e2,
            e3,
            message_error,
            e3_rate,
            e3_bound,
            e3_union_bound,
            missed_detection,
            expected_collision: collision,
        };
        rows.push(row(
            cfg,
            db,
            "message_error_rate",
            message_error.rate,
            message_error.stderr,
        ));
        rows.push(row(
            cfg,
            db,
            "e1_rate",
            e1 as f64 / cfg.trials as f64,
            wilson(e1, cfg.trials, Z95).stderr,
        ));
        rows.push(row(
            cfg,
            db,
            "e2_rate",
            e2 as f64 / cfg.trials as f64,
            wilson(e2, cfg.trials, Z95).stderr,
        ));
        rows.push(row(cfg, db, "e3_rate", e3_rate.rate, e3_rate.stderr));
        rows.push(row(cfg, db, "e3_bound", e3_bound, 0.0));
        rows.push(row(
            cfg,
            db,
            "e3_union_bound",
            e3_union_bound.mean,
            e3_union_bound.stderr,
        ));
        rows.push(row(cfg, db, "partition_gap", p.partition_gap() as f64, 0.0));
        if let Some(md) = missed_detection {
            rows.push(row(cfg, db, "missed_detection_rate", md.rate, md.stderr));
            rows.push(row(cfg, db, "missed_detection_probes", md.trials as f64, 0.0));
        }
        rows.push(row(cfg, db, "expected_collision_rate", collision, 0.0));
        points.push(p);
    }
    Ok((DasdSummary { points }, rows))
}
