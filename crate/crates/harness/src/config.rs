//! Experiment configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored. Lists
//! are comma separated. Unknown keys are rejected.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `experiment` | one of the [`Experiment`] names | `mse-sweep` |
//! | `n_block`, `l_taps`, `s_sparsity` | N, L, S | 7, 4, 2 |
//! | `pilot_count` | P, pilots on `0..P` | S |
//! | `pilot_indices` | explicit pilot positions (overrides `pilot_count`) | |
//! | `support_prior` | `uniform` or M weights | `uniform` |
//! | `k_blocks` | fading blocks per codeword | 1 |
//! | `snr_db` | SNR grid in dB, strictly ascending | `0,10,20,30,40,50,60` |
//! | `trials` | Monte Carlo trials per grid point | 1000 |
//! | `seed` | run seed | 1 |
//! | `out` | CSV path (stdout when absent) | |
//! | `workers` | worker threads, 0 = all cores | 0 |
//! | `info_bits`, `crc_bits` | codebook size `2^(info+crc)` | 2, 8 |
//! | `true_support` | fixed true support index, or `random` | `random` |
//! | `slope_window_db` | `lo,hi` window for slope fits | `30,50` |
//! | `k_values` | block counts for `pase-fixed-support` | `1,4,16` |
//! | `quadrature_points`, `quadrature_span` | grid size and half-width in posterior SDs | 201, 6 |
//! | `data_cov_diag` | diagonal of R_da (identity when absent) | |
//! | `noise_free` | zero the channel noise | false |
//! | `perfect_csi` | hand the true channel to the rate evaluation | false |
//! | `pase_ordering` | order DASD hypotheses by PASE residual | false |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sparsepat::{CMat, ChannelSpec64};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    MseSweep,
    PaseError,
    PaseFixedSupport,
    WmdGenie,
    DasdE2e,
    MlVsOracle,
    RatePrelog,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::MseSweep,
        Experiment::PaseError,
        Experiment::PaseFixedSupport,
        Experiment::WmdGenie,
        Experiment::DasdE2e,
        Experiment::MlVsOracle,
        Experiment::RatePrelog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MseSweep => "mse-sweep",
            Experiment::PaseError => "pase-error",
            Experiment::PaseFixedSupport => "pase-fixed-support",
            Experiment::WmdGenie => "wmd-genie",
            Experiment::DasdE2e => "dasd-e2e",
            Experiment::MlVsOracle => "ml-vs-oracle",
            Experiment::RatePrelog => "rate-prelog",
        }
    }

    /// Stable identifier used to select random streams.
    pub fn stream_key(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            HarnessError::Config(format!(
                "unknown experiment `{s}` (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_block: usize,
    pub l_taps: usize,
    pub s_sparsity: usize,
    pub pilot_count: Option<usize>,
    pub pilot_indices: Option<Vec<usize>>,
    pub support_prior: Option<Vec<f64>>,
    pub k_blocks: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub info_bits: u32,
    pub crc_bits: u32,
    pub true_support: Option<usize>,
    pub slope_window_db: (f64, f64),
    pub k_values: Vec<usize>,
    pub quadrature_points: usize,
    pub quadrature_span: f64,
    pub data_cov_diag: Option<Vec<f64>>,
    pub noise_free: bool,
    pub perfect_csi: bool,
    pub pase_ordering: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::MseSweep,
            n_block: 7,
            l_taps: 4,
            s_sparsity: 2,
            pilot_count: None,
            pilot_indices: None,
            support_prior: None,
            k_blocks: 1,
            snr_db: (0..=6).map(|i| 10.0 * i as f64).collect(),
            trials: 1000,
            seed: 1,
            out: None,
            workers: 0,
            info_bits: 2,
            crc_bits: 8,
            true_support: None,
            slope_window_db: (30.0, 50.0),
            k_values: vec![1, 4, 16],
            quadrature_points: 201,
            quadrature_span: 6.0,
            data_cov_diag: None,
            noise_free: false,
            perfect_csi: false,
            pase_ordering: false,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(format!("`{key}`: cannot parse `{v}`")))
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, HarnessError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, HarnessError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(cfg_err(format!("`{key}`: expected true/false, got `{other}`"))),
    }
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                HarnessError::Config(m) => cfg_err(format!("line {}: {m}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), HarnessError> {
        match key {
            "experiment" => self.experiment = v.parse()?,
            "n_block" => self.n_block = parse_one(key, v)?,
            "l_taps" => self.l_taps = parse_one(key, v)?,
            "s_sparsity" => self.s_sparsity = parse_one(key, v)?,
            "pilot_count" => self.pilot_count = Some(parse_one(key, v)?),
            "pilot_indices" => self.pilot_indices = Some(parse_list(key, v)?),
            "support_prior" => {
                self.support_prior = if v == "uniform" {
                    None
                } else {
                    Some(parse_list(key, v)?)
                };
            }
            "k_blocks" => self.k_blocks = parse_one(key, v)?,
            "snr_db" => self.snr_db = parse_list(key, v)?,
            "trials" => self.trials = parse_one(key, v)?,
            "seed" => self.seed = parse_one(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "workers" => self.workers = parse_one(key, v)?,
            "info_bits" => self.info_bits = parse_one(key, v)?,
            "crc_bits" => self.crc_bits = parse_one(key, v)?,
            "true_support" => self.true_support = if v == "random" { None } else { Some(parse_one(key, v)?) },
            "slope_window_db" => {
                let w: Vec<f64> = parse_list(key, v)?;
                if w.len() != 2 {
                    return Err(cfg_err("`slope_window_db` needs two values"));
                }
                self.slope_window_db = (w[0], w[1]);
            }
            "k_values" => self.k_values = parse_list(key, v)?,
            "quadrature_points" => self.quadrature_points = parse_one(key, v)?,
            "quadrature_span" => self.quadrature_span = parse_one(key, v)?,
            "data_cov_diag" => self.data_cov_diag = Some(parse_list(key, v)?),
            "noise_free" => self.noise_free = parse_bool(key, v)?,
            "perfect_csi" => self.perfect_csi = parse_bool(key, v)?,
            "pase_ordering" => self.pase_ordering = parse_bool(key, v)?,
            other => return Err(cfg_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Checks the run parameters and builds the channel spec (at the first grid SNR).
    pub fn validate(&self) -> Result<ChannelSpec64, HarnessError> {
        if self.snr_db.is_empty() {
            return Err(cfg_err("SNR grid is empty"));
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) || self.snr_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("SNR grid must be finite and strictly ascending"));
        }
        if self.trials == 0 {
            return Err(cfg_err("need at least one trial"));
        }
        if self.slope_window_db.0 >= self.slope_window_db.1 {
            return Err(cfg_err("slope window must have lo < hi"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(cfg_err("`k_values` must be nonempty positive integers"));
        }
        if self.quadrature_points < 3 || self.quadrature_span <= 0.0 {
            return Err(cfg_err("quadrature needs ≥ 3 points and a positive span"));
        }
        let mut b = ChannelSpec64::builder(self.n_block, self.l_taps, self.s_sparsity)
            .snr_db(self.snr_db[0])
            .k_blocks(self.k_blocks);
        b = match (&self.pilot_indices, self.pilot_count) {
            (Some(idx), _) => b.pilot_indices(idx.clone()),
            (None, Some(p)) => b.pilot_count(p),
            (None, None) => b,
        };
        if let Some(prior) = &self.support_prior {
            b = b.support_prior(prior.clone());
        }
        let spec = b.build()?;
        if let Some(t) = self.true_support {
            if t >= spec.hypothesis_count() {
                return Err(cfg_err(format!(
                    "true_support {t} out of range (M={})",
                    spec.hypothesis_count()
                )));
            }
        }
        if let Some(d) = &self.data_cov_diag {
            if d.len() != spec.data_len() || d.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(cfg_err(format!(
                    "`data_cov_diag` needs {} positive entries",
                    spec.data_len()
                )));
            }
        }
        Ok(spec)
    }

    /// `R_da` as a matrix.
    pub fn data_cov(&self, data_len: usize) -> CMat<f64> {
        match &self.data_cov_diag {
            Some(d) => CMat::from_diagonal(&sparsepat::CVec::from_iterator(
                d.len(),
                d.iter().map(|&x| num_complex::Complex64::new(x, 0.0)),
            )),
            None => CMat::identity(data_len, data_len),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let text = "
            # desk-scale DASD run
            experiment = dasd-e2e
            n_block = 11
            l_taps = 5
            s_sparsity = 2   # sparse
            pilot_indices = 0,3,7
            support_prior = uniform
            k_blocks = 2
            snr_db = 10, 20
            trials = 50
            seed = 9
            out = /tmp/x.csv
            workers = 3
            info_bits = 3
            crc_bits = 4
            true_support = 2
            slope_window_db = 10,20
            k_values = 1,2
            quadrature_points = 51
            quadrature_span = 5
            data_cov_diag = 1,1,1,1,1,1,1,1
            noise_free = true
            perfect_csi = no
            pase_ordering = yes
        ";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.experiment, Experiment::DasdE2e);
        assert_eq!((c.n_block, c.l_taps, c.s_sparsity, c.k_blocks), (11, 5, 2, 2));
        assert_eq!(c.pilot_indices, Some(vec![0, 3, 7]));
        assert_eq!(c.snr_db, vec![10.0, 20.0]);
        assert_eq!((c.trials, c.seed, c.workers), (50, 9, 3));
        assert_eq!(c.true_support, Some(2));
        assert!(c.noise_free && !c.perfect_csi && c.pase_ordering);
        let spec = c.validate().unwrap();
        assert_eq!(spec.pilot_count(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("nonsense").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("experiment = nope").is_err());
        assert!(ExperimentConfig::parse("trials = -3").is_err());
        let c = ExperimentConfig::parse("snr_db = 10,0").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("n_block = 8\nl_taps = 3\npilot_indices = 0,2,4,6").unwrap();
        assert!(matches!(
            c.validate(),
            Err(HarnessError::Spec(sparsepat::Error::PilotPattern(_)))
        ));
    }
}
