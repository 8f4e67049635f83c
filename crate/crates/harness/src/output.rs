//! Result rows and the CSV writer.

use std::io::{self, Write};

use crate::config::Experiment;

pub const CSV_HEADER: &str = "experiment,snr_db,metric,value,stderr,trials,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub snr_db: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ResultRow {
    pub fn new(
        experiment: Experiment,
        snr_db: f64,
        metric: impl Into<String>,
        value: f64,
        stderr: f64,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            experiment,
            snr_db,
            metric: metric.into(),
            value,
            stderr,
            trials,
            seed,
        }
    }
}

/// Writes the header and one LF-terminated line per row. Floats use Rust's
/// shortest round-trip decimal form.
pub fn write_csv<W: Write>(mut w: W, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.experiment, r.snr_db, r.metric, r.value, r.stderr, r.trials, r.seed
        )?;
    }
    w.flush()
}

pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_rows() {
        let rows = [ResultRow::new(
            Experiment::PaseError,
            20.0,
            "error_rate",
            0.125,
            0.01,
            800,
            7,
        )];
        assert_eq!(
            to_csv_string(&rows),
            format!("{CSV_HEADER}\npase-error,20,error_rate,0.125,0.01,800,7\n")
        );
    }
}
