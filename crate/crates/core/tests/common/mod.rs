#![allow(dead_code)]

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsepat::{CMat, CVec, ChannelSpec64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Entry (r, c) of the unitary DFT matrix, computed directly in floating point.
pub fn dft_entry(n: usize, r: usize, col: usize) -> Complex64 {
    let phase = -2.0 * std::f64::consts::PI * (r * col) as f64 / n as f64;
    Complex64::from_polar(1.0 / (n as f64).sqrt(), phase)
}

pub fn dense_dft(n: usize, rows: &[usize], cols: &[usize]) -> CMat<f64> {
    CMat::from_fn(rows.len(), cols.len(), |a, b| dft_entry(n, rows[a], cols[b]))
}

pub fn diag(v: &CVec<f64>) -> CMat<f64> {
    CMat::from_diagonal(v)
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn spec(n: usize, l: usize, s: usize, p: usize, snr_db: f64) -> ChannelSpec64 {
    ChannelSpec64::builder(n, l, s)
        .pilot_count(p)
        .snr_db(snr_db)
        .build()
        .unwrap()
}
