//! Sparse frequency-selective block-fading channels with pilot-aided transmission:
//! channel model, support-conditional MMSE estimation, joint and decoupled decoders,
//! support detectors, and Gaussian codebooks with random-binning checks.
//!
//! Everything numerical is generic over a real [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the precision.

pub mod codec;
pub mod decode;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod support;

pub use codec::{bits_to_u64, build_codebook, build_codebook_with_cov, crc_bin, u64_to_bits, Binning, Codebook};
pub use decode::{
    effective_noise_cov, ml_block_terms, ml_decode_nonsparse, ml_decode_sparse, ml_log_metrics, ml_nonsparse_costs,
    wmd_decode, wmd_decode_with_models, wmd_models, DecodeResult, MlBlockTerms, WmdBlockModel,
};
pub use error::{Error, Result};
pub use estimation::{
    closed_form_mse, estimate_all_hypotheses, mmse_data_refine, mmse_pilot_estimate, mmse_pilot_estimate_at,
    support_log_likelihoods, support_posterior, MseCurve, PilotEstimate, SupportHypothesisEstimate,
};
pub use linalg::{CMat, CVec};
pub use model::{
    binomial, db_to_linear, dft_submatrix, draw_block, enumerate_supports, is_prime, transmit_receive,
    validate_pilot_pattern, BlockRealization, ChannelSpec, ChannelSpecBuilder, Frame, PilotPatternReport,
    PilotViolation, SupportSet,
};
pub use scalar::Scalar;
pub use support::{
    complement_projector, dasd_decode, dasd_decode_with, label_event, pase_detect, pase_detect_fixed_support,
    pilot_column_basis, DasdEvent, DasdOptions, DasdOutcome, DasdStep, PaseResult,
};

pub type ChannelSpec64 = ChannelSpec<f64>;
pub type ChannelSpec32 = ChannelSpec<f32>;
pub type BlockRealization64 = BlockRealization<f64>;
pub type BlockRealization32 = BlockRealization<f32>;
pub type Frame64 = Frame<f64>;
pub type Frame32 = Frame<f32>;
pub type Codebook64 = Codebook<f64>;
pub type Codebook32 = Codebook<f32>;
pub type PilotEstimate64 = PilotEstimate<f64>;
pub type PilotEstimate32 = PilotEstimate<f32>;
pub type DecodeResult64 = DecodeResult<f64>;
pub type DecodeResult32 = DecodeResult<f32>;
