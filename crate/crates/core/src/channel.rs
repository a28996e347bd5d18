//! Frequency-selective fading channel and its link-level abstraction.
//!
//! A [`ChannelRealization`] holds the per-subcarrier complex gains of one
//! coherence block together with the per-subcarrier SNRs they induce at a
//! given transmit SNR. The exponential effective SNR mapping ([`eesm`])
//! collapses those SNRs into a single AWGN-equivalent scalar, and [`bler`]
//! maps that scalar to a frame error probability through an erfc-shaped
//! curve.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors produced by channel sampling and the link abstraction.
#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Per-subcarrier gains and SNRs for one coherence block.
///
/// Values are immutable after construction; one realization covers one
/// transmitted payload (block fading).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Complex frequency response, one entry per active subcarrier.
    pub gains: Vec<Complex64>,
    /// Transmit SNR in dB.
    pub tx_snr_db: f64,
    /// Per-subcarrier SNRs in linear units: `|gains[k]|^2 * 10^(tx_snr_db/10)`.
    pub snrs_linear: Vec<f64>,
    /// Seed the realization was drawn from (0 for deterministic constructions).
    pub seed: u64,
}

impl ChannelRealization {
    /// Number of active subcarriers.
    pub fn num_subcarriers(&self) -> usize {
        self.gains.len()
    }

    /// Deterministic unit-gain flat channel: every subcarrier SNR equals the
    /// transmit SNR, so the effective SNR is exactly `tx_snr_db`.
    pub fn flat(k: usize, tx_snr_db: f64) -> Result<Self, ChannelError> {
        if k == 0 {
            return Err(ChannelError::Parameter("K must be >= 1".into()));
        }
        let gains = vec![Complex64::new(1.0, 0.0); k];
        let snr = db_to_linear(tx_snr_db);
        Ok(Self {
            gains,
            tx_snr_db,
            snrs_linear: vec![snr; k],
            seed: 0,
        })
    }
}

/// EESM parameter and BLER curve shape for one modulation/coding scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkAbstractionConfig {
    /// EESM beta in linear-SNR units.
    pub beta: f64,
    /// ESNR (dB) at which the BLER curve crosses 0.5.
    pub bler_threshold_db: f64,
    /// Width parameter of the erfc transition, in dB.
    pub bler_slope_db: f64,
}

impl LinkAbstractionConfig {
    pub fn new(beta: f64, bler_threshold_db: f64, bler_slope_db: f64) -> Result<Self, ChannelError> {
        if !(beta > 0.0) {
            return Err(ChannelError::Parameter(format!("beta must be > 0, got {beta}")));
        }
        if !(bler_slope_db > 0.0) {
            return Err(ChannelError::Parameter(format!(
                "bler_slope_db must be > 0, got {bler_slope_db}"
            )));
        }
        Ok(Self {
            beta,
            bler_threshold_db,
            bler_slope_db,
        })
    }
}

impl Default for LinkAbstractionConfig {
    /// Defaults for the 16-QAM rate-1/2 configuration.
    fn default() -> Self {
        Self {
            beta: 5.0,
            bler_threshold_db: 4.0,
            bler_slope_db: 1.0,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Draws one block-fading realization: `num_taps` i.i.d. complex Gaussian
/// taps with unit total average power, expanded to the `k`-point discrete
/// frequency response. Deterministic given `seed`.
pub fn sample_channel(
    seed: u64,
    k: usize,
    num_taps: usize,
    tx_snr_db: f64,
) -> Result<ChannelRealization, ChannelError> {
    if k == 0 {
        return Err(ChannelError::Parameter("K must be >= 1".into()));
    }
    if num_taps == 0 || num_taps > k {
        return Err(ChannelError::Parameter(format!(
            "num_taps must satisfy 1 <= num_taps <= K, got {num_taps} with K={k}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Each tap ~ CN(0, 1/num_taps) so the total average power is 1.
    let sigma = (0.5 / num_taps as f64).sqrt();
    let taps: Vec<Complex64> = (0..num_taps)
        .map(|_| {
            let (a, b) = gaussian_pair(&mut rng);
            Complex64::new(a * sigma, b * sigma)
        })
        .collect();

    let tx_snr = db_to_linear(tx_snr_db);
    let mut gains = Vec::with_capacity(k);
    let mut snrs_linear = Vec::with_capacity(k);
    for bin in 0..k {
        let mut h = Complex64::new(0.0, 0.0);
        for (t, tap) in taps.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (bin as f64) * (t as f64) / (k as f64);
            h += tap * Complex64::from_polar(1.0, phase);
        }
        snrs_linear.push(h.norm_sqr() * tx_snr);
        gains.push(h);
    }

    Ok(ChannelRealization {
        gains,
        tx_snr_db,
        snrs_linear,
        seed,
    })
}

/// Standard-normal pair via Box-Muller, driven by the seeded stream.
fn gaussian_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Exponential effective SNR mapping: `-beta * ln(mean(exp(-snr_k / beta)))`.
///
/// The sum is evaluated relative to the minimum SNR so the result stays
/// finite (and inside `[min, max]`) even when the inputs are large enough
/// for `exp(-snr/beta)` to underflow.
pub fn eesm(snrs_linear: &[f64], beta: f64) -> Result<f64, ChannelError> {
    if snrs_linear.is_empty() {
        return Err(ChannelError::Parameter("empty SNR vector".into()));
    }
    if !(beta > 0.0) {
        return Err(ChannelError::Parameter(format!("beta must be > 0, got {beta}")));
    }
    if snrs_linear.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(ChannelError::Parameter(
            "SNRs must be finite and non-negative".into(),
        ));
    }
    let min = snrs_linear.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = snrs_linear.len() as f64;
    let sum: f64 = snrs_linear.iter().map(|s| (-(s - min) / beta).exp()).sum();
    Ok(min - beta * (sum / k).ln())
}

/// Block error probability at a given effective SNR:
/// `0.5 * erfc((esnr_db - threshold) / slope)`, clamped to `[0, 1]`.
/// Monotone non-increasing in `esnr_linear`.
pub fn bler(esnr_linear: f64, cfg: &LinkAbstractionConfig) -> f64 {
    if esnr_linear <= 0.0 {
        return 1.0;
    }
    let esnr_db = linear_to_db(esnr_linear);
    let x = (esnr_db - cfg.bler_threshold_db) / cfg.bler_slope_db;
    (0.5 * libm::erfc(x)).clamp(0.0, 1.0)
}
