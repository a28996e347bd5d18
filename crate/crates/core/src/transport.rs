//! Payload transport over the fading channel.
//!
//! Two chains share the OFDM frame arithmetic but fail differently:
//! the coded digital baseline delivers a payload all-or-nothing per the
//! BLER curve, while the semantic chain packs quantized latent levels into
//! 32-bit words (two words per complex symbol) and degrades gracefully by
//! flipping individual bits with an SNR-dependent probability.

use crate::channel::{bler, eesm, linear_to_db, ChannelRealization, LinkAbstractionConfig};
use crate::ratio::CompressionRatio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("level {level} exceeds {bits}-bit range at index {index}")]
    LevelOutOfRange { level: u32, bits: u32, index: usize },
    #[error("corrupted stream metadata: {0}")]
    Metadata(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Which transport carried a payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chain {
    Baseline,
    Semantic,
    Text,
}

impl Chain {
    pub fn as_str(self) -> &'static str {
        match self {
            Chain::Baseline => "baseline",
            Chain::Semantic => "semantic",
            Chain::Text => "text",
        }
    }
}

/// Quantized levels packed into 32-bit words, two words per complex symbol.
///
/// `num_elements` keeps the original level count; only the first
/// `2 * n * num_complex_symbols` elements are carried.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub words: Vec<u32>,
    pub ratio: CompressionRatio,
    pub num_elements: usize,
    pub num_complex_symbols: usize,
}

impl SymbolStream {
    pub fn bits_per_element(&self) -> u32 {
        self.ratio.bits()
    }

    /// Levels actually carried: `2n * N_sym`.
    pub fn carried_elements(&self) -> usize {
        2 * self.ratio.divisor() as usize * self.num_complex_symbols
    }

    fn validate(&self) -> Result<(), TransportError> {
        let n = self.ratio.divisor() as usize;
        let expected_syms = self.num_elements / (2 * n);
        if self.num_complex_symbols != expected_syms {
            return Err(TransportError::Metadata(format!(
                "N_sym {} does not match floor(L / 2n) = {}",
                self.num_complex_symbols, expected_syms
            )));
        }
        if self.words.len() != 2 * self.num_complex_symbols {
            return Err(TransportError::Metadata(format!(
                "word count {} does not match 2 * N_sym = {}",
                self.words.len(),
                2 * self.num_complex_symbols
            )));
        }
        Ok(())
    }
}

/// Packs levels into 32-bit words, big-endian within each word: the first
/// of the `n` elements occupies the most significant `b` bits. Trailing
/// elements that do not fill a whole complex symbol are dropped.
pub fn pack_latent(levels: &[u32], ratio: CompressionRatio) -> Result<SymbolStream, TransportError> {
    let n = ratio.divisor() as usize;
    let b = ratio.bits();
    let max = ratio.max_level();
    if let Some(index) = levels.iter().position(|&v| v > max) {
        return Err(TransportError::LevelOutOfRange {
            level: levels[index],
            bits: b,
            index,
        });
    }
    let num_complex_symbols = levels.len() / (2 * n);
    let carried = 2 * n * num_complex_symbols;
    let mut words = Vec::with_capacity(2 * num_complex_symbols);
    for group in levels[..carried].chunks_exact(n) {
        let mut word = 0u32;
        for (j, &level) in group.iter().enumerate() {
            word |= level << (32 - b as usize * (j + 1));
        }
        words.push(word);
    }
    Ok(SymbolStream {
        words,
        ratio,
        num_elements: levels.len(),
        num_complex_symbols,
    })
}

/// Inverse of [`pack_latent`] on the carried prefix: returns exactly
/// `2n * N_sym` levels.
pub fn unpack_latent(stream: &SymbolStream) -> Result<Vec<u32>, TransportError> {
    stream.validate()?;
    let n = stream.ratio.divisor() as usize;
    let b = stream.ratio.bits() as usize;
    let mask = stream.ratio.max_level();
    let mut levels = Vec::with_capacity(stream.carried_elements());
    for &word in &stream.words {
        for j in 0..n {
            levels.push((word >> (32 - b * (j + 1))) & mask);
        }
    }
    Ok(levels)
}

/// Exact bit error probability of Gray-coded square M-QAM over AWGN at a
/// given linear SNR (Es/N0). Tends to 0.5 as the SNR goes to zero.
pub fn qam_bit_error_probability(snr_linear: f64, m: u32) -> f64 {
    debug_assert!(matches!(m, 4 | 16 | 64 | 256), "square QAM only");
    if snr_linear <= 0.0 {
        return 0.5;
    }
    let sqrt_m = (m as f64).sqrt();
    let log2_sqrt_m = (sqrt_m.log2()).round() as u32;
    let c = (1.5 * snr_linear / (m as f64 - 1.0)).sqrt();
    let mut total = 0.0;
    for k in 1..=log2_sqrt_m {
        let upper = ((1.0 - 2f64.powi(-(k as i32))) * sqrt_m) as i64;
        let mut sum = 0.0;
        for i in 0..upper {
            let t = (i as f64) * 2f64.powi(k as i32 - 1) / sqrt_m;
            let sign = if (t.floor() as i64) % 2 == 0 { 1.0 } else { -1.0 };
            let weight = 2f64.powi(k as i32 - 1) - (t + 0.5).floor();
            sum += sign * weight * libm::erfc((2 * i + 1) as f64 * c);
        }
        total += sum / sqrt_m;
    }
    (total / log2_sqrt_m as f64).clamp(0.0, 0.5)
}

/// Sends a packed stream over the channel: packed bits are assigned
/// round-robin to subcarriers and bit `i` flips independently with
/// probability `p_bit(SNR_{i mod K})`. Stream metadata passes error-free.
/// Deterministic given `rng_seed`.
pub fn semantic_transmit(
    stream: &SymbolStream,
    ch: &ChannelRealization,
    qam_m: u32,
    rng_seed: u64,
) -> SymbolStream {
    let k = ch.snrs_linear.len();
    let p_flip: Vec<f64> = ch
        .snrs_linear
        .iter()
        .map(|&s| qam_bit_error_probability(s, qam_m))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = stream.clone();
    let mut bit_index = 0usize;
    for word in &mut out.words {
        for bit in (0..32).rev() {
            let p = p_flip[bit_index % k];
            if rng.gen::<f64>() < p {
                *word ^= 1 << bit;
            }
            bit_index += 1;
        }
    }
    out
}

/// Ledger entry for one transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    pub chain: Chain,
    pub payload_bytes: u64,
    pub complex_symbols: u64,
    pub ofdm_frames: u64,
    pub delivered: bool,
    pub esnr_db: f64,
}

impl TransmissionRecord {
    pub const CSV_HEADER: &'static str =
        "chain,payload_bytes,complex_symbols,ofdm_frames,esnr_db,delivered";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{}",
            self.chain.as_str(),
            self.payload_bytes,
            self.complex_symbols,
            self.ofdm_frames,
            self.esnr_db,
            self.delivered
        )
    }
}

/// OFDM symbols needed for `n_sym` complex symbols over `k` subcarriers;
/// the last frame is zero-padded.
pub fn ofdm_frames(n_sym: u64, k: usize) -> u64 {
    debug_assert!(k >= 1);
    n_sym.div_ceil(k as u64)
}

/// Number of complex symbols the coded baseline needs for a byte payload.
pub fn baseline_symbols(payload_bytes: u64, rate: f64, bits_per_symbol: u32) -> u64 {
    let bits = payload_bytes as f64 * 8.0;
    (bits / (rate * bits_per_symbol as f64)).ceil() as u64
}

/// Coded digital transmission: the payload is delivered iff every OFDM
/// frame decodes, each frame erring independently with probability
/// `bler(ESNR)`. Deterministic given `rng_seed`.
pub fn baseline_transmit(
    payload_bytes: u64,
    ch: &ChannelRealization,
    rate: f64,
    bits_per_symbol: u32,
    cfg: &LinkAbstractionConfig,
    rng_seed: u64,
) -> Result<TransmissionRecord, TransportError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(TransportError::Parameter(format!("rate must be in (0, 1], got {rate}")));
    }
    if !matches!(bits_per_symbol, 2 | 4 | 6 | 8) {
        return Err(TransportError::Parameter(format!(
            "bits_per_symbol must be one of 2,4,6,8, got {bits_per_symbol}"
        )));
    }
    let esnr = eesm(&ch.snrs_linear, cfg.beta).map_err(|e| TransportError::Parameter(e.to_string()))?;
    let complex_symbols = baseline_symbols(payload_bytes, rate, bits_per_symbol);
    let frames = ofdm_frames(complex_symbols, ch.num_subcarriers());
    let p = bler(esnr, cfg);
    // P(zero frame errors) = (1 - p)^frames, sampled with a single draw.
    let p_deliver = if p >= 1.0 {
        0.0
    } else {
        (frames as f64 * (-p).ln_1p()).exp()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let delivered = rng.gen::<f64>() < p_deliver;
    Ok(TransmissionRecord {
        chain: Chain::Baseline,
        payload_bytes,
        complex_symbols,
        ofdm_frames: frames,
        delivered,
        esnr_db: linear_to_db(esnr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::db_to_linear;

    #[test]
    fn worked_example_symbol_count() {
        // L = 540,672 at n = 4 -> N_sym = 67,584; K = 64 -> 1,056 frames.
        let levels = vec![0u32; 540_672];
        let stream = pack_latent(&levels, CompressionRatio::N4).unwrap();
        assert_eq!(stream.num_complex_symbols, 67_584);
        assert_eq!(ofdm_frames(stream.num_complex_symbols as u64, 64), 1_056);
    }

    #[test]
    fn all_zero_levels_pack_to_zero_words() {
        for r in CompressionRatio::ALL {
            let stream = pack_latent(&vec![0u32; 64], r).unwrap();
            assert!(stream.words.iter().all(|&w| w == 0));
        }
    }

    #[test]
    fn packing_is_big_endian_within_word() {
        // n = 16 (b = 2): [3, 0, 1, 2, 0, ...] -> MSB-first 11 00 01 10 ...
        let mut levels = vec![0u32; 32];
        levels[..4].copy_from_slice(&[3, 0, 1, 2]);
        let stream = pack_latent(&levels, CompressionRatio::N16).unwrap();
        assert_eq!(stream.words.len(), 2);
        assert_eq!(stream.words[0], 0b1100_0110 << 24);
        assert_eq!(unpack_latent(&stream).unwrap(), levels);
    }

    #[test]
    fn round_trip_all_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for r in CompressionRatio::ALL {
            for _ in 0..1000 {
                let len = rng.gen_range(0..200);
                let levels: Vec<u32> = (0..len).map(|_| rng.gen_range(0..=r.max_level())).collect();
                let stream = pack_latent(&levels, r).unwrap();
                let carried = stream.carried_elements();
                assert_eq!(unpack_latent(&stream).unwrap(), &levels[..carried]);
            }
        }
    }

    #[test]
    fn level_out_of_range_is_rejected() {
        let err = pack_latent(&[0, 4, 0, 0], CompressionRatio::N16).unwrap_err();
        assert!(matches!(err, TransportError::LevelOutOfRange { index: 1, .. }));
    }

    #[test]
    fn empty_stream_unpacks_empty() {
        let stream = pack_latent(&[], CompressionRatio::N4).unwrap();
        assert_eq!(stream.num_complex_symbols, 0);
        assert!(unpack_latent(&stream).unwrap().is_empty());
    }

    #[test]
    fn corrupted_metadata_is_rejected() {
        let mut stream = pack_latent(&vec![1u32; 32], CompressionRatio::N4).unwrap();
        stream.num_complex_symbols += 1;
        assert!(matches!(unpack_latent(&stream), Err(TransportError::Metadata(_))));
        let mut stream = pack_latent(&vec![1u32; 32], CompressionRatio::N4).unwrap();
        stream.words.pop();
        assert!(matches!(unpack_latent(&stream), Err(TransportError::Metadata(_))));
    }

    #[test]
    fn single_bit_flip_changes_one_level_by_power_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in CompressionRatio::ALL {
            let levels: Vec<u32> = (0..64).map(|_| rng.gen_range(0..=r.max_level())).collect();
            let clean = pack_latent(&levels, r).unwrap();
            for _ in 0..20 {
                let mut hit = clean.clone();
                let w = rng.gen_range(0..hit.words.len());
                let bit = rng.gen_range(0..32);
                hit.words[w] ^= 1 << bit;
                let a = unpack_latent(&clean).unwrap();
                let b = unpack_latent(&hit).unwrap();
                let diffs: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
                assert_eq!(diffs.len(), 1);
                let d = (a[diffs[0]] as i64 - b[diffs[0]] as i64).unsigned_abs();
                assert!(d.is_power_of_two());
            }
        }
    }

    #[test]
    fn qam_ber_limits() {
        assert_eq!(qam_bit_error_probability(0.0, 16), 0.5);
        assert!(qam_bit_error_probability(db_to_linear(40.0), 16) < 1e-12);
        // Closed form for 16-QAM: (3 erfc(c) + 2 erfc(3c) - erfc(5c)) / 8.
        for &snr_db in &[0.0, 5.0, 10.0, 15.0] {
            let s = db_to_linear(snr_db);
            let c = (s / 10.0).sqrt();
            let expect =
                (3.0 * libm::erfc(c) + 2.0 * libm::erfc(3.0 * c) - libm::erfc(5.0 * c)) / 8.0;
            let got = qam_bit_error_probability(s, 16);
            assert!((got - expect).abs() < 1e-12, "snr {snr_db} dB: {got} vs {expect}");
        }
        // QPSK reduces to erfc(sqrt(snr/2)) / 2.
        let s = db_to_linear(6.0);
        let expect = 0.5 * libm::erfc((s / 2.0).sqrt());
        assert!((qam_bit_error_probability(s, 4) - expect).abs() < 1e-12);
    }

    #[test]
    fn infinite_snr_transmits_bit_exact() {
        let ch = ChannelRealization::flat(64, 200.0).unwrap();
        let levels: Vec<u32> = (0..512).map(|i| i % 256).collect();
        let stream = pack_latent(&levels, CompressionRatio::N4).unwrap();
        let rx = semantic_transmit(&stream, &ch, 16, 1);
        assert_eq!(rx, stream);
    }

    #[test]
    fn zero_snr_flips_half_the_bits() {
        // 1e6 bits within 1% of flip rate 0.5.
        let ch = ChannelRealization::flat(64, -300.0).unwrap();
        let levels = vec![0u32; 250_000];
        let stream = pack_latent(&levels, CompressionRatio::N4).unwrap();
        let rx = semantic_transmit(&stream, &ch, 16, 7);
        let flipped: u32 = rx
            .words
            .iter()
            .zip(&stream.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        let total = 32.0 * stream.words.len() as f64;
        let rate = flipped as f64 / total;
        assert!(total >= 1e6);
        assert!((rate - 0.5).abs() < 0.005, "rate={rate}");
    }

    #[test]
    fn flat_channel_flip_rate_matches_closed_form() {
        // Flat 10 dB, 16-QAM: empirical rate within 5% of p_bit over 1e6 bits.
        let ch = ChannelRealization::flat(64, 10.0).unwrap();
        let p = qam_bit_error_probability(db_to_linear(10.0), 16);
        let levels = vec![0u32; 250_000];
        let stream = pack_latent(&levels, CompressionRatio::N4).unwrap();
        let rx = semantic_transmit(&stream, &ch, 16, 11);
        let flipped: u32 = rx
            .words
            .iter()
            .zip(&stream.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        let rate = flipped as f64 / (32.0 * stream.words.len() as f64);
        assert!((rate / p - 1.0).abs() < 0.05, "rate={rate} p={p}");
    }

    #[test]
    fn semantic_transmit_is_deterministic() {
        let ch = ChannelRealization::flat(64, 5.0).unwrap();
        let levels: Vec<u32> = (0..1024).map(|i| i % 16).collect();
        let stream = pack_latent(&levels, CompressionRatio::N8).unwrap();
        let a = semantic_transmit(&stream, &ch, 16, 42);
        let b = semantic_transmit(&stream, &ch, 16, 42);
        assert_eq!(a, b);
        let c = semantic_transmit(&stream, &ch, 16, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn baseline_frozen_example() {
        // 24 KByte at rate 1/2, 4 bits/symbol -> 98,304 symbols, 1,536 frames.
        let ch = ChannelRealization::flat(64, 30.0).unwrap();
        let cfg = LinkAbstractionConfig::default();
        let rec = baseline_transmit(24_576, &ch, 0.5, 4, &cfg, 0).unwrap();
        assert_eq!(rec.complex_symbols, 98_304);
        assert_eq!(rec.ofdm_frames, 1_536);
        assert!(rec.delivered);
    }

    #[test]
    fn baseline_extremes() {
        let cfg = LinkAbstractionConfig::default();
        // Far above threshold: bler ~ 0 -> always delivered.
        let hi = ChannelRealization::flat(64, 60.0).unwrap();
        // Far below threshold: bler ~ 1 -> never delivered.
        let lo = ChannelRealization::flat(64, -60.0).unwrap();
        for seed in 0..200 {
            assert!(baseline_transmit(1000, &hi, 0.5, 4, &cfg, seed).unwrap().delivered);
            assert!(!baseline_transmit(1000, &lo, 0.5, 4, &cfg, seed).unwrap().delivered);
        }
    }

    #[test]
    fn baseline_delivery_probability_matches_analytic() {
        // Monte-Carlo delivery rate within 3 sigma of (1 - bler)^frames.
        let cfg = LinkAbstractionConfig::default();
        let ch = ChannelRealization::flat(64, 6.8).unwrap();
        let esnr = eesm(&ch.snrs_linear, cfg.beta).unwrap();
        let p = bler(esnr, &cfg);
        let rec = baseline_transmit(4096, &ch, 0.5, 4, &cfg, 0).unwrap();
        let analytic = (1.0 - p).powi(rec.ofdm_frames as i32);
        let trials = 4000;
        let mut delivered = 0;
        for seed in 0..trials {
            if baseline_transmit(4096, &ch, 0.5, 4, &cfg, seed).unwrap().delivered {
                delivered += 1;
            }
        }
        let rate = delivered as f64 / trials as f64;
        let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!(
            (rate - analytic).abs() <= 3.0 * sigma + 1e-9,
            "rate={rate} analytic={analytic} sigma={sigma}"
        );
    }

    #[test]
    fn ofdm_frame_arithmetic() {
        assert_eq!(ofdm_frames(67_584, 64), 1_056);
        assert_eq!(ofdm_frames(0, 64), 0);
        assert_eq!(ofdm_frames(65, 64), 2);
        assert_eq!(ofdm_frames(64, 64), 1);
    }

    #[test]
    fn record_csv_row_shape() {
        let rec = TransmissionRecord {
            chain: Chain::Text,
            payload_bytes: 88,
            complex_symbols: 352,
            ofdm_frames: 6,
            delivered: true,
            esnr_db: 9.5,
        };
        assert_eq!(rec.csv_row(), "text,88,352,6,9.500000,true");
    }
}
