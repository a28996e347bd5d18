//! Bandwidth ledger aggregation and task-level metrics.

use crate::codec::ImageBuffer;
use crate::transport::{Chain, TransmissionRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// PSNR ceiling reported for exact matches, keeping CSV output finite.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Evaluation of one task attempt, with its transmission ledger entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub predicted: String,
    pub truths: Vec<String>,
    pub success: bool,
    pub record: TransmissionRecord,
}

/// PSNR in dB between two `[0, 1]`-ranged images of identical dimensions.
/// Zero MSE returns the 99 dB cap.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    if a.h != b.h || a.w != b.w {
        return Err(MetricError::DimMismatch(a.h, a.w, b.h, b.w));
    }
    let n = a.data.len() as f64;
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Case-insensitive, whitespace-normalized exact match against any
/// ground-truth alternative.
pub fn answer_matches(predicted: &str, truths: &[String]) -> bool {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let p = norm(predicted);
    truths.iter().any(|t| norm(t) == p)
}

/// Fraction of successful outcomes.
pub fn success_rate(outcomes: &[TaskOutcome]) -> Result<f64, MetricError> {
    if outcomes.is_empty() {
        return Err(MetricError::Empty("outcomes"));
    }
    let hits = outcomes.iter().filter(|o| o.success).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Category-name synonym expansion table.
pub type SynonymTable = BTreeMap<String, Vec<String>>;

/// Fraction of ground-truth categories mentioned in the response, where a
/// category counts as covered if its name or any synonym appears as a
/// consecutive token sequence.
pub fn object_coverage(
    response: &str,
    categories: &[String],
    synonyms: &SynonymTable,
) -> Result<f64, MetricError> {
    if categories.is_empty() {
        return Err(MetricError::Empty("categories"));
    }
    let tokens = crate::intent::tokenize(response);
    let contains_seq = |needle: &str| -> bool {
        let nt = crate::intent::tokenize(needle);
        if nt.is_empty() || nt.len() > tokens.len() {
            return false;
        }
        tokens.windows(nt.len()).any(|win| win == nt.as_slice())
    };
    let covered = categories
        .iter()
        .filter(|cat| {
            contains_seq(cat)
                || synonyms
                    .get(cat.as_str())
                    .map_or(false, |alts| alts.iter().any(|a| contains_seq(a)))
        })
        .count();
    Ok(covered as f64 / categories.len() as f64)
}

/// Aggregate bandwidth statistics for one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub chain: Chain,
    pub count: usize,
    pub total_bytes: u64,
    pub mean_bytes: f64,
    pub bytes_quantiles: [u64; 3],
    pub total_symbols: u64,
    pub mean_symbols: f64,
    pub symbol_quantiles: [u64; 3],
}

/// Per-chain means and {25, 50, 75}% quantiles over the ledger; totals are
/// exact sums of the entries.
pub fn bandwidth_summary(records: &[TransmissionRecord]) -> Result<Vec<ChainSummary>, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty("records"));
    }
    let mut by_chain: BTreeMap<&'static str, Vec<&TransmissionRecord>> = BTreeMap::new();
    for r in records {
        by_chain.entry(r.chain.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, rows) in by_chain {
        let chain = rows[0].chain;
        let count = rows.len();
        let total_bytes: u64 = rows.iter().map(|r| r.payload_bytes).sum();
        let total_symbols: u64 = rows.iter().map(|r| r.complex_symbols).sum();
        let mut bytes: Vec<u64> = rows.iter().map(|r| r.payload_bytes).collect();
        let mut syms: Vec<u64> = rows.iter().map(|r| r.complex_symbols).collect();
        bytes.sort_unstable();
        syms.sort_unstable();
        out.push(ChainSummary {
            chain,
            count,
            total_bytes,
            mean_bytes: total_bytes as f64 / count as f64,
            bytes_quantiles: [
                nearest_rank(&bytes, 0.25),
                nearest_rank(&bytes, 0.50),
                nearest_rank(&bytes, 0.75),
            ],
            total_symbols,
            mean_symbols: total_symbols as f64 / count as f64,
            symbol_quantiles: [
                nearest_rank(&syms, 0.25),
                nearest_rank(&syms, 0.50),
                nearest_rank(&syms, 0.75),
            ],
        });
    }
    Ok(out)
}

/// Nearest-rank quantile on a sorted slice: `ceil(q * n)`-th value.
fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}
