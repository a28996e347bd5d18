//! CSV emission. Rows are sorted before writing so result assembly is
//! order-independent, and all formatting is fixed-width decimal so that
//! identical configurations produce byte-identical files.

use crate::scenario::{LedgerRow, ReportRow, RunOutput};
use semlink_core::metrics::{bandwidth_summary, ChainSummary};
use semlink_core::transport::TransmissionRecord;

pub const REPORT_HEADER: &str =
    "scenario,chain,snr_db,n,payload_bytes,complex_symbols,delivered,psnr_db,success,coverage";

pub const LEDGER_HEADER: &str = "scenario,snr_db,n,seed,image,purpose,chain,payload_bytes,complex_symbols,ofdm_frames,esnr_db,delivered";

pub const SUMMARY_HEADER: &str = "chain,count,total_bytes,mean_bytes,bytes_p25,bytes_p50,bytes_p75,total_symbols,mean_symbols,symbols_p25,symbols_p50,symbols_p75";

fn opt_f(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

fn opt_u(v: Option<u32>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn report_row_csv(r: &ReportRow) -> String {
    format!(
        "{},{},{:.2},{},{},{},{:.6},{},{},{}",
        r.scenario,
        r.chain.as_str(),
        r.snr_db,
        opt_u(r.n),
        r.payload_bytes,
        r.complex_symbols,
        r.delivered,
        opt_f(r.psnr_db),
        opt_f(r.success),
        opt_f(r.coverage),
    )
}

pub fn ledger_row_csv(r: &LedgerRow) -> String {
    format!(
        "{},{:.2},{},{},{},{},{}",
        r.scenario,
        r.snr_db,
        r.ratio.map_or(String::new(), |n| n.to_string()),
        r.seed,
        r.image,
        r.purpose.as_str(),
        r.record.csv_row(),
    )
}

pub fn summary_row_csv(s: &ChainSummary) -> String {
    format!(
        "{},{},{},{:.6},{},{},{},{},{:.6},{},{},{}",
        s.chain.as_str(),
        s.count,
        s.total_bytes,
        s.mean_bytes,
        s.bytes_quantiles[0],
        s.bytes_quantiles[1],
        s.bytes_quantiles[2],
        s.total_symbols,
        s.mean_symbols,
        s.symbol_quantiles[0],
        s.symbol_quantiles[1],
        s.symbol_quantiles[2],
    )
}

/// The report CSV: one row per (n, snr, seed) cell, sorted.
pub fn report_csv(out: &RunOutput) -> String {
    let mut rows = out.report_rows.clone();
    rows.sort_by(|a, b| {
        (&a.scenario, a.chain.as_str(), a.n)
            .partial_cmp(&(&b.scenario, b.chain.as_str(), b.n))
            .unwrap()
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
    });
    let mut text = String::from(REPORT_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&report_row_csv(r));
        text.push('\n');
    }
    text
}

/// The full transmission ledger, sorted by run context.
pub fn ledger_csv(out: &RunOutput) -> String {
    let mut rows: Vec<&LedgerRow> = out.ledger.iter().collect();
    rows.sort_by(|a, b| {
        (&a.scenario, a.image, a.seed, a.purpose.as_str())
            .partial_cmp(&(&b.scenario, b.image, b.seed, b.purpose.as_str()))
            .unwrap()
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
    });
    let mut text = String::from(LEDGER_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&ledger_row_csv(r));
        text.push('\n');
    }
    text
}

/// Per-chain bandwidth summary over the whole ledger.
pub fn summary_csv(out: &RunOutput) -> String {
    let records: Vec<TransmissionRecord> = out.ledger.iter().map(|r| r.record.clone()).collect();
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    if let Ok(summaries) = bandwidth_summary(&records) {
        for s in &summaries {
            text.push_str(&summary_row_csv(s));
            text.push('\n');
        }
    }
    text
}
