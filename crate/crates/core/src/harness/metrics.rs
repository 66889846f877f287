//! Aggregated metrics and CSV emission.
//!
//! Accuracies are ratios of integer counts, so rows are bit-identical
//! regardless of worker count. Wall time is reported on stderr only; a
//! timing column would break the byte-identical-CSV contract.

use std::io::{self, Write};

use crate::baselines::Method;

/// One aggregated sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: Method,
    pub beams: usize,
    pub rounds: usize,
    pub snr_db: f64,
    pub directions: usize,
    pub ris_count: usize,
    pub user_count: usize,
    pub trials: usize,
    /// Fraction of (user, RIS) links with the exact direction recovered.
    pub link_accuracy: f64,
    /// Fraction of users whose strongest link is recovered.
    pub strongest_link_accuracy: f64,
    /// Fraction of users whose full strength ranking is recovered.
    pub ranking_accuracy: f64,
    pub slots_used: usize,
    /// Seconds spent aggregating this row; never written to CSV.
    pub wall_time_s: f64,
}

pub const METRICS_CSV_HEADER: &str = "method,B,L,snr_db,N,I,K,trials,link_accuracy,strongest_link_accuracy,ranking_accuracy,slots_used";

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "{METRICS_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.beams,
            r.rounds,
            format_float(r.snr_db),
            r.directions,
            r.ris_count,
            r.user_count,
            r.trials,
            format_float(r.link_accuracy),
            format_float(r.strongest_link_accuracy),
            format_float(r.ranking_accuracy),
            r.slots_used,
        )?;
    }
    Ok(())
}
