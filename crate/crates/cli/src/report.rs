//! CSV report schemas.
//!
//! Normative columns:
//! - ser_vs_snr: `detector,snr_db,trials,errors,ser,ci95`
//! - ser_vs_hop: `detector,hop,snr_db,trials,errors,ser,ci95`

use mimo_detect::eval::SerRow;
use std::fmt::Write as _;

pub fn ser_vs_snr_csv(rows: &[(f64, SerRow)]) -> String {
    let mut out = String::from("detector,snr_db,trials,errors,ser,ci95\n");
    for (snr_db, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.detector, snr_db, r.trials, r.errors, r.ser, r.ci95
        );
    }
    out
}

pub fn ser_vs_hop_csv(rows: &[(u32, f64, SerRow)]) -> String {
    let mut out = String::from("detector,hop,snr_db,trials,errors,ser,ci95\n");
    for (hop, snr_db, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.detector, hop, snr_db, r.trials, r.errors, r.ser, r.ci95
        );
    }
    out
}

/// Stderr warnings for rows whose error counts are too small for the normal
/// approximation.
pub fn low_count_warnings<'a>(rows: impl Iterator<Item = &'a SerRow>) -> Vec<String> {
    rows.filter(|r| r.low_count)
        .map(|r| {
            format!(
                "warning: {} has only {} errors over {} trials; CI is unreliable",
                r.detector, r.errors, r.trials
            )
        })
        .collect()
}
