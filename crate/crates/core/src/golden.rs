//! Embedded golden fixture: reference sub-channel BERs for the default
//! N ∈ {1,2,4} × SNR ∈ {−5,0,5,10,15} dB grid, plus the tolerance policy
//! used by `ber --golden` and the acceptance suite.

use crate::metrics::BerReport;

/// One golden entry. `stream` is 1-based; 0 means the per-N average row.
/// `ber = None` marks the below-measurement-floor cell (< 1e−7), verified
/// only under long runs as an estimate < 1e−6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenCell {
    pub n: usize,
    pub snr_db: f64,
    pub stream: usize,
    pub ber: Option<f64>,
}

pub const GOLDEN_SNRS: [f64; 5] = [-5.0, 0.0, 5.0, 10.0, 15.0];
pub const GOLDEN_NS: [usize; 3] = [1, 2, 4];

pub const GOLDEN_BER: &[GoldenCell] = &[
    // N = 1 (single stream doubles as the average row)
    GoldenCell { n: 1, snr_db: -5.0, stream: 1, ber: Some(3.15e-1) },
    GoldenCell { n: 1, snr_db: 0.0, stream: 1, ber: Some(2.13e-1) },
    GoldenCell { n: 1, snr_db: 5.0, stream: 1, ber: Some(1.10e-1) },
    GoldenCell { n: 1, snr_db: 10.0, stream: 1, ber: Some(4.47e-2) },
    GoldenCell { n: 1, snr_db: 15.0, stream: 1, ber: Some(1.43e-2) },
    // N = 2
    GoldenCell { n: 2, snr_db: -5.0, stream: 1, ber: Some(2.39e-1) },
    GoldenCell { n: 2, snr_db: -5.0, stream: 2, ber: Some(4.02e-1) },
    GoldenCell { n: 2, snr_db: -5.0, stream: 0, ber: Some(3.21e-1) },
    GoldenCell { n: 2, snr_db: 0.0, stream: 1, ber: Some(1.12e-1) },
    GoldenCell { n: 2, snr_db: 0.0, stream: 2, ber: Some(3.34e-1) },
    GoldenCell { n: 2, snr_db: 0.0, stream: 0, ber: Some(2.23e-1) },
    GoldenCell { n: 2, snr_db: 5.0, stream: 1, ber: Some(2.38e-2) },
    GoldenCell { n: 2, snr_db: 5.0, stream: 2, ber: Some(2.33e-1) },
    GoldenCell { n: 2, snr_db: 5.0, stream: 0, ber: Some(1.28e-1) },
    GoldenCell { n: 2, snr_db: 10.0, stream: 1, ber: Some(1.73e-3) },
    GoldenCell { n: 2, snr_db: 10.0, stream: 2, ber: Some(1.31e-1) },
    GoldenCell { n: 2, snr_db: 10.0, stream: 0, ber: Some(6.63e-2) },
    GoldenCell { n: 2, snr_db: 15.0, stream: 1, ber: Some(4.46e-5) },
    GoldenCell { n: 2, snr_db: 15.0, stream: 2, ber: Some(5.43e-2) },
    GoldenCell { n: 2, snr_db: 15.0, stream: 0, ber: Some(2.72e-2) },
    // N = 4
    GoldenCell { n: 4, snr_db: -5.0, stream: 1, ber: Some(1.94e-1) },
    GoldenCell { n: 4, snr_db: -5.0, stream: 2, ber: Some(2.81e-1) },
    GoldenCell { n: 4, snr_db: -5.0, stream: 3, ber: Some(3.67e-1) },
    GoldenCell { n: 4, snr_db: -5.0, stream: 4, ber: Some(4.50e-1) },
    GoldenCell { n: 4, snr_db: -5.0, stream: 0, ber: Some(3.23e-1) },
    GoldenCell { n: 4, snr_db: 0.0, stream: 1, ber: Some(6.52e-2) },
    GoldenCell { n: 4, snr_db: 0.0, stream: 2, ber: Some(1.54e-1) },
    GoldenCell { n: 4, snr_db: 0.0, stream: 3, ber: Some(2.73e-1) },
    GoldenCell { n: 4, snr_db: 0.0, stream: 4, ber: Some(4.13e-1) },
    GoldenCell { n: 4, snr_db: 0.0, stream: 0, ber: Some(2.26e-1) },
    GoldenCell { n: 4, snr_db: 5.0, stream: 1, ber: Some(5.03e-3) },
    GoldenCell { n: 4, snr_db: 5.0, stream: 2, ber: Some(3.96e-2) },
    GoldenCell { n: 4, snr_db: 5.0, stream: 3, ber: Some(1.48e-1) },
    GoldenCell { n: 4, snr_db: 5.0, stream: 4, ber: Some(3.50e-1) },
    GoldenCell { n: 4, snr_db: 5.0, stream: 0, ber: Some(1.35e-1) },
    GoldenCell { n: 4, snr_db: 10.0, stream: 1, ber: Some(1.99e-5) },
    GoldenCell { n: 4, snr_db: 10.0, stream: 2, ber: Some(2.02e-3) },
    GoldenCell { n: 4, snr_db: 10.0, stream: 3, ber: Some(4.12e-2) },
    GoldenCell { n: 4, snr_db: 10.0, stream: 4, ber: Some(2.57e-1) },
    GoldenCell { n: 4, snr_db: 10.0, stream: 0, ber: Some(7.51e-2) },
    GoldenCell { n: 4, snr_db: 15.0, stream: 1, ber: None },
    GoldenCell { n: 4, snr_db: 15.0, stream: 2, ber: Some(7.67e-6) },
    GoldenCell { n: 4, snr_db: 15.0, stream: 3, ber: Some(3.97e-3) },
    GoldenCell { n: 4, snr_db: 15.0, stream: 4, ber: Some(1.48e-1) },
    GoldenCell { n: 4, snr_db: 15.0, stream: 0, ber: Some(3.81e-2) },
];

/// Result of checking one golden cell against a measured report.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCheck {
    pub cell: GoldenCell,
    pub measured: f64,
    pub tolerance: String,
    pub pass: bool,
    pub skipped: bool,
}

fn measured_for(report: &BerReport, stream: usize) -> (f64, f64) {
    if stream == 0 {
        // avg row; pool the ensemble SEs of the streams
        let se = (report
            .ensemble_se
            .iter()
            .map(|s| s * s)
            .sum::<f64>())
        .sqrt()
            / report.ensemble_se.len() as f64;
        (report.avg_ber, se)
    } else {
        (
            report.per_stream_ber[stream - 1],
            report.ensemble_se[stream - 1],
        )
    }
}

/// Tolerance policy:
/// - golden ≥ 1e−3: |measured − golden| ≤ 5%·golden + 3 ensemble standard
///   errors (the 5% covers the reference table's own Monte Carlo noise and
///   3-digit rounding, the ±3 SE term covers this estimator's noise under
///   block fading);
/// - golden < 1e−3: within ±3 ensemble standard errors;
/// - the `< 1e−7` cell: skipped unless `long_run`, then measured < 1e−6.
pub fn check_cell(cell: &GoldenCell, report: &BerReport, long_run: bool) -> GoldenCheck {
    let (measured, se) = measured_for(report, cell.stream);
    match cell.ber {
        Some(golden) if golden >= 1e-3 => {
            let dev = (measured - golden).abs();
            let bound = 0.05 * golden + 3.0 * se;
            GoldenCheck {
                cell: *cell,
                measured,
                tolerance: format!("|dev| {dev:.3e} <= 5% + 3 se = {bound:.3e}"),
                pass: dev <= bound,
                skipped: false,
            }
        }
        Some(golden) => {
            let dev = (measured - golden).abs();
            GoldenCheck {
                cell: *cell,
                measured,
                tolerance: format!("|dev| {:.3e} <= 3 se {:.3e}", dev, 3.0 * se),
                pass: dev <= 3.0 * se,
                skipped: false,
            }
        }
        None => {
            if long_run {
                GoldenCheck {
                    cell: *cell,
                    measured,
                    tolerance: format!("{measured:.3e} < 1e-6"),
                    pass: measured < 1e-6,
                    skipped: false,
                }
            } else {
                GoldenCheck {
                    cell: *cell,
                    measured,
                    tolerance: "skipped (< 1e-7 cell, needs --long-run)".to_string(),
                    pass: true,
                    skipped: true,
                }
            }
        }
    }
}

/// Check every golden cell against a list of sweep reports covering the
/// golden grid. Cells whose (n, snr) is missing from the reports are
/// ignored, so partial sweeps can still be golden-checked.
pub fn check_reports(reports: &[BerReport], long_run: bool) -> Vec<GoldenCheck> {
    let mut checks = Vec::new();
    for cell in GOLDEN_BER {
        if let Some(report) = reports
            .iter()
            .find(|r| r.n_antennas == cell.n && r.snr_db == cell.snr_db)
        {
            checks.push(check_cell(cell, report, long_run));
        }
    }
    checks
}
