//! JSON sidecars, result documents and CSV tables.

use std::fmt::Write as _;

use ace_core::phantom::{PhantomSpec, SystemEffects};
use ace_core::rfm::{AceResult, Method, RatioCurves, RfmOptions};
use ace_core::{Provenance, ScanConfig};
use serde::{Deserialize, Serialize};

pub const SIDECAR_VERSION: u32 = 1;

/// Acquisition and phantom description stored next to an RF file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub scan: ScanConfig,
    pub phantom: Option<PhantomSpec>,
    pub effects: SystemEffects,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub f_hz: f64,
    pub f_ref_hz: f64,
    pub alpha_db_cm_mhz: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub bin_lo: usize,
    pub bin_hi: usize,
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub method: Method,
    pub aggregate_alpha_db_cm_mhz: f64,
    /// Estimate minus ground truth, when the truth is known.
    pub signed_error_db_cm_mhz: Option<f64>,
    pub per_frequency: Vec<FrequencyRow>,
    pub band: BandSummary,
    pub fit_range_m: (f64, f64),
    pub oscillation_metric: f64,
    pub mean_residual_rms: f64,
    pub options: RfmOptions,
    pub provenance: Provenance,
}

impl ResultDocument {
    /// `opts` is echoed with the fit range and lifter actually used.
    pub fn new(result: &AceResult, curves: &RatioCurves, opts: &RfmOptions, provenance: &Provenance) -> Self {
        let bin_hz = if curves.pairs.is_empty() {
            0.0
        } else {
            curves.delta_f / (curves.bins[0].0 - curves.bins[0].1) as f64
        };
        let options = RfmOptions {
            fit_range: Some(result.fit_range),
            lifter: match result.method {
                Method::Improved => Some(opts.lifter_spec()),
                Method::Baseline => opts.lifter,
            },
            ..opts.clone()
        };
        Self {
            method: result.method,
            aggregate_alpha_db_cm_mhz: result.aggregate_alpha_db_cm_mhz,
            signed_error_db_cm_mhz: provenance
                .true_alpha_db_cm_mhz
                .map(|truth| result.aggregate_alpha_db_cm_mhz - truth),
            per_frequency: result
                .per_frequency
                .iter()
                .map(|e| FrequencyRow {
                    f_hz: e.f_hz,
                    f_ref_hz: e.f_ref_hz,
                    alpha_db_cm_mhz: e.alpha_db_cm_mhz,
                    slope: e.fit.slope,
                    intercept: e.fit.intercept,
                    r_squared: e.fit.r_squared,
                    residual_rms: e.fit.residual_rms,
                    n_points: e.fit.n_points,
                })
                .collect(),
            band: BandSummary {
                bin_lo: result.band.bin_lo,
                bin_hi: result.band.bin_hi,
                f_lo_hz: result.band.bin_lo as f64 * bin_hz,
                f_hi_hz: result.band.bin_hi as f64 * bin_hz,
                threshold_db: result.band.threshold_db,
            },
            fit_range_m: result.fit_range,
            oscillation_metric: result.oscillation_metric,
            mean_residual_rms: result.mean_residual_rms,
            options,
            provenance: provenance.clone(),
        }
    }

    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{}: alpha = {:.4} dB/cm/MHz, oscillation = {:.5}",
            self.method, self.aggregate_alpha_db_cm_mhz, self.oscillation_metric
        );
        if let (Some(truth), Some(err)) = (self.provenance.true_alpha_db_cm_mhz, self.signed_error_db_cm_mhz) {
            let _ = write!(line, ", truth = {truth}, error = {err:+.4}");
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub truth_db_cm_mhz: Option<f64>,
    pub baseline_alpha_db_cm_mhz: f64,
    pub improved_alpha_db_cm_mhz: f64,
    pub baseline_error_db_cm_mhz: Option<f64>,
    pub improved_error_db_cm_mhz: Option<f64>,
    pub baseline_oscillation: f64,
    pub improved_oscillation: f64,
    /// Improved over baseline oscillation metric.
    pub oscillation_ratio: f64,
}

impl CompareSummary {
    pub fn new(baseline: &ResultDocument, improved: &ResultDocument) -> Self {
        Self {
            truth_db_cm_mhz: baseline.provenance.true_alpha_db_cm_mhz,
            baseline_alpha_db_cm_mhz: baseline.aggregate_alpha_db_cm_mhz,
            improved_alpha_db_cm_mhz: improved.aggregate_alpha_db_cm_mhz,
            baseline_error_db_cm_mhz: baseline.signed_error_db_cm_mhz,
            improved_error_db_cm_mhz: improved.signed_error_db_cm_mhz,
            baseline_oscillation: baseline.oscillation_metric,
            improved_oscillation: improved.oscillation_metric,
            oscillation_ratio: improved.oscillation_metric / baseline.oscillation_metric,
        }
    }
}

pub const CURVES_HEADER: &str = "pair_f_hz,depth_m,ln_ratio,fit_value";

/// One row per (pair, depth window) with the fitted line alongside.
pub fn curves_csv(result: &AceResult, curves: &RatioCurves) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for (p, curve) in curves.curves.iter().enumerate() {
        let est = &result.per_frequency[p];
        for (z, v) in curves.depths.iter().zip(curve) {
            let _ = writeln!(out, "{},{},{},{}", est.f_hz, z, v, est.fit.predict(*z));
        }
    }
    out
}

pub const SWEEP_HEADER: &str = "seed,cutoff,method,alpha,abs_error,oscillation_metric";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub cutoff: usize,
    pub method: Method,
    pub alpha: f64,
    pub abs_error: f64,
    pub oscillation_metric: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed, r.cutoff, r.method, r.alpha, r.abs_error, r.oscillation_metric
        );
    }
    out
}
