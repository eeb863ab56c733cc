//! Cepstral smoothing of local power spectra.
//!
//! The log of a measured spectrum is the sum of a slowly varying pulse term
//! and a rapidly varying multi-scatterer interference term. In the cepstrum
//! (inverse transform of the log spectrum) the pulse occupies the lowest
//! quefrencies, so a low-quefrency lifter followed by a forward transform and
//! exponentiation gives back a smooth, interference-free spectrum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft::{real_part_checked, Dft};
use crate::error::{AceError, Result};
use crate::spectral::SpectralMap;

pub const DEFAULT_FLOOR_REL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-9;
const IMAG_TOL: f64 = 1e-9;

/// Real cepstrum of one two-sided power row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cepstrum {
    values: Vec<f64>,
    pub depth_index: Option<usize>,
}

impl Cepstrum {
    pub fn new(values: Vec<f64>, depth_index: Option<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(AceError::invalid("cepstrum must not be empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AceError::invalid("cepstrum values must be finite"));
        }
        Ok(Self { values, depth_index })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window_length(&self) -> usize {
        self.values.len()
    }
}

/// Number of quefrency samples kept on each side of zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifterSpec {
    cutoff: usize,
}

impl LifterSpec {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(AceError::invalid("lifter cutoff must be at least 1"));
        }
        Ok(Self { cutoff })
    }

    /// `max(4, L/16)`, capped at `L/2`.
    pub fn default_for(window_length: usize) -> Self {
        let cutoff = (window_length / 16).max(4).min(window_length / 2).max(1);
        Self { cutoff }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.cutoff > len / 2 {
            return Err(AceError::invalid(format!(
                "lifter cutoff {} exceeds half the window length {len}",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// `floor` bounds the comparison scale from below, for log-domain vectors
/// whose entries may all be close to zero.
fn check_even(values: &[f64], what: &str, floor: f64) -> Result<()> {
    let len = values.len();
    let scale = values.iter().fold(floor, |m, v| m.max(v.abs()));
    for i in 1..len {
        if (values[i] - values[len - i]).abs() > SYMMETRY_TOL * scale {
            return Err(AceError::invalid(format!(
                "{what} is not even: index {i} = {}, index {} = {}",
                values[i],
                len - i,
                values[len - i]
            )));
        }
    }
    Ok(())
}

/// Max-normalized, clamped natural log of a power row.
///
/// Returns the row maximum alongside, so `row ≈ max · exp(log_row)`.
fn normalized_log(row: &[f64], floor_rel: f64) -> Result<(f64, Vec<f64>)> {
    if !(floor_rel.is_finite() && floor_rel > 0.0 && floor_rel < 1.0) {
        return Err(AceError::invalid(format!("floor_rel must lie in (0, 1), got {floor_rel}")));
    }
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(AceError::invalid("power row must be finite and non-negative"));
    }
    let max = row.iter().fold(0.0f64, |m, &p| m.max(p));
    if max <= 0.0 {
        return Err(AceError::invalid("power row is identically zero"));
    }
    check_even(row, "power row", 0.0)?;
    let logs = row.iter().map(|&p| (p / max).max(floor_rel).ln()).collect();
    Ok((max, logs))
}

fn log_to_quefrency(dft: &Dft, log_row: &[f64]) -> Result<Vec<f64>> {
    real_part_checked(&dft.inverse_real(log_row), IMAG_TOL, 1.0).map_err(|(im, re)| {
        AceError::invalid(format!("cepstrum imaginary residue {im:e} vs real norm {re:e}"))
    })
}

fn quefrency_to_log(dft: &Dft, cepstrum: &[f64]) -> Result<Vec<f64>> {
    real_part_checked(&dft.forward_real(cepstrum), IMAG_TOL, 1.0).map_err(|(im, re)| {
        AceError::invalid(format!("log-spectrum imaginary residue {im:e} vs real norm {re:e}"))
    })
}

/// Inverse transform of the clamped log power.
pub fn real_cepstrum(power_row: &[f64], floor_rel: f64) -> Result<Cepstrum> {
    let (max, mut logs) = normalized_log(power_row, floor_rel)?;
    let shift = max.ln();
    for v in &mut logs {
        *v += shift;
    }
    let dft = Dft::new(power_row.len());
    Cepstrum::new(log_to_quefrency(&dft, &logs)?, None)
}

/// Keeps quefrencies `0..=N_c` and `L-N_c..L`, zeroing the rest.
pub fn lifter(c: &Cepstrum, spec: &LifterSpec) -> Result<Cepstrum> {
    let len = c.window_length();
    spec.check(len)?;
    let nc = spec.cutoff;
    let values = c
        .values
        .iter()
        .enumerate()
        .map(|(n, &v)| if n <= nc || n >= len - nc { v } else { 0.0 })
        .collect();
    Ok(Cepstrum {
        values,
        depth_index: c.depth_index,
    })
}

/// Forward transform and exponentiation back to a power row.
pub fn reconstruct_spectrum(c: &Cepstrum) -> Result<Vec<f64>> {
    check_even(&c.values, "cepstrum", 1.0)?;
    let dft = Dft::new(c.window_length());
    Ok(quefrency_to_log(&dft, &c.values)?.into_iter().map(f64::exp).collect())
}

/// Replaces every row of `map` by its cepstrally smoothed version.
///
/// Rows are handled in log space relative to the map's mean log spectrum:
/// the mean is liftered directly, and each row's deviation from the mean has
/// its least-squares `a + b·|f|` component carried through unchanged while
/// the remainder is liftered. A map whose rows share one shape is therefore
/// smoothed by the plain lifter, and depth-to-depth changes of the form
/// `a_k + b_k·|f|` (gain and linear-in-frequency attenuation) pass through
/// exactly.
pub fn smooth_spectral_map(
    map: &SpectralMap,
    spec: &LifterSpec,
    floor_rel: f64,
) -> Result<SpectralMap> {
    let len = map.window_length();
    spec.check(len)?;
    let dft = Dft::new(len);

    let normalized: Vec<(f64, Vec<f64>)> = map
        .rows()
        .enumerate()
        .map(|(k, row)| normalized_log(row, floor_rel).map_err(|e| e.at_window(k)))
        .collect::<Result<_>>()?;

    let windows = normalized.len() as f64;
    let mut mean_log = vec![0.0; len];
    for (_, logs) in &normalized {
        for (m, v) in mean_log.iter_mut().zip(logs) {
            *m += v;
        }
    }
    for m in &mut mean_log {
        *m /= windows;
    }
    let mean_cepstrum = lifter(&Cepstrum::new(log_to_quefrency(&dft, &mean_log)?, None)?, spec)?;

    let trend = TrendFit::new(len);
    let smooth_row = |k: usize, max: f64, logs: &[f64]| -> Result<Vec<f64>> {
        let deviation: Vec<f64> = logs.iter().zip(&mean_log).map(|(v, m)| v - m).collect();
        let linear = trend.fit(&deviation);
        let residual: Vec<f64> = deviation.iter().zip(&linear).map(|(d, t)| d - t).collect();
        let residual_cepstrum =
            lifter(&Cepstrum::new(log_to_quefrency(&dft, &residual)?, Some(k))?, spec)?;
        let combined: Vec<f64> = mean_cepstrum
            .values
            .iter()
            .zip(&residual_cepstrum.values)
            .map(|(a, b)| a + b)
            .collect();
        let smooth_log = quefrency_to_log(&dft, &combined)?;
        Ok(smooth_log
            .iter()
            .zip(&linear)
            .map(|(s, t)| max * (s + t).exp())
            .collect())
    };
    let rows: Vec<Vec<f64>> = normalized
        .par_iter()
        .enumerate()
        .map(|(k, (max, logs))| smooth_row(k, *max, logs).map_err(|e| e.at_window(k)))
        .collect::<Result<_>>()?;

    let mut meta = map.meta().clone();
    meta.lifter_cutoff = Some(spec.cutoff);
    map.with_power(rows.concat(), meta)
}

/// Least-squares projection of an even row onto `{1, |i|}`.
struct TrendFit {
    abs_bin: Vec<f64>,
    mean_x: f64,
    sxx: f64,
}

impl TrendFit {
    fn new(len: usize) -> Self {
        let abs_bin: Vec<f64> = (0..len).map(|i| i.min(len - i) as f64).collect();
        let mean_x = abs_bin.iter().sum::<f64>() / len as f64;
        let sxx = abs_bin.iter().map(|x| (x - mean_x).powi(2)).sum();
        Self {
            abs_bin,
            mean_x,
            sxx,
        }
    }

    fn fit(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len() as f64;
        let mean_y = y.iter().sum::<f64>() / n;
        if self.sxx == 0.0 {
            return vec![mean_y; y.len()];
        }
        let sxy: f64 = self
            .abs_bin
            .iter()
            .zip(y)
            .map(|(x, v)| (x - self.mean_x) * (v - mean_y))
            .sum();
        let slope = sxy / self.sxx;
        self.abs_bin
            .iter()
            .map(|x| mean_y + slope * (x - self.mean_x))
            .collect()
    }
}
