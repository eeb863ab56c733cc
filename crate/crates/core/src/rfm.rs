//! Reference frequency method.
//!
//! At a fixed depth the ratio of power at two neighbouring frequencies cancels
//! every frequency-independent factor (gain, TGC) and, for slowly varying
//! system and scattering spectra, leaves `exp(-4·α·Δf·z)` times a depth-free
//! constant. The log ratio is therefore a straight line in depth whose slope
//! gives α.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AceError, AtStage, PipelineError, Result, Stage};
use crate::homomorphic::{smooth_spectral_map, LifterSpec, DEFAULT_FLOOR_REL};
use crate::spectral::{local_power_spectra, select_band, BandSelection, SpectralMap, Taper};
use crate::units::{Attenuation, RfFrame};

/// Log power ratios `ln S(f_i, z) / S(f_{i-step}, z)` over depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurves {
    /// `(f_i, f_{i-step})` in Hz.
    pub pairs: Vec<(f64, f64)>,
    /// One-sided bin indices matching `pairs`.
    pub bins: Vec<(usize, usize)>,
    pub delta_f: f64,
    pub depths: Vec<f64>,
    /// `curves[p][k]` for pair `p` at depth window `k`.
    pub curves: Vec<Vec<f64>>,
}

impl RatioCurves {
    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }
}

pub fn ratio_curves(map: &SpectralMap, step: usize, band: &BandSelection) -> Result<RatioCurves> {
    if step < 1 {
        return Err(AceError::invalid("ratio step must be at least 1"));
    }
    if band.bin_lo > band.bin_hi || band.bin_hi >= map.num_bins() {
        return Err(AceError::invalid(format!(
            "band {}..={} outside 0..{}",
            band.bin_lo,
            band.bin_hi,
            map.num_bins()
        )));
    }
    if band.num_bins() <= step {
        return Err(AceError::invalid(format!(
            "step {step} leaves no pair inside a {}-bin band",
            band.num_bins()
        )));
    }
    let df = map.bin_spacing();
    let bins: Vec<(usize, usize)> = (band.bin_lo + step..=band.bin_hi).map(|i| (i, i - step)).collect();
    let mut curves = Vec::with_capacity(bins.len());
    for &(hi, lo) in &bins {
        let mut curve = Vec::with_capacity(map.num_windows());
        for k in 0..map.num_windows() {
            let (num, den) = (map.power(k, hi), map.power(k, lo));
            for (bin, value) in [(hi, num), (lo, den)] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(AceError::NonPositivePower { bin, window: k, value });
                }
            }
            curve.push((num / den).ln());
        }
        curves.push(curve);
    }
    Ok(RatioCurves {
        pairs: bins.iter().map(|&(hi, lo)| (hi as f64 * df, lo as f64 * df)).collect(),
        bins,
        delta_f: step as f64 * df,
        depths: map.depths().to_vec(),
        curves,
    })
}

/// Ordinary least-squares line of a decay curve over depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Per metre.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

impl FitResult {
    pub fn predict(&self, z: f64) -> f64 {
        self.intercept + self.slope * z
    }
}

/// Fits `values` against `depths` using only points with depth in
/// `[fit_range.0, fit_range.1]`.
pub fn fit_decay(depths: &[f64], values: &[f64], fit_range: (f64, f64)) -> Result<FitResult> {
    if depths.len() != values.len() {
        return Err(AceError::invalid("depths and values differ in length"));
    }
    let (lo, hi) = fit_range;
    let points: Vec<(f64, f64)> = depths
        .iter()
        .zip(values)
        .filter(|(z, _)| **z >= lo && **z <= hi)
        .map(|(z, v)| (*z, *v))
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(AceError::InsufficientData(format!(
            "{n} depth point(s) in [{lo}, {hi}] m, at least 3 needed"
        )));
    }
    if points.iter().any(|(z, v)| !(z.is_finite() && v.is_finite())) {
        return Err(AceError::invalid("decay curve contains non-finite values"));
    }
    let nf = n as f64;
    let mean_z = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|(z, _)| (z - mean_z).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(AceError::invalid("decay fit needs more than one distinct depth"));
    }
    let sxy: f64 = points.iter().map(|(z, y)| (z - mean_z) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_z;
    let ss_res: f64 = points
        .iter()
        .map(|(z, y)| (y - intercept - slope * z).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_res == 0.0 || ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        residual_rms: (ss_res / nf).sqrt(),
        n_points: n,
    })
}

/// `α = -slope / (4·Δf)`; negative values are returned unchanged.
pub fn alpha_from_slope(slope: f64, delta_f: f64) -> Result<Attenuation> {
    if !(delta_f.is_finite() && delta_f > 0.0) {
        return Err(AceError::invalid(format!("frequency step must be positive, got {delta_f}")));
    }
    Attenuation::from_np_m_hz(-slope / (4.0 * delta_f))
}

/// Inverse of [`alpha_from_slope`].
pub fn slope_from_alpha(alpha: Attenuation, delta_f: f64) -> f64 {
    -4.0 * alpha.np_m_hz() * delta_f
}

/// Mean residual RMS over pairs.
pub fn oscillation_metric(curves: &RatioCurves, fits: &[FitResult]) -> Result<f64> {
    if fits.is_empty() || curves.num_pairs() == 0 {
        return Err(AceError::invalid("oscillation metric needs at least one pair"));
    }
    if fits.len() != curves.num_pairs() {
        return Err(AceError::invalid(format!(
            "{} fits for {} ratio curves",
            fits.len(),
            curves.num_pairs()
        )));
    }
    Ok(fits.iter().map(|f| f.residual_rms).sum::<f64>() / fits.len() as f64)
}

/// Middle order statistic; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(AceError::invalid("median of an empty set"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(AceError::invalid("median of a set containing NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Improved,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::Improved => "improved",
        })
    }
}

impl FromStr for Method {
    type Err = AceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "improved" => Ok(Method::Improved),
            other => Err(AceError::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfmOptions {
    pub window_length: usize,
    pub hop: usize,
    pub taper: Taper,
    pub step: usize,
    pub band_threshold_db: f64,
    /// Depth interval in metres; `None` picks a default from the frame.
    pub fit_range: Option<(f64, f64)>,
    pub method: Method,
    /// `None` uses [`LifterSpec::default_for`] the window length.
    pub lifter: Option<LifterSpec>,
    pub floor_rel: f64,
}

impl Default for RfmOptions {
    fn default() -> Self {
        Self {
            window_length: 512,
            hop: 128,
            taper: Taper::Hann,
            step: 1,
            band_threshold_db: 15.0,
            fit_range: None,
            method: Method::Improved,
            lifter: None,
            floor_rel: DEFAULT_FLOOR_REL,
        }
    }
}

impl RfmOptions {
    pub fn with_method(&self, method: Method) -> Self {
        Self {
            method,
            ..self.clone()
        }
    }

    pub fn lifter_spec(&self) -> LifterSpec {
        self.lifter.unwrap_or_else(|| LifterSpec::default_for(self.window_length))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub f_hz: f64,
    pub f_ref_hz: f64,
    pub alpha_db_cm_mhz: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceResult {
    pub method: Method,
    pub per_frequency: Vec<FrequencyEstimate>,
    pub aggregate_alpha_db_cm_mhz: f64,
    pub band: BandSelection,
    pub mean_residual_rms: f64,
    pub oscillation_metric: f64,
    pub fit_range: (f64, f64),
    pub lifter_cutoff: Option<usize>,
}

/// Estimate together with the curves it was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct RfmRun {
    pub result: AceResult,
    pub curves: RatioCurves,
}

/// Default depth interval for a frame.
///
/// With a known scattering region the interval is that region inset by half
/// a window, so every fitted window lies wholly inside tissue. Otherwise the
/// first and last depth windows are excluded.
pub fn default_fit_range(frame: &RfFrame, opts: &RfmOptions, map: &SpectralMap) -> Result<(f64, f64)> {
    if let Some((z_min, z_max)) = frame.provenance.depth_range {
        let half = opts.window_length as f64 / 2.0 * frame.config().depth_per_sample();
        return Ok((z_min + half, z_max - half));
    }
    interior_range(map)
}

fn interior_range(map: &SpectralMap) -> Result<(f64, f64)> {
    let depths = map.depths();
    if depths.len() < 3 {
        return Err(AceError::InsufficientData(format!(
            "{} depth window(s); at least 3 are needed to drop the edge windows",
            depths.len()
        )));
    }
    Ok((depths[1], depths[depths.len() - 2]))
}

/// Full estimator on a frame.
pub fn run_rfm(frame: &RfFrame, opts: &RfmOptions) -> std::result::Result<RfmRun, PipelineError> {
    let map = local_power_spectra(frame, opts.window_length, opts.hop, opts.taper).at(Stage::Spectra)?;
    let fit_range = match opts.fit_range {
        Some(range) => range,
        None => default_fit_range(frame, opts, &map).at(Stage::FitRange)?,
    };
    run_rfm_on_map(&map, &RfmOptions { fit_range: Some(fit_range), ..opts.clone() })
}

/// Estimator from an existing spectral map; window, hop and taper options
/// are ignored.
pub fn run_rfm_on_map(map: &SpectralMap, opts: &RfmOptions) -> std::result::Result<RfmRun, PipelineError> {
    let fit_range = match opts.fit_range {
        Some(range) => range,
        None => interior_range(map).at(Stage::FitRange)?,
    };
    let (z_lo, z_hi) = fit_range;
    if !(z_lo.is_finite() && z_hi.is_finite() && z_lo < z_hi) {
        return Err(AceError::invalid(format!("fit range [{z_lo}, {z_hi}] m is empty"))).at(Stage::FitRange);
    }
    let cropped = map.crop_depths(z_lo, z_hi).at(Stage::FitRange)?;

    let (analysed, lifter_cutoff) = match opts.method {
        Method::Baseline => (cropped, None),
        Method::Improved => {
            let spec = opts.lifter_spec();
            let smoothed = smooth_spectral_map(&cropped, &spec, opts.floor_rel).at(Stage::Smoothing)?;
            (smoothed, Some(spec.cutoff()))
        }
    };

    let band = select_band(&analysed, opts.band_threshold_db).at(Stage::Band)?;
    let curves = ratio_curves(&analysed, opts.step, &band).at(Stage::Ratios)?;
    let fits: Vec<FitResult> = curves
        .curves
        .par_iter()
        .map(|c| fit_decay(&curves.depths, c, fit_range))
        .collect::<Result<_>>()
        .at(Stage::Fit)?;

    let per_frequency: Vec<FrequencyEstimate> = curves
        .pairs
        .iter()
        .zip(&fits)
        .map(|(&(f_hz, f_ref_hz), fit)| {
            Ok(FrequencyEstimate {
                f_hz,
                f_ref_hz,
                alpha_db_cm_mhz: alpha_from_slope(fit.slope, curves.delta_f)?.db_cm_mhz(),
                fit: *fit,
            })
        })
        .collect::<Result<_>>()
        .at(Stage::Conversion)?;
    let alphas: Vec<f64> = per_frequency.iter().map(|e| e.alpha_db_cm_mhz).collect();
    let aggregate = median(&alphas).at(Stage::Conversion)?;
    let metric = oscillation_metric(&curves, &fits).at(Stage::Fit)?;

    Ok(RfmRun {
        result: AceResult {
            method: opts.method,
            per_frequency,
            aggregate_alpha_db_cm_mhz: aggregate,
            band,
            mean_residual_rms: metric,
            oscillation_metric: metric,
            fit_range,
            lifter_cutoff,
        },
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralMeta;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const ALPHA: f64 = 0.68;

    fn meta(len: usize, fs: f64) -> SpectralMeta {
        SpectralMeta {
            window_length: len,
            hop: len / 4,
            taper: Taper::Hann,
            lines_averaged: 1,
            sampling_rate: fs,
            sound_speed: 1540.0,
            lifter_cutoff: None,
        }
    }

    fn depths(n: usize) -> Vec<f64> {
        (0..n).map(|k| 0.005 + 0.04 * k as f64 / (n - 1) as f64).collect()
    }

    /// `G(f)·TGC(z)·BSC·exp(-4αfz)` with a smooth log-Gaussian `G`.
    fn model_map(len: usize, fs: f64, tgc: impl Fn(f64) -> f64) -> SpectralMap {
        let a = Attenuation::from_db_cm_mhz(ALPHA).unwrap().np_m_hz();
        SpectralMap::from_model(depths(21), meta(len, fs), |f, z| {
            let g = (-(f - 5.0e6).powi(2) / (2.0 * 3.0e6f64.powi(2))).exp();
            g * tgc(z) * 0.3 * (-4.0 * a * f * z).exp()
        })
        .unwrap()
    }

    fn line(intercept: f64, slope: f64, z: &[f64]) -> Vec<f64> {
        z.iter().map(|z| intercept + slope * z).collect()
    }

    #[test]
    fn flat_map_gives_zero_curves() {
        let map = SpectralMap::from_model(depths(5), meta(64, 50.0e6), |_, _| 2.0).unwrap();
        let band = BandSelection { bin_lo: 3, bin_hi: 9, threshold_db: 15.0 };
        let rc = ratio_curves(&map, 2, &band).unwrap();
        assert_eq!(rc.num_pairs(), 5);
        assert_eq!(rc.bins[0], (5, 3));
        assert!((rc.delta_f - 2.0 * 50.0e6 / 64.0).abs() < 1e-6);
        assert!(rc.curves.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn curves_follow_closed_form() {
        let a = Attenuation::from_db_cm_mhz(ALPHA).unwrap().np_m_hz();
        let map = SpectralMap::from_model(depths(9), meta(128, 50.0e6), |f, z| (-4.0 * a * f * z).exp()).unwrap();
        let band = BandSelection { bin_lo: 4, bin_hi: 30, threshold_db: 15.0 };
        let rc = ratio_curves(&map, 1, &band).unwrap();
        for curve in &rc.curves {
            for (v, z) in curve.iter().zip(&rc.depths) {
                let expected = -4.0 * a * rc.delta_f * z;
                assert!(((v - expected) / expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn per_depth_scaling_cancels() {
        let map = model_map(128, 50.0e6, |_| 1.0);
        let band = BandSelection { bin_lo: 6, bin_hi: 20, threshold_db: 15.0 };
        let base = ratio_curves(&map, 1, &band).unwrap();
        let pow2: Vec<f64> = (0..map.num_windows()).map(|k| 2f64.powi(k as i32 - 7)).collect();
        assert_eq!(ratio_curves(&map.scaled_rows(&pow2).unwrap(), 1, &band).unwrap(), base);
        let arbitrary: Vec<f64> = (0..map.num_windows()).map(|k| 0.37 + 1.9 * k as f64).collect();
        let other = ratio_curves(&map.scaled_rows(&arbitrary).unwrap(), 1, &band).unwrap();
        for (a, b) in base.curves.iter().flatten().zip(other.curves.iter().flatten()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_power_names_bin_and_window() {
        let map = SpectralMap::from_model(depths(4), meta(64, 50.0e6), |f, z| {
            if (f - 7.0 * 50.0e6 / 64.0).abs() < 1.0 && z > 0.02 { 0.0 } else { 1.0 }
        })
        .unwrap();
        let band = BandSelection { bin_lo: 3, bin_hi: 9, threshold_db: 15.0 };
        let err = ratio_curves(&map, 1, &band).unwrap_err();
        assert_eq!(err, AceError::NonPositivePower { bin: 7, window: 2, value: 0.0 });
    }

    #[test]
    fn ratio_preconditions() {
        let map = SpectralMap::from_model(depths(4), meta(64, 50.0e6), |_, _| 1.0).unwrap();
        let band = BandSelection { bin_lo: 3, bin_hi: 5, threshold_db: 15.0 };
        assert!(ratio_curves(&map, 0, &band).is_err());
        assert!(ratio_curves(&map, 3, &band).is_err());
        let wide = BandSelection { bin_lo: 3, bin_hi: 40, threshold_db: 15.0 };
        assert!(ratio_curves(&map, 1, &wide).is_err());
    }

    #[test]
    fn exact_line_fit() {
        let z = depths(11);
        let fit = fit_decay(&z, &line(2.0, -3.0, &z), (0.0, 1.0)).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit.residual_rms < 1e-14);
        assert_eq!(fit.n_points, 11);
        let shifted = fit_decay(&z, &line(2.5, -3.0, &z), (0.0, 1.0)).unwrap();
        assert!((shifted.slope - fit.slope).abs() < 1e-12);
        assert!((shifted.intercept - fit.intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_range_filters_points() {
        let z = depths(11);
        let mut y = line(1.0, -2.0, &z);
        y[0] = 100.0;
        y[10] = -100.0;
        let fit = fit_decay(&z, &y, (z[1], z[9])).unwrap();
        assert_eq!(fit.n_points, 9);
        assert!((fit.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let z = depths(11);
        let y = line(1.0, -2.0, &z);
        assert!(matches!(fit_decay(&z, &y, (z[3], z[4])), Err(AceError::InsufficientData(_))));
        assert!(matches!(
            fit_decay(&[0.01; 4], &[1.0, 2.0, 3.0, 4.0], (0.0, 1.0)),
            Err(AceError::InvalidArgument(_))
        ));
        assert!(fit_decay(&z, &y[..5], (0.0, 1.0)).is_err());
    }

    /// OLS slope spread for 40 evenly spaced points on [0.01, 0.04] with
    /// σ = 0.01: Sxx = n(n²-1)h²/12 with h = 0.03/39, so
    /// sd = σ/sqrt(Sxx) ≈ 0.178 and the 99% half width is 2.576·sd ≈ 0.459.
    #[test]
    fn noisy_fit_matches_ols_variance() {
        let n = 40;
        let h = 0.03 / 39.0;
        let z: Vec<f64> = (0..n).map(|k| 0.01 + h * k as f64).collect();
        let sxx = n as f64 * ((n * n - 1) as f64) * h * h / 12.0;
        let sd = 0.01 / sxx.sqrt();
        assert!((sd - 0.178).abs() < 0.001);
        assert!(2.576 * sd < 0.5);

        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 4000;
        let mut sum_sq = 0.0;
        for t in 0..trials {
            let y: Vec<f64> = z.iter().map(|z| 1.0 - 2.0 * z + noise.sample(&mut rng)).collect();
            let fit = fit_decay(&z, &y, (0.01, 0.04)).unwrap();
            if t == 0 {
                assert!((fit.slope + 2.0).abs() < 0.5);
            }
            sum_sq += (fit.slope + 2.0).powi(2);
        }
        let empirical = (sum_sq / trials as f64).sqrt();
        assert!((empirical / sd - 1.0).abs() < 0.05, "empirical sd {empirical}, analytic {sd}");
    }

    #[test]
    fn slope_conversion() {
        assert_eq!(alpha_from_slope(0.0, 1.0e5).unwrap().db_cm_mhz(), 0.0);
        let a = alpha_from_slope(-3.1315, 1.0e5).unwrap().db_cm_mhz();
        assert!((a / 0.68 - 1.0).abs() < 1e-4, "{a}");
        let exact = 4.0 * 0.68 / 8.685_889_638_065_037 * 100.0 / 1.0e6 * 1.0e5;
        assert!((alpha_from_slope(-exact, 1.0e5).unwrap().db_cm_mhz() / 0.68 - 1.0).abs() < 1e-12);
        for alpha in [0.1, 0.68, 1.804] {
            let att = Attenuation::from_db_cm_mhz(alpha).unwrap();
            let back = alpha_from_slope(slope_from_alpha(att, 97_656.25), 97_656.25).unwrap();
            assert!((back.db_cm_mhz() / alpha - 1.0).abs() < 1e-12);
        }
        assert!(alpha_from_slope(1.0, 1.0e5).unwrap().db_cm_mhz() < 0.0);
        assert!(alpha_from_slope(-1.0, 0.0).is_err());
        assert!(alpha_from_slope(-1.0, -5.0).is_err());
    }

    #[test]
    fn median_order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(median(&[-1.0]).unwrap(), -1.0);
        assert!(median(&[]).is_err());
        assert!(median(&[1.0, f64::NAN]).is_err());
    }

    fn curves_of(values: Vec<Vec<f64>>, z: &[f64]) -> RatioCurves {
        RatioCurves {
            pairs: (0..values.len()).map(|p| (p as f64 + 1.0, p as f64)).collect(),
            bins: (0..values.len()).map(|p| (p + 1, p)).collect(),
            delta_f: 1.0,
            depths: z.to_vec(),
            curves: values,
        }
    }

    #[test]
    fn oscillation_metric_counts_ripple() {
        let z = depths(12);
        let mut values: Vec<Vec<f64>> = (0..4).map(|p| line(p as f64, -1.0 - p as f64, &z)).collect();
        let fit_all = |c: &RatioCurves| -> Vec<FitResult> {
            c.curves.iter().map(|v| fit_decay(&c.depths, v, (0.0, 1.0)).unwrap()).collect()
        };
        let clean = curves_of(values.clone(), &z);
        assert!(oscillation_metric(&clean, &fit_all(&clean)).unwrap() < 1e-14);

        // The +,-,-,+ pattern is orthogonal to both 1 and z on an even grid,
        // so the fit is untouched and the residual RMS is exactly r.
        let r = 0.05;
        for (k, v) in values[2].iter_mut().enumerate() {
            *v += if matches!(k % 4, 0 | 3) { r } else { -r };
        }
        let rippled = curves_of(values, &z);
        let metric = oscillation_metric(&rippled, &fit_all(&rippled)).unwrap();
        assert!((metric - r / 4.0).abs() < 1e-12, "{metric}");

        assert!(oscillation_metric(&rippled, &[]).is_err());
        assert!(oscillation_metric(&rippled, &fit_all(&rippled)[..2]).is_err());
    }

    #[test]
    fn exact_model_recovered_by_both_methods() {
        // Nyquist 10 MHz keeps the whole model within the log floor.
        let map = model_map(512, 20.0e6, |z| 1.0 + 40.0 * z + (900.0 * z).sin().abs());
        for method in [Method::Baseline, Method::Improved] {
            let opts = RfmOptions { method, ..RfmOptions::default() };
            let run = run_rfm_on_map(&map, &opts).unwrap();
            let a = run.result.aggregate_alpha_db_cm_mhz;
            assert!((a / ALPHA - 1.0).abs() < 1e-6, "{method}: {a}");
            assert_eq!(run.result.fit_range, (map.depths()[1], map.depths()[19]));
            assert_eq!(run.curves.depths.len(), 19);
            for e in &run.result.per_frequency {
                assert!((e.alpha_db_cm_mhz / ALPHA - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn aggregate_is_median_and_metric_is_mean_rms() {
        let map = model_map(256, 20.0e6, |_| 1.0);
        let run = run_rfm_on_map(&map, &RfmOptions { method: Method::Baseline, ..RfmOptions::default() }).unwrap();
        let r = &run.result;
        let alphas: Vec<f64> = r.per_frequency.iter().map(|e| e.alpha_db_cm_mhz).collect();
        assert_eq!(r.aggregate_alpha_db_cm_mhz, median(&alphas).unwrap());
        let mean = r.per_frequency.iter().map(|e| e.fit.residual_rms).sum::<f64>() / alphas.len() as f64;
        assert_eq!(r.mean_residual_rms, mean);
        assert_eq!(r.per_frequency.len(), r.band.num_bins() - 1);
        assert_eq!(r.lifter_cutoff, None);
    }

    #[test]
    fn pipeline_errors_name_their_stage() {
        let map = model_map(256, 20.0e6, |_| 1.0);
        let opts = RfmOptions { fit_range: Some((0.5, 0.6)), ..RfmOptions::default() };
        assert_eq!(run_rfm_on_map(&map, &opts).unwrap_err().stage, Stage::FitRange);
        let opts = RfmOptions { band_threshold_db: 1e-6, ..RfmOptions::default() };
        let err = run_rfm_on_map(&map, &opts).unwrap_err();
        assert_eq!(err.stage, Stage::Band);
        assert!(matches!(err.source, AceError::DegenerateBand { .. }));
        let opts = RfmOptions { fit_range: Some((0.0, depths(21)[1])), ..RfmOptions::default() };
        let err = run_rfm_on_map(&map, &opts).unwrap_err();
        assert!(matches!(err.source, AceError::InsufficientData(_)), "{err}");
        let opts = RfmOptions { lifter: Some(LifterSpec::new(200).unwrap()), ..RfmOptions::default() };
        assert_eq!(run_rfm_on_map(&map, &opts).unwrap_err().stage, Stage::Smoothing);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Baseline, Method::Improved] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("other".parse::<Method>().is_err());
    }

    proptest! {
        #[test]
        fn slope_alpha_round_trip(alpha in -5.0f64..5.0, df in 1.0e3f64..1.0e6) {
            let att = Attenuation::from_db_cm_mhz(alpha).unwrap();
            let back = alpha_from_slope(slope_from_alpha(att, df), df).unwrap().db_cm_mhz();
            prop_assert!((back - alpha).abs() <= 1e-12 * alpha.abs().max(1e-300));
        }

        #[test]
        fn fit_recovers_any_line(a in -10.0f64..10.0, b in -500.0f64..500.0, n in 3usize..60) {
            let z = depths(n);
            let fit = fit_decay(&z, &line(a, b, &z), (0.0, 1.0)).unwrap();
            prop_assert!((fit.slope - b).abs() <= 1e-8 * b.abs().max(1.0));
            prop_assert!((fit.r_squared - 1.0).abs() < 1e-9 || fit.residual_rms < 1e-12);
        }

        #[test]
        fn median_is_an_order_statistic(v in prop::collection::vec(-1.0e3f64..1.0e3, 1..40)) {
            let m = median(&v).unwrap();
            let below = v.iter().filter(|x| **x < m).count();
            let above = v.iter().filter(|x| **x > m).count();
            prop_assert!(below <= v.len() / 2 && above <= v.len() / 2);
        }
    }
}
