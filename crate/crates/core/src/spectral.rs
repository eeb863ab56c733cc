//! Local power spectra on a depth-window × frequency grid.
//!
//! Each depth window is tapered, transformed and squared per A-line; the
//! periodograms are then averaged across lines. There is no averaging along
//! depth.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::Dft;
use crate::error::{AceError, Result};
use crate::units::{depth_of_sample, RfFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    Hann,
    Rect,
}

impl Taper {
    /// Periodic taper coefficients.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Taper::Rect => vec![1.0; len],
            Taper::Hann => (0..len)
                .map(|n| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()
                })
                .collect(),
        }
    }
}

impl fmt::Display for Taper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Taper::Hann => "hann",
            Taper::Rect => "rect",
        })
    }
}

impl FromStr for Taper {
    type Err = AceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Taper::Hann),
            "rect" => Ok(Taper::Rect),
            other => Err(AceError::invalid(format!("unknown taper '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeta {
    pub window_length: usize,
    pub hop: usize,
    pub taper: Taper,
    pub lines_averaged: usize,
    pub sampling_rate: f64,
    pub sound_speed: f64,
    /// Cutoff of the cepstral lifter, once the map has been smoothed.
    pub lifter_cutoff: Option<usize>,
}

/// Power `S(f, z)` for every depth window.
///
/// Rows hold the full two-sided spectrum of length `window_length` in DFT
/// order, so row `k` bin `i` and bin `L - i` describe `±f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMap {
    depths: Vec<f64>,
    power: Vec<f64>,
    meta: SpectralMeta,
}

impl SpectralMap {
    pub fn new(depths: Vec<f64>, power: Vec<f64>, meta: SpectralMeta) -> Result<Self> {
        let l = meta.window_length;
        if l < 2 || !l.is_power_of_two() {
            return Err(AceError::invalid(format!(
                "window length {l} is not a power of two >= 2"
            )));
        }
        if !(meta.sampling_rate.is_finite() && meta.sampling_rate > 0.0) {
            return Err(AceError::invalid("sampling rate must be positive"));
        }
        if depths.is_empty() {
            return Err(AceError::invalid("spectral map needs at least one depth window"));
        }
        if power.len() != depths.len() * l {
            return Err(AceError::invalid(format!(
                "{} power values for {} windows of length {l}",
                power.len(),
                depths.len()
            )));
        }
        if depths.iter().any(|z| !z.is_finite()) || depths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AceError::invalid("depths must be finite and strictly increasing"));
        }
        if let Some(i) = power.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(AceError::invalid(format!(
                "power at window {}, bin {} is {}",
                i / l,
                i % l,
                power[i]
            )));
        }
        Ok(Self { depths, power, meta })
    }

    /// Builds a map from a model `S(f, z)` evaluated at `|f|` so every row is
    /// even.
    pub fn from_model(
        depths: Vec<f64>,
        meta: SpectralMeta,
        model: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let l = meta.window_length;
        let df = meta.sampling_rate / l as f64;
        let mut power = Vec::with_capacity(depths.len() * l);
        for &z in &depths {
            power.extend((0..l).map(|i| model(i.min(l - i) as f64 * df, z)));
        }
        Self::new(depths, power, meta)
    }

    pub fn meta(&self) -> &SpectralMeta {
        &self.meta
    }

    pub fn window_length(&self) -> usize {
        self.meta.window_length
    }

    pub fn num_windows(&self) -> usize {
        self.depths.len()
    }

    /// Bins `0..=L/2` of the one-sided listing.
    pub fn num_bins(&self) -> usize {
        self.meta.window_length / 2 + 1
    }

    pub fn bin_spacing(&self) -> f64 {
        self.meta.sampling_rate / self.meta.window_length as f64
    }

    pub fn freqs(&self) -> Vec<f64> {
        let df = self.bin_spacing();
        (0..self.num_bins()).map(|i| i as f64 * df).collect()
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    /// Two-sided row of window `k`.
    pub fn row(&self, k: usize) -> &[f64] {
        let l = self.meta.window_length;
        &self.power[k * l..(k + 1) * l]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.power.chunks_exact(self.meta.window_length)
    }

    pub fn one_sided(&self, k: usize) -> &[f64] {
        &self.row(k)[..self.num_bins()]
    }

    pub fn power(&self, window: usize, bin: usize) -> f64 {
        self.row(window)[bin]
    }

    pub(crate) fn with_power(&self, power: Vec<f64>, meta: SpectralMeta) -> Result<Self> {
        Self::new(self.depths.clone(), power, meta)
    }

    /// Windows whose depth lies in `[z_lo, z_hi]`.
    pub fn crop_depths(&self, z_lo: f64, z_hi: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.num_windows())
            .filter(|&k| self.depths[k] >= z_lo && self.depths[k] <= z_hi)
            .collect();
        if keep.is_empty() {
            return Err(AceError::InsufficientData(format!(
                "no depth window inside [{z_lo}, {z_hi}] m"
            )));
        }
        let depths = keep.iter().map(|&k| self.depths[k]).collect();
        let power = keep.iter().flat_map(|&k| self.row(k).iter().copied()).collect();
        Self::new(depths, power, self.meta.clone())
    }

    /// Multiplies every entry by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        self.with_power(self.power.iter().map(|p| p * gain).collect(), self.meta.clone())
    }

    /// Multiplies row `k` by `gains[k]`.
    pub fn scaled_rows(&self, gains: &[f64]) -> Result<Self> {
        if gains.len() != self.num_windows() {
            return Err(AceError::invalid("one gain per depth window is required"));
        }
        let power = self
            .rows()
            .zip(gains)
            .flat_map(|(row, g)| row.iter().map(move |p| p * g))
            .collect();
        self.with_power(power, self.meta.clone())
    }
}

/// Sliding-window periodograms averaged over lines.
///
/// Each periodogram is divided by `Σ w²`, so white noise of unit variance has
/// expected power 1 in every bin for any taper.
pub fn local_power_spectra(
    frame: &RfFrame,
    window_length: usize,
    hop: usize,
    taper: Taper,
) -> Result<SpectralMap> {
    let n = frame.samples_per_line();
    if window_length < 2 || !window_length.is_power_of_two() {
        return Err(AceError::invalid(format!(
            "window length {window_length} must be a power of two >= 2"
        )));
    }
    if window_length > n {
        return Err(AceError::invalid(format!(
            "window length {window_length} exceeds {n} samples per line"
        )));
    }
    if hop == 0 {
        return Err(AceError::invalid("hop must be at least 1"));
    }

    let config = frame.config();
    let taper_w = taper.coefficients(window_length);
    let energy: f64 = taper_w.iter().map(|w| w * w).sum();
    let starts: Vec<usize> = (0..=n - window_length).step_by(hop).collect();
    let depths = starts
        .iter()
        .map(|s| depth_of_sample(s + window_length / 2, config))
        .collect::<Result<Vec<_>>>()?;

    let dft = Dft::new(window_length);
    let lines = frame.num_lines() as f64;
    let rows: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = vec![0.0; window_length];
            let mut buf = vec![Complex64::new(0.0, 0.0); window_length];
            for line in frame.lines() {
                for ((b, x), w) in buf.iter_mut().zip(&line[start..]).zip(&taper_w) {
                    *b = Complex64::new(x * w, 0.0);
                }
                dft.forward(&mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            acc.iter().map(|a| a / (lines * energy)).collect()
        })
        .collect();

    let meta = SpectralMeta {
        window_length,
        hop,
        taper,
        lines_averaged: frame.num_lines(),
        sampling_rate: config.sampling_rate,
        sound_speed: config.sound_speed,
        lifter_cutoff: None,
    };
    SpectralMap::new(depths, rows.concat(), meta)
}

/// Contiguous range of one-sided bins used for ratio fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    pub bin_lo: usize,
    pub bin_hi: usize,
    pub threshold_db: f64,
}

impl BandSelection {
    pub fn num_bins(&self) -> usize {
        self.bin_hi - self.bin_lo + 1
    }
}

/// Bins around the peak of the shallow-window mean spectrum that stay within
/// `threshold_db` of the peak.
pub fn select_band(map: &SpectralMap, threshold_db: f64) -> Result<BandSelection> {
    if !(threshold_db.is_finite() && threshold_db > 0.0) {
        return Err(AceError::invalid("band threshold must be positive"));
    }
    let shallow = (map.num_windows() / 4).max(1);
    let bins = map.num_bins();
    let mut reference = vec![0.0; bins];
    for k in 0..shallow {
        for (r, p) in reference.iter_mut().zip(map.one_sided(k)) {
            *r += p;
        }
    }
    let peak_bin = reference
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > reference[best] { i } else { best });
    let peak = reference[peak_bin];
    if peak <= 0.0 {
        return Err(AceError::DegenerateBand { passing: 0, threshold_db });
    }
    let floor = peak / 10f64.powf(threshold_db / 10.0);
    let mut lo = peak_bin;
    while lo > 0 && reference[lo - 1] >= floor {
        lo -= 1;
    }
    let mut hi = peak_bin;
    while hi + 1 < bins && reference[hi + 1] >= floor {
        hi += 1;
    }
    if hi - lo + 1 < 2 {
        return Err(AceError::DegenerateBand {
            passing: hi - lo + 1,
            threshold_db,
        });
    }
    Ok(BandSelection {
        bin_lo: lo,
        bin_hi: hi,
        threshold_db,
    })
}
