//! Acquisition geometry, attenuation units and the RF frame container.
//!
//! Attenuation is reported externally in dB/(cm·MHz). Everything that
//! exponentiates it works in Np/(m·Hz), so the conversion lives here and
//! nowhere else.

use serde::{Deserialize, Serialize};

use crate::error::{AceError, Result};

/// Decibels per neper, `20 · log10(e)`.
pub const DB_PER_NEPER: f64 = 8.685_889_638_065_037;

const CM_PER_M: f64 = 100.0;
const HZ_PER_MHZ: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttenuationUnit {
    /// dB/(cm·MHz) to Np/(m·Hz).
    DbCmMhzToNpMHz,
    /// Np/(m·Hz) to dB/(cm·MHz).
    NpMHzToDbCmMhz,
}

pub fn convert_attenuation(value: f64, direction: AttenuationUnit) -> Result<f64> {
    if !value.is_finite() {
        return Err(AceError::invalid(format!(
            "attenuation must be finite, got {value}"
        )));
    }
    Ok(match direction {
        AttenuationUnit::DbCmMhzToNpMHz => value / DB_PER_NEPER * CM_PER_M / HZ_PER_MHZ,
        AttenuationUnit::NpMHzToDbCmMhz => value * HZ_PER_MHZ / CM_PER_M * DB_PER_NEPER,
    })
}

/// Frequency-linear attenuation coefficient.
///
/// Stored in dB/(cm·MHz). Negative values are representable because slope
/// estimates on bad fits can produce them; physical media use `value >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Attenuation(f64);

impl Attenuation {
    pub fn from_db_cm_mhz(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(AceError::invalid(format!(
                "attenuation must be finite, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn from_np_m_hz(value: f64) -> Result<Self> {
        convert_attenuation(value, AttenuationUnit::NpMHzToDbCmMhz).map(Self)
    }

    pub fn db_cm_mhz(self) -> f64 {
        self.0
    }

    pub fn np_m_hz(self) -> f64 {
        self.0 / DB_PER_NEPER * CM_PER_M / HZ_PER_MHZ
    }
}

/// Sampling and pulse parameters shared by every A-line of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Hz.
    pub sampling_rate: f64,
    /// m/s.
    pub sound_speed: f64,
    /// Hz.
    pub center_frequency: f64,
    /// Two-sided -6 dB fractional bandwidth of the pulse amplitude spectrum.
    pub fractional_bandwidth: f64,
    pub num_lines: usize,
    pub samples_per_line: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            sampling_rate: 50.0e6,
            sound_speed: 1540.0,
            center_frequency: 5.0e6,
            fractional_bandwidth: 0.6,
            num_lines: 64,
            samples_per_line: 3072,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.sampling_rate,
            self.sound_speed,
            self.center_frequency,
            self.fractional_bandwidth,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(AceError::invalid("scan configuration has non-finite fields"));
        }
        if self.sound_speed <= 0.0 {
            return Err(AceError::invalid("sound speed must be positive"));
        }
        if self.center_frequency <= 0.0 {
            return Err(AceError::invalid("center frequency must be positive"));
        }
        if !(self.fractional_bandwidth > 0.0 && self.fractional_bandwidth < 2.0) {
            return Err(AceError::invalid("fractional bandwidth must lie in (0, 2)"));
        }
        if self.num_lines < 1 {
            return Err(AceError::invalid("at least one line is required"));
        }
        if self.samples_per_line < 16 {
            return Err(AceError::invalid("at least 16 samples per line are required"));
        }
        if self.sampling_rate <= 2.0 * self.upper_band_edge() {
            return Err(AceError::invalid(format!(
                "sampling rate {} Hz does not exceed twice the pulse band edge {} Hz",
                self.sampling_rate,
                self.upper_band_edge()
            )));
        }
        Ok(())
    }

    /// `f0 · (1 + B)`, the band edge used for the Nyquist check.
    pub fn upper_band_edge(&self) -> f64 {
        self.center_frequency * (1.0 + self.fractional_bandwidth)
    }

    /// Depth step between consecutive samples (round trip).
    pub fn depth_per_sample(&self) -> f64 {
        self.sound_speed / (2.0 * self.sampling_rate)
    }
}

/// Depth of a sample under the round-trip convention `z = c·t/2`.
pub fn depth_of_sample(sample_index: usize, config: &ScanConfig) -> Result<f64> {
    if sample_index >= config.samples_per_line {
        return Err(AceError::invalid(format!(
            "sample index {sample_index} outside line of {} samples",
            config.samples_per_line
        )));
    }
    Ok(config.sound_speed * (sample_index as f64 / config.sampling_rate) / 2.0)
}

/// Where a frame came from. Synthetic frames carry their ground truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub true_alpha_db_cm_mhz: Option<f64>,
    /// Scattering region `[z_min, z_max]` in meters, when known.
    pub depth_range: Option<(f64, f64)>,
    pub tgc_applied: bool,
    pub noise_snr_db: Option<f64>,
}

/// Multi-line RF samples stored line-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrame {
    samples: Vec<f64>,
    config: ScanConfig,
    pub provenance: Provenance,
}

impl RfFrame {
    pub fn new(samples: Vec<f64>, config: ScanConfig, provenance: Provenance) -> Result<Self> {
        config.validate()?;
        let expected = config.num_lines * config.samples_per_line;
        if samples.len() != expected {
            return Err(AceError::invalid(format!(
                "frame has {} samples, configuration implies {expected}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(AceError::invalid(format!("non-finite sample at flat index {i}")));
        }
        Ok(Self {
            samples,
            config,
            provenance,
        })
    }

    pub fn config(&self) -> &ScanConfig {
        &self.config
    }

    pub fn num_lines(&self) -> usize {
        self.config.num_lines
    }

    pub fn samples_per_line(&self) -> usize {
        self.config.samples_per_line
    }

    pub fn line(&self, index: usize) -> &[f64] {
        let n = self.config.samples_per_line;
        &self.samples[index * n..(index + 1) * n]
    }

    pub fn lines(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.config.samples_per_line)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        if !gain.is_finite() {
            return Err(AceError::invalid("gain must be finite"));
        }
        let samples = self.samples.iter().map(|v| v * gain).collect();
        Self::new(samples, self.config, self.provenance.clone())
    }

    pub fn rms(&self) -> f64 {
        let n = self.samples.len() as f64;
        (self.samples.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
    }
}
