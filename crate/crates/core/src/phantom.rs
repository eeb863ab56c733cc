//! Synthetic RF phantoms.
//!
//! Each A-line is an independent 1-D random medium: Poisson-distributed point
//! scatterers with Gaussian strengths. Echoes are built in the frequency
//! domain so that every scatterer carries its exact round-trip delay and its
//! exact frequency-linear attenuation, then transformed to real samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::Dft;
use crate::error::{AceError, Result};
use crate::units::{depth_of_sample, Attenuation, Provenance, RfFrame, ScanConfig};

/// Largest expected scatterer count per line accepted by the generator.
pub const MAX_EXPECTED_SCATTERERS: f64 = 1.0e7;

/// Streams at and above this index are reserved for additive noise.
const NOISE_STREAM_BASE: u64 = 1 << 63;

/// Re-evaluate the phase/decay exponential directly every this many bins.
const RECURRENCE_ANCHOR: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// `[z_min, z_max]` in meters.
    pub depth_range: (f64, f64),
    /// Expected scatterers per meter of depth, per line.
    pub scatterer_density: f64,
    /// Standard deviation of the zero-mean Gaussian scatterer strength.
    pub amplitude_std: f64,
    pub alpha: Attenuation,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            depth_range: (0.005, 0.045),
            scatterer_density: 3000.0,
            amplitude_std: 1.0,
            alpha: Attenuation::from_db_cm_mhz(0.68).expect("finite"),
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let (z_min, z_max) = self.depth_range;
        if !(z_min.is_finite() && z_max.is_finite() && z_min >= 0.0 && z_max > z_min) {
            return Err(AceError::invalid(format!(
                "depth range must satisfy 0 <= z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        if !(self.scatterer_density.is_finite() && self.scatterer_density > 0.0) {
            return Err(AceError::invalid("scatterer density must be positive"));
        }
        if !(self.amplitude_std.is_finite() && self.amplitude_std > 0.0) {
            return Err(AceError::invalid("amplitude standard deviation must be positive"));
        }
        if self.alpha.db_cm_mhz() < 0.0 {
            return Err(AceError::invalid("phantom attenuation must be non-negative"));
        }
        Ok(())
    }

    pub fn expected_count(&self) -> f64 {
        self.scatterer_density * (self.depth_range.1 - self.depth_range.0)
    }
}

/// Depth-dependent receive gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TgcProfile {
    /// Amplitude gain `exp(rate · z)`, rate in Np/m.
    Exponential { rate_per_m: f64 },
    /// One positive multiplier per sample.
    Samples(Vec<f64>),
}

impl TgcProfile {
    pub fn gains(&self, config: &ScanConfig) -> Result<Vec<f64>> {
        match self {
            TgcProfile::Exponential { rate_per_m } => {
                if !rate_per_m.is_finite() {
                    return Err(AceError::invalid("TGC rate must be finite"));
                }
                (0..config.samples_per_line)
                    .map(|i| depth_of_sample(i, config).map(|z| (rate_per_m * z).exp()))
                    .collect()
            }
            TgcProfile::Samples(g) => Ok(g.clone()),
        }
    }
}

/// Extra spectral coloring multiplied onto the pulse amplitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransducerResponse {
    Gaussian {
        center_frequency: f64,
        fractional_bandwidth: f64,
    },
}

impl TransducerResponse {
    fn weight(&self, f: f64) -> f64 {
        match *self {
            TransducerResponse::Gaussian {
                center_frequency,
                fractional_bandwidth,
            } => gaussian_amplitude(f, center_frequency, fractional_bandwidth),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemEffects {
    pub tgc: Option<TgcProfile>,
    pub transducer_response: Option<TransducerResponse>,
    /// dB relative to the noiseless frame RMS.
    pub noise_snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub depth: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScattererField {
    pub lines: Vec<Vec<Scatterer>>,
}

impl ScattererField {
    pub fn empty(num_lines: usize) -> Self {
        Self {
            lines: vec![Vec::new(); num_lines],
        }
    }

    /// Line-wise concatenation of two fields.
    pub fn union(&self, other: &ScattererField) -> Result<Self> {
        if self.lines.len() != other.lines.len() {
            return Err(AceError::invalid("fields have different line counts"));
        }
        let lines = self
            .lines
            .iter()
            .zip(&other.lines)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        Ok(Self { lines })
    }
}

/// Standard deviation of the Gaussian amplitude spectrum whose two-sided
/// -6 dB width is `fractional_bandwidth · center_frequency`.
pub fn pulse_sigma_hz(center_frequency: f64, fractional_bandwidth: f64) -> f64 {
    0.5 * fractional_bandwidth * center_frequency / (2.0 * std::f64::consts::LN_2).sqrt()
}

fn gaussian_amplitude(f: f64, center: f64, fractional_bandwidth: f64) -> f64 {
    let sigma = pulse_sigma_hz(center, fractional_bandwidth);
    let d = f.abs() - center;
    (-d * d / (2.0 * sigma * sigma)).exp()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scatterers of a single line. Depends only on `(spec.seed, line_index)`.
pub fn generate_line(spec: &PhantomSpec, line_index: usize) -> Result<Vec<Scatterer>> {
    spec.validate()?;
    let mean = spec.expected_count();
    if mean > MAX_EXPECTED_SCATTERERS {
        return Err(AceError::ResourceLimit(format!(
            "expected {mean} scatterers per line exceeds {MAX_EXPECTED_SCATTERERS}"
        )));
    }
    let mut rng = stream_rng(spec.seed, line_index as u64);
    let count = Poisson::new(mean)
        .map_err(|e| AceError::invalid(format!("poisson mean {mean}: {e}")))?
        .sample(&mut rng) as usize;
    let strength = Normal::new(0.0, spec.amplitude_std)
        .map_err(|e| AceError::invalid(format!("amplitude distribution: {e}")))?;
    let (z_min, z_max) = spec.depth_range;
    Ok((0..count)
        .map(|_| {
            let depth = rng.random_range(z_min..z_max);
            let amplitude = strength.sample(&mut rng);
            Scatterer { depth, amplitude }
        })
        .collect())
}

pub fn generate_scatterers(spec: &PhantomSpec, config: &ScanConfig) -> Result<ScattererField> {
    config.validate()?;
    let lines = (0..config.num_lines)
        .into_par_iter()
        .map(|l| generate_line(spec, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScattererField { lines })
}

/// Frequency-domain synthesis of every line, followed by TGC and noise.
pub fn synthesize_rf(
    field: &ScattererField,
    spec: &PhantomSpec,
    effects: &SystemEffects,
    config: &ScanConfig,
) -> Result<RfFrame> {
    config.validate()?;
    spec.validate()?;
    let nyquist = config.sampling_rate / 2.0;
    if config.upper_band_edge() >= nyquist {
        return Err(AceError::invalid("pulse band exceeds the Nyquist frequency"));
    }
    if field.lines.len() != config.num_lines {
        return Err(AceError::invalid(format!(
            "field has {} lines, configuration expects {}",
            field.lines.len(),
            config.num_lines
        )));
    }
    for (l, line) in field.lines.iter().enumerate() {
        if let Some(s) = line
            .iter()
            .find(|s| !(s.depth.is_finite() && s.amplitude.is_finite() && s.depth >= 0.0))
        {
            return Err(AceError::invalid(format!("line {l}: invalid scatterer {s:?}")));
        }
    }

    let synth = LineSynthesizer::new(field, spec, effects, config);
    let lines: Vec<Vec<f64>> = field
        .lines
        .par_iter()
        .map(|scatterers| synth.line(scatterers))
        .collect();
    let samples = lines.concat();

    let provenance = Provenance {
        seed: Some(spec.seed),
        true_alpha_db_cm_mhz: Some(spec.alpha.db_cm_mhz()),
        depth_range: Some(spec.depth_range),
        tgc_applied: false,
        noise_snr_db: None,
    };
    let mut frame = RfFrame::new(samples, *config, provenance)?;
    if let Some(tgc) = &effects.tgc {
        frame = apply_tgc(&frame, &tgc.gains(config)?)?;
    }
    if let Some(snr_db) = effects.noise_snr_db {
        frame = add_noise(&frame, snr_db, spec.seed)?;
    }
    Ok(frame)
}

/// Scatterer generation followed by synthesis.
pub fn simulate(spec: &PhantomSpec, effects: &SystemEffects, config: &ScanConfig) -> Result<RfFrame> {
    let field = generate_scatterers(spec, config)?;
    synthesize_rf(&field, spec, effects, config)
}

struct LineSynthesizer {
    dft: Dft,
    samples_per_line: usize,
    /// Pulse amplitude spectrum on bins `first_bin..=last_bin`, already
    /// normalized so a unit scatterer without attenuation peaks at 1.
    pulse: Vec<f64>,
    first_bin: usize,
    bin_hz: f64,
    alpha_np: f64,
    sound_speed: f64,
}

impl LineSynthesizer {
    fn new(
        field: &ScattererField,
        spec: &PhantomSpec,
        effects: &SystemEffects,
        config: &ScanConfig,
    ) -> Self {
        let fs = config.sampling_rate;
        let sigma_f = pulse_sigma_hz(config.center_frequency, config.fractional_bandwidth);
        let sigma_t = 1.0 / (2.0 * std::f64::consts::PI * sigma_f);
        let tail = (10.0 * sigma_t * fs).ceil() as usize;
        let deepest = field
            .lines
            .iter()
            .flatten()
            .map(|s| s.depth)
            .fold(spec.depth_range.1, f64::max);
        let max_delay = (2.0 * deepest / config.sound_speed * fs).ceil() as usize;
        let nfft = (config.samples_per_line.max(max_delay) + 2 * tail + 1).next_power_of_two();
        let bin_hz = fs / nfft as f64;
        let half = nfft / 2;

        let full: Vec<f64> = (0..=half)
            .map(|k| {
                let f = k as f64 * bin_hz;
                let mut w = gaussian_amplitude(f, config.center_frequency, config.fractional_bandwidth);
                if let Some(resp) = &effects.transducer_response {
                    w *= resp.weight(f);
                }
                w
            })
            .collect();
        // Zero-delay peak of the two-sided inverse transform.
        let peak = (full[0] + full[half] + 2.0 * full[1..half].iter().sum::<f64>()) / nfft as f64;
        let max_w = full.iter().cloned().fold(0.0, f64::max);
        let keep = |w: f64| w > 1e-20 * max_w;
        let first_bin = full.iter().position(|&w| keep(w)).unwrap_or(0);
        let last_bin = full.iter().rposition(|&w| keep(w)).unwrap_or(0);
        let pulse = full[first_bin..=last_bin].iter().map(|w| w / peak).collect();

        Self {
            dft: Dft::new(nfft),
            samples_per_line: config.samples_per_line,
            pulse,
            first_bin,
            bin_hz,
            alpha_np: spec.alpha.np_m_hz(),
            sound_speed: config.sound_speed,
        }
    }

    fn line(&self, scatterers: &[Scatterer]) -> Vec<f64> {
        let nfft = self.dft.len();
        let half = nfft / 2;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.pulse.len()];
        for s in scatterers {
            // Per-Hz exponent: delay phase plus round-trip amplitude decay.
            let rate = Complex64::new(
                -2.0 * self.alpha_np * s.depth,
                -2.0 * std::f64::consts::PI * (2.0 * s.depth / self.sound_speed),
            );
            let step = (rate * self.bin_hz).exp();
            let mut v = Complex64::new(0.0, 0.0);
            for (j, (a, &x)) in acc.iter_mut().zip(&self.pulse).enumerate() {
                if j % RECURRENCE_ANCHOR == 0 {
                    let f = (self.first_bin + j) as f64 * self.bin_hz;
                    v = (rate * f).exp() * s.amplitude;
                }
                *a += v * x;
                v *= step;
            }
        }

        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for (j, v) in acc.into_iter().enumerate() {
            let k = self.first_bin + j;
            if k == 0 || k == half {
                buf[k] = Complex64::new(v.re, 0.0);
            } else {
                buf[k] = v;
                buf[nfft - k] = v.conj();
            }
        }
        self.dft.inverse(&mut buf);
        // The inverse includes 1/nfft; the pulse normalization assumed it.
        buf[..self.samples_per_line].iter().map(|c| c.re).collect()
    }
}

/// Multiplies every line by a per-sample gain profile.
pub fn apply_tgc(frame: &RfFrame, profile: &[f64]) -> Result<RfFrame> {
    let n = frame.samples_per_line();
    if profile.len() != n {
        return Err(AceError::invalid(format!(
            "TGC profile has {} entries, lines have {n} samples",
            profile.len()
        )));
    }
    if let Some(i) = profile.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(AceError::invalid(format!(
            "TGC gain at sample {i} must be positive and finite, got {}",
            profile[i]
        )));
    }
    let samples = frame
        .lines()
        .flat_map(|line| line.iter().zip(profile).map(|(v, g)| v * g))
        .collect();
    let mut provenance = frame.provenance.clone();
    provenance.tgc_applied = true;
    RfFrame::new(samples, *frame.config(), provenance)
}

/// Adds white Gaussian noise with standard deviation `rms / 10^(snr_db/20)`.
pub fn add_noise(frame: &RfFrame, snr_db: f64, seed: u64) -> Result<RfFrame> {
    if !snr_db.is_finite() {
        return Err(AceError::invalid("SNR must be finite"));
    }
    let rms = frame.rms();
    if rms == 0.0 {
        return Err(AceError::invalid("cannot set an SNR on a zero-RMS frame"));
    }
    let sigma = rms / 10f64.powf(snr_db / 20.0);
    let normal = Normal::new(0.0, sigma).map_err(|e| AceError::invalid(format!("noise: {e}")))?;
    let n = frame.samples_per_line();
    let samples: Vec<f64> = (0..frame.num_lines())
        .into_par_iter()
        .flat_map_iter(|l| {
            let mut rng = stream_rng(seed, NOISE_STREAM_BASE + l as u64);
            let line = frame.line(l);
            (0..n).map(move |i| line[i] + normal.sample(&mut rng))
        })
        .collect();
    let mut provenance = frame.provenance.clone();
    provenance.noise_snr_db = Some(snr_db);
    RfFrame::new(samples, *frame.config(), provenance)
}
