use std::path::PathBuf;

use ace_core::homomorphic::{LifterSpec, DEFAULT_FLOOR_REL};
use ace_core::phantom::{PhantomSpec, SystemEffects, TgcProfile};
use ace_core::rfm::{Method, RfmOptions};
use ace_core::spectral::Taper;
use ace_core::{Attenuation, ScanConfig};
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ace", version, about = "Ultrasound attenuation estimation with the reference frequency method")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a phantom and write `<out>.rf` plus a `<out>.json` sidecar.
    Simulate(SimulateArgs),
    /// Estimate attenuation from an RF file.
    Estimate(EstimateArgs),
    /// Run both methods on one RF file.
    Compare(CompareArgs),
    /// Tabulate both methods over seeds and lifter cutoffs.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth attenuation, dB/cm/MHz.
    #[arg(long, default_value_t = 0.68)]
    pub alpha: f64,
    #[arg(long, default_value_t = 64)]
    pub lines: usize,
    #[arg(long, default_value_t = 3072)]
    pub samples: usize,
    /// Sampling rate, Hz.
    #[arg(long, default_value_t = 50.0e6)]
    pub fs: f64,
    /// Pulse centre frequency, Hz.
    #[arg(long, default_value_t = 5.0e6)]
    pub f0: f64,
    /// Fractional -6 dB bandwidth.
    #[arg(long, default_value_t = 0.6)]
    pub bandwidth: f64,
    /// Mean scatterers per metre of A-line.
    #[arg(long, default_value_t = 3000.0)]
    pub density: f64,
    /// Additive white noise, dB below the frame RMS.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// `none` or `exp:<rate>` for amplitude gain exp(rate·z), rate in Np/m.
    #[arg(long, default_value = "none", value_parser = parse_tgc)]
    pub tgc: Tgc,
    /// Scattering region `z_min:z_max` in metres.
    #[arg(long, default_value = "0.005:0.045", value_parser = parse_range)]
    pub depth_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tgc(pub Option<TgcProfile>);

impl PhantomArgs {
    pub fn scan_config(&self) -> Result<ScanConfig, CliError> {
        let config = ScanConfig {
            sampling_rate: self.fs,
            center_frequency: self.f0,
            fractional_bandwidth: self.bandwidth,
            num_lines: self.lines,
            samples_per_line: self.samples,
            ..ScanConfig::default()
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    pub fn phantom(&self, seed: u64) -> Result<PhantomSpec, CliError> {
        let spec = PhantomSpec {
            depth_range: self.depth_range,
            scatterer_density: self.density,
            alpha: Attenuation::from_db_cm_mhz(self.alpha).map_err(|e| CliError::Usage(e.to_string()))?,
            seed,
            ..PhantomSpec::default()
        };
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }

    pub fn effects(&self) -> SystemEffects {
        SystemEffects {
            tgc: self.tgc.0.clone(),
            noise_snr_db: self.snr_db,
            ..SystemEffects::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Depth window length in samples (power of two).
    #[arg(long, default_value_t = 512)]
    pub window: usize,
    #[arg(long, default_value_t = 128)]
    pub hop: usize,
    #[arg(long, default_value = "hann", value_parser = parse_taper)]
    pub taper: Taper,
    /// Frequency-bin step between ratio numerator and denominator.
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, default_value_t = 15.0)]
    pub band_db: f64,
    /// Depth interval `z_lo:z_hi` in metres used for the decay fits.
    #[arg(long, value_parser = parse_range)]
    pub fit_range: Option<(f64, f64)>,
    /// Lifter cutoff in quefrency samples; default max(4, window/16).
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_FLOOR_REL)]
    pub floor_rel: f64,
}

impl EstimatorArgs {
    pub fn options(&self, method: Method) -> Result<RfmOptions, CliError> {
        let lifter = self
            .cutoff
            .map(LifterSpec::new)
            .transpose()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.hop == 0 {
            return Err(CliError::Usage("--hop must be at least 1".into()));
        }
        Ok(RfmOptions {
            window_length: self.window,
            hop: self.hop,
            taper: self.taper,
            step: self.step,
            band_threshold_db: self.band_db,
            fit_range: self.fit_range,
            method,
            lifter,
            floor_rel: self.floor_rel,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub phantom: PhantomArgs,
    /// Output prefix; `.rf` and `.json` are appended.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// RF file (its sidecar is the same path with a `.json` extension).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "improved", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Result document path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of decay curves and fitted lines.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Output prefix for `.baseline.json`, `.improved.json` and `.summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prefix for `.baseline.csv` and `.improved.csv` curve tables.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub phantom: PhantomArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 20)]
    pub count: u64,
    /// Comma-separated lifter cutoffs; defaults to --cutoff or the window rule.
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Vec<usize>,
    /// CSV path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_tgc(s: &str) -> Result<Tgc, String> {
    if s == "none" {
        return Ok(Tgc(None));
    }
    let rate = s
        .strip_prefix("exp:")
        .ok_or_else(|| format!("expected 'none' or 'exp:<rate>', got '{s}'"))?
        .parse::<f64>()
        .map_err(|e| format!("bad TGC rate: {e}"))?;
    if !rate.is_finite() {
        return Err("TGC rate must be finite".into());
    }
    Ok(Tgc(Some(TgcProfile::Exponential { rate_per_m: rate })))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected 'lo:hi', got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("range {lo}:{hi} must be finite with lo < hi"));
    }
    Ok((lo, hi))
}

fn parse_taper(s: &str) -> Result<Taper, String> {
    s.parse().map_err(|e: ace_core::AceError| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: ace_core::AceError| e.to_string())
}
