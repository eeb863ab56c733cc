//! Ultrasound attenuation estimation with the reference frequency method.
//!
//! Pipeline: RF frame → local power spectra on a depth × frequency grid →
//! optional cepstral smoothing of each spectrum → adjacent-frequency power
//! ratios → straight-line decay fits over depth → attenuation.

mod dft;
pub mod error;
pub mod homomorphic;
pub mod phantom;
pub mod rfm;
pub mod spectral;
pub mod units;

pub use error::{AceError, PipelineError, Result, Stage};
pub use units::{Attenuation, Provenance, RfFrame, ScanConfig};
