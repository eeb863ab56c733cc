use thiserror::Error;

pub type Result<T, E = AceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// Fewer than two bins survive the band threshold.
    #[error("degenerate band: {passing} bin(s) within {threshold_db} dB of the peak")]
    DegenerateBand { passing: usize, threshold_db: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A spectral power value that cannot enter a logarithmic ratio.
    #[error("invalid input: power {value} at bin {bin}, window {window}")]
    NonPositivePower { bin: usize, window: usize, value: f64 },

    #[error("depth window {window}: {source}")]
    AtWindow {
        window: usize,
        #[source]
        source: Box<AceError>,
    },
}

impl AceError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AceError::InvalidArgument(msg.into())
    }

    pub(crate) fn at_window(self, window: usize) -> Self {
        AceError::AtWindow {
            window,
            source: Box::new(self),
        }
    }
}

/// Pipeline stage at which an estimation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Spectra,
    FitRange,
    Smoothing,
    Band,
    Ratios,
    Fit,
    Conversion,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectra => "local power spectra",
            Stage::FitRange => "fit range",
            Stage::Smoothing => "homomorphic smoothing",
            Stage::Band => "band selection",
            Stage::Ratios => "frequency ratios",
            Stage::Fit => "decay fit",
            Stage::Conversion => "slope conversion",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: AceError,
}

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}
