use thiserror::Error;

/// Errors raised by the measurement toolkit.
///
/// Every variant carries a stable machine-readable code (see [`Error::code`])
/// which the command-line front end prints alongside the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid all-pass section: {0}")]
    InvalidSection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fft length {0} is not a power of two")]
    FftLength(usize),

    #[error("phase array is not odd-symmetric: imaginary residue {residue:e} after inverse transform")]
    PhaseSymmetry { residue: f64 },

    #[error("only {count} all-pass sections fit below Nyquist (need at least 2); fd too large")]
    TooFewSections { count: usize },

    #[error("truncation discards {loss:.3e} of the unit energy (limit 1%)")]
    TruncationLoss { loss: f64 },

    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("sample-rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: f64, actual: f64 },

    #[error("recording too short for one clean cycle")]
    TooShort,

    #[error("repetition shift {n_o} lets {overlap} copies overlap one sample (limit 16)")]
    Overlap { n_o: usize, overlap: usize },

    #[error("nonlinearity output exceeds 10 in magnitude ({peak:.3})")]
    Overflow { peak: f64 },

    #[error("input is empty")]
    EmptyInput,

    #[error("distribution has zero mass")]
    ZeroMass,

    #[error("unsupported channel count: {0} (mono only)")]
    UnsupportedChannels(u16),

    #[error("unsupported wav format: {0}")]
    UnsupportedFormat(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSection(_) => "E_SECTION",
            Error::InvalidParameter(_) => "E_PARAM",
            Error::FftLength(_) => "E_FFT_LEN",
            Error::PhaseSymmetry { .. } => "E_PHASE_SYMMETRY",
            Error::TooFewSections { .. } => "E_TOO_FEW_SECTIONS",
            Error::TruncationLoss { .. } => "E_TRUNCATION",
            Error::LengthMismatch { .. } => "E_LENGTH",
            Error::SampleRateMismatch { .. } => "E_SAMPLE_RATE",
            Error::TooShort => "E_TOO_SHORT",
            Error::Overlap { .. } => "E_OVERLAP",
            Error::Overflow { .. } => "E_OVERFLOW",
            Error::EmptyInput => "E_EMPTY",
            Error::ZeroMass => "E_ZERO_MASS",
            Error::UnsupportedChannels(_) => "E_CHANNELS",
            Error::UnsupportedFormat(_) => "E_FORMAT",
            Error::Wav(_) => "E_WAV",
            Error::Json(_) => "E_JSON",
            Error::Io(_) => "E_IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
