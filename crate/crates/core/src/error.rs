use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid pitch range [{f_min}, {f_max}] Hz for sample rate {sample_rate}")]
    InvalidPitchRange { f_min: f64, f_max: f64, sample_rate: u32 },

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid frame spec: {0}")]
    InvalidFrameSpec(String),

    #[error("frame length {frame_len} exceeds n_fft {n_fft}")]
    FrameExceedsFft { frame_len: usize, n_fft: usize },

    #[error("degenerate dimension {dim}: zero variance")]
    DegenerateDimension { dim: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("invalid distribution at step {step}: {reason}")]
    InvalidDistribution { step: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no voiced overlap")]
    NoVoicedOverlap,

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("empty manifest")]
    EmptyManifest,

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing reference for utterance {0}")]
    MissingReference(String),

    #[error("{failed} of {total} utterances failed")]
    UtteranceFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable kind used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::InvalidPitchRange { .. } => "invalid_pitch_range",
            Error::InvalidWaveform(_) => "invalid_waveform",
            Error::InvalidFrameSpec(_) => "invalid_frame_spec",
            Error::FrameExceedsFft { .. } => "frame_exceeds_fft",
            Error::DegenerateDimension { .. } => "degenerate_dimension",
            Error::InsufficientData(_) => "insufficient_data",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidSegment(_) => "invalid_segment",
            Error::InvalidDistribution { .. } => "invalid_distribution",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NoVoicedOverlap => "no_voiced_overlap",
            Error::VocabMismatch(_) => "vocab_mismatch",
            Error::EmptyManifest => "empty_manifest",
            Error::Format { .. } => "format",
            Error::MissingReference(_) => "missing_reference",
            Error::UtteranceFailures { .. } => "utterance_failures",
            Error::Config(_) => "config",
            Error::Wav(_) => "wav",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}
