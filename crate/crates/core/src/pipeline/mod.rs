//! Batch orchestration: manifests, the feature store, and the commands the
//! `vqtts-kit` binary exposes.

mod commands;
mod config;
mod manifest;
mod store;
pub mod toy;

pub use commands::{
    cmd_decode, cmd_evaluate, cmd_export_pitch, cmd_extract, cmd_label_prosody, cmd_train_lm, cmd_train_vq,
    pitch_csv, read_hypotheses, render_pitch, with_threads, write_hypotheses, DecodeOptions, ExtractSummary,
    HypothesisRecord, ModelMeta, PitchExport, Task, HYPOTHESES_FILE, PL_CODEBOOK_FILE, PL_LM_FILE, REPORT_FILE,
    VOCAB_FILE, VQ_CODEBOOK_FILE, VQ_LM_FILE,
};
pub use config::{Config, DecodeConfig, DecodeMode, EvalConfig, ExportConfig, FeatureConfig, LmConfig, ProsodyConfig, VqConfig};
pub use manifest::{Manifest, ManifestEntry};
pub use store::{split_rank, FeatureRecord, FeatureStore, ERRORS_FILE, STATS_FILE};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "VQTTS_KIT_THREADS";
