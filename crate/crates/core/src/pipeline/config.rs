use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{FrameSpec, PitchConfig};
use crate::error::{Error, Result};
use crate::eval::WarmupConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub manifest: PathBuf,
    pub store_dir: PathBuf,
    pub model_dir: PathBuf,
    pub output_dir: PathBuf,
    pub features: FeatureConfig,
    pub vq: VqConfig,
    pub prosody: ProsodyConfig,
    pub lm: LmConfig,
    pub decode: DecodeConfig,
    pub eval: EvalConfig,
    pub warmup: WarmupConfig,
    pub export: ExportConfig,
    /// Directory relative paths are resolved against; the config file's
    /// directory when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Expected input rate. Files at other rates are processed unchanged and
    /// their rate is recorded.
    pub sample_rate: u32,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub voicing_threshold: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub delta_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqConfig {
    pub groups: usize,
    pub entries_per_group: usize,
    pub max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProsodyConfig {
    pub clusters: usize,
    pub max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Greedy,
    Beam,
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "beam" => Ok(Self::Beam),
            other => Err(Error::Config(format!("unknown decode mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    /// Beam for prosody-label decoding.
    pub beam_pl: usize,
    /// Beam for acoustic-token decoding.
    pub beam_vq: usize,
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub gpe_threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub utterance: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            manifest: "manifest.tsv".into(),
            store_dir: "store".into(),
            model_dir: "models".into(),
            output_dir: "out".into(),
            features: FeatureConfig::default(),
            vq: VqConfig::default(),
            prosody: ProsodyConfig::default(),
            lm: LmConfig::default(),
            decode: DecodeConfig::default(),
            eval: EvalConfig::default(),
            warmup: WarmupConfig::default(),
            export: ExportConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let pitch = PitchConfig::default();
        let frame = FrameSpec::default();
        Self {
            sample_rate: 16_000,
            frame_length_ms: frame.frame_length_ms,
            frame_shift_ms: frame.frame_shift_ms,
            f_min: pitch.f_min,
            f_max: pitch.f_max,
            voicing_threshold: pitch.voicing_threshold,
            n_fft: crate::dsp::DEFAULT_N_FFT,
            n_mels: crate::dsp::DEFAULT_N_MELS,
            delta_window: 2,
        }
    }
}

impl Default for VqConfig {
    fn default() -> Self {
        Self { groups: 2, entries_per_group: 320, max_iters: 50, seed: 0 }
    }
}

impl Default for ProsodyConfig {
    fn default() -> Self {
        Self { clusters: crate::prosody::DEFAULT_CLUSTERS, max_iters: 100, seed: 0 }
    }
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { order: 2, lambda: 0.01 }
    }
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self { mode: DecodeMode::Beam, beam_pl: 5, beam_vq: 10, split: "test".into() }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { gpe_threshold: crate::eval::DEFAULT_GPE_THRESHOLD }
    }
}

impl FeatureConfig {
    pub fn frame_spec(&self) -> Result<FrameSpec> {
        FrameSpec::new(self.frame_length_ms, self.frame_shift_ms)
    }

    pub fn pitch(&self) -> PitchConfig {
        PitchConfig {
            f_min: self.f_min,
            f_max: self.f_max,
            voicing_threshold: self.voicing_threshold,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.resolve(&self.manifest)
    }

    pub fn store_path(&self) -> PathBuf {
        self.resolve(&self.store_dir)
    }

    pub fn model_path(&self) -> PathBuf {
        self.resolve(&self.model_dir)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }
}
