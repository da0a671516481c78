//! On-disk feature store: one JSONL file per split with per-utterance
//! metadata, and a little-endian `f32` sidecar per split holding the
//! frame-level tracks.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::decode::TokenId;
use crate::dsp::{NormStats, ProsodyTrack};
use crate::error::{Error, Result};
use crate::prosody::{PhonemeSegment, PL_DIM};

pub const STATS_FILE: &str = "stats.json";
pub const ERRORS_FILE: &str = "errors.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub split: String,
    pub sample_rate: u32,
    pub segments: Vec<PhonemeSegment>,
    /// Un-normalized `[log_pitch, energy, pov]` with voicing.
    pub prosody: ProsodyTrack,
    /// Normalized prosody with deltas, `T × 9`.
    pub delta: Array2<f64>,
    /// Log-mel frames, `T × n_mels`.
    pub mel: Array2<f64>,
    /// Dense acoustic token per frame, empty until quantized.
    pub tokens: Vec<TokenId>,
    /// Prosody label per segment, empty until labelled.
    pub pl_labels: Vec<TokenId>,
}

impl FeatureRecord {
    pub fn n_frames(&self) -> usize {
        self.prosody.len()
    }

    fn check(&self) -> Result<()> {
        let t = self.n_frames();
        let consistent = self.delta.nrows() == t
            && self.mel.nrows() == t
            && (self.tokens.is_empty() || self.tokens.len() == t)
            && (self.pl_labels.is_empty() || self.pl_labels.len() == self.segments.len());
        if consistent {
            Ok(())
        } else {
            Err(Error::Format {
                path: format!("<record {}>", self.id).into(),
                message: "inconsistent frame or label counts".into(),
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    split: String,
    sample_rate: u32,
    n_frames: usize,
    n_mels: usize,
    offset: u64,
    segments: Vec<PhonemeSegment>,
    tokens: Vec<TokenId>,
    pl_labels: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub stats: NormStats,
    /// Sorted by split (train, valid, test, then others by name) and id.
    pub records: Vec<FeatureRecord>,
}

/// Position of a split name in the canonical ordering.
pub fn split_rank(split: &str) -> (usize, &str) {
    match split {
        "train" => (0, ""),
        "valid" => (1, ""),
        "test" => (2, ""),
        other => (3, other),
    }
}

impl FeatureStore {
    pub fn new(stats: NormStats, mut records: Vec<FeatureRecord>) -> Self {
        records.sort_by(|a, b| split_rank(&a.split).cmp(&split_rank(&b.split)).then(a.id.cmp(&b.id)));
        Self { stats, records }
    }

    pub fn split<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a FeatureRecord> + 'a {
        self.records.iter().filter(move |r| r.split == name)
    }

    pub fn get(&self, id: &str) -> Option<&FeatureRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        // Stale split files from a previous run would otherwise be reloaded.
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let ext = path.extension().and_then(|e| e.to_str());
            if matches!(ext, Some("jsonl") | Some("f32")) && path.file_name() != Some(ERRORS_FILE.as_ref()) {
                std::fs::remove_file(path)?;
            }
        }
        std::fs::write(dir.join(STATS_FILE), serde_json::to_vec(&self.stats)?)?;

        let mut by_split: BTreeMap<&str, Vec<&FeatureRecord>> = BTreeMap::new();
        for r in &self.records {
            r.check()?;
            by_split.entry(&r.split).or_default().push(r);
        }
        for (split, records) in by_split {
            let mut meta = BufWriter::new(File::create(dir.join(format!("{split}.jsonl")))?);
            let mut data = BufWriter::new(File::create(dir.join(format!("{split}.f32")))?);
            let mut offset = 0u64;
            for r in records {
                let line = RecordLine {
                    id: r.id.clone(),
                    split: r.split.clone(),
                    sample_rate: r.sample_rate,
                    n_frames: r.n_frames(),
                    n_mels: r.mel.ncols(),
                    offset,
                    segments: r.segments.clone(),
                    tokens: r.tokens.clone(),
                    pl_labels: r.pl_labels.clone(),
                };
                serde_json::to_writer(&mut meta, &line)?;
                meta.write_all(b"\n")?;
                let voiced = r.prosody.voiced.iter().map(|&v| if v { 1.0 } else { 0.0 });
                let values = r
                    .prosody
                    .frames
                    .iter()
                    .copied()
                    .chain(voiced)
                    .chain(r.delta.iter().copied())
                    .chain(r.mel.iter().copied());
                for v in values {
                    data.write_all(&(v as f32).to_le_bytes())?;
                    offset += 1;
                }
            }
            meta.flush()?;
            data.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let stats_path = dir.join(STATS_FILE);
        let stats: NormStats = serde_json::from_slice(&std::fs::read(&stats_path).map_err(|e| {
            Error::Format { path: stats_path.clone(), message: format!("feature store not found: {e}") }
        })?)?;
        let mut records = Vec::new();
        let mut names: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("jsonl") && p.file_name() != Some(ERRORS_FILE.as_ref()))
            .collect();
        names.sort();
        for meta_path in names {
            let data_path = meta_path.with_extension("f32");
            let mut raw = Vec::new();
            File::open(&data_path)?.read_to_end(&mut raw)?;
            let floats: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            for line in BufReader::new(File::open(&meta_path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let meta: RecordLine = serde_json::from_str(&line)?;
                records.push(decode_record(meta, &floats, &data_path)?);
            }
        }
        Ok(Self::new(stats, records))
    }
}

fn decode_record(meta: RecordLine, floats: &[f64], path: &Path) -> Result<FeatureRecord> {
    let t = meta.n_frames;
    let need = t * (3 + 1 + PL_DIM + meta.n_mels);
    let start = meta.offset as usize;
    let slice = floats.get(start..start + need).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: format!("sidecar too short for {}", meta.id),
    })?;
    let (pros, rest) = slice.split_at(t * 3);
    let (voiced, rest) = rest.split_at(t);
    let (delta, mel) = rest.split_at(t * PL_DIM);
    let record = FeatureRecord {
        id: meta.id,
        split: meta.split,
        sample_rate: meta.sample_rate,
        segments: meta.segments,
        prosody: ProsodyTrack::new(
            Array2::from_shape_vec((t, 3), pros.to_vec()).expect("shape"),
            voiced.iter().map(|&v| v > 0.5).collect(),
        )?,
        delta: Array2::from_shape_vec((t, PL_DIM), delta.to_vec()).expect("shape"),
        mel: Array2::from_shape_vec((t, meta.n_mels), mel.to_vec()).expect("shape"),
        tokens: meta.tokens,
        pl_labels: meta.pl_labels,
    };
    record.check()?;
    Ok(record)
}
