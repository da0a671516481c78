use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A phoneme occupying frames `[start_frame, end_frame)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeSegment {
    pub phoneme: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl PhonemeSegment {
    pub fn new(phoneme: impl Into<String>, start_frame: usize, end_frame: usize) -> Self {
        Self { phoneme: phoneme.into(), start_frame, end_frame }
    }

    pub fn len(&self) -> usize {
        self.end_frame.saturating_sub(self.start_frame)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One utterance's phoneme segmentation. Segments are sorted and
/// non-overlapping; gaps between them are frames no phoneme claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub utt_id: String,
    pub n_frames: usize,
    pub segments: Vec<PhonemeSegment>,
}

impl Alignment {
    pub fn new(utt_id: impl Into<String>, n_frames: usize, segments: Vec<PhonemeSegment>) -> Result<Self> {
        let mut prev_end = 0;
        for (i, seg) in segments.iter().enumerate() {
            if seg.start_frame >= seg.end_frame {
                return Err(Error::InvalidSegment(format!("segment {i} ({}) is empty", seg.phoneme)));
            }
            if seg.end_frame > n_frames {
                return Err(Error::InvalidSegment(format!(
                    "segment {i} ends at {} past {n_frames} frames",
                    seg.end_frame
                )));
            }
            if seg.start_frame < prev_end {
                return Err(Error::InvalidSegment(format!("segment {i} overlaps its predecessor")));
            }
            prev_end = seg.end_frame;
        }
        Ok(Self { utt_id: utt_id.into(), n_frames, segments })
    }

    /// Parses `utt <id> <n_frames>` followed by `<phoneme> <start> <end>`
    /// lines. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format {
            path: "<alignment>".into(),
            message: format!("line {line}: {msg}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (no, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "utt" {
            return Err(bad(no + 1, "expected `utt <id> <n_frames>`"));
        }
        let n_frames = fields[2].parse().map_err(|_| bad(no + 1, "bad frame count"))?;
        let mut segments = Vec::new();
        for (no, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(no + 1, "expected `<phoneme> <start> <end>`"));
            }
            let start = f[1].parse().map_err(|_| bad(no + 1, "bad start frame"))?;
            let end = f[2].parse().map_err(|_| bad(no + 1, "bad end frame"))?;
            segments.push(PhonemeSegment::new(f[0], start, end));
        }
        Self::new(fields[1], n_frames, segments)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format { path: path.to_path_buf(), message },
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("utt {} {}\n", self.utt_id, self.n_frames);
        for s in &self.segments {
            let _ = writeln!(out, "{} {} {}", s.phoneme, s.start_frame, s.end_frame);
        }
        out
    }
}
