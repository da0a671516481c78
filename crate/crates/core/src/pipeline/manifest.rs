use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub wav: PathBuf,
    pub alignment: PathBuf,
    pub split: String,
}

/// Tab-separated `id  wav  alignment  split` lines; `#` starts a comment.
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::Format {
                    path: base.join("<manifest>"),
                    message: format!("line {}: expected 4 tab-separated fields", no + 1),
                });
            }
            if !seen.insert(f[0].to_string()) {
                return Err(Error::Format {
                    path: base.join("<manifest>"),
                    message: format!("line {}: duplicate utterance id {}", no + 1, f[0]),
                });
            }
            entries.push(ManifestEntry {
                id: f[0].to_string(),
                wav: base.join(f[1]),
                alignment: base.join(f[2]),
                split: f[3].to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\t{}\n", e.id, rel(&e.wav), rel(&e.alignment), e.split))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_entries() {
        let m = Manifest::parse("# header\na\twav/a.wav\tali/a.txt\ttrain\n\nb\tb.wav\tb.txt\ttest\n", Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].wav, PathBuf::from("/data/wav/a.wav"));
        assert_eq!(m.entries[1].split, "test");
        assert_eq!(Manifest::parse(&m.to_text(Path::new("/data")), Path::new("/data")).unwrap(), m);
    }

    #[test]
    fn rejects_duplicates_and_short_lines() {
        assert!(Manifest::parse("a\tx\ty\ttrain\na\tx\ty\ttest\n", Path::new(".")).is_err());
        assert!(Manifest::parse("a\tx\ty\n", Path::new(".")).is_err());
    }
}
