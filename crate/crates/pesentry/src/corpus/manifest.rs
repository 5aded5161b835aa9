//! Line-delimited JSON manifests describing a corpus of PE files.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign,
    Malicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Trojan,
    Worm,
    Backdoor,
    Ransomware,
    Other,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Trojan,
        Family::Worm,
        Family::Backdoor,
        Family::Ransomware,
        Family::Other,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Trojan => "trojan",
            Family::Worm => "worm",
            Family::Backdoor => "backdoor",
            Family::Ransomware => "ransomware",
            Family::Other => "other",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path to the PE file, relative to the manifest location.
    pub path: String,
    pub label: Label,
    pub family: Option<Family>,
    pub source: String,
    /// Hex-encoded content digest.
    pub sha256: String,
}

/// Result of reading a manifest: validated entries plus non-fatal skips.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub entries: Vec<ManifestEntry>,
    pub duplicate_count: usize,
    pub missing_files: Vec<String>,
}

/// Read and validate a JSONL manifest. Duplicate digests collapse to the
/// first occurrence; entries whose file is missing are skipped and listed.
pub fn ingest_manifest(path: &Path) -> Result<IngestReport, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut report = IngestReport::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        if entry.family.is_some() && entry.label == Label::Benign {
            return Err(CorpusError::Schema {
                line: lineno + 1,
                message: "family set on a benign entry".to_string(),
            });
        }
        if !seen.insert(entry.sha256.clone()) {
            report.duplicate_count += 1;
            continue;
        }
        if !base.join(&entry.path).is_file() {
            report.missing_files.push(entry.path.clone());
            continue;
        }
        report.entries.push(entry);
    }
    Ok(report)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Resolve an entry's file path against its manifest location.
pub fn resolve_path(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&entry.path)
}
