//! Binary feature cache.
//!
//! Layout (little-endian throughout): magic `PESF`, version u16, width u32,
//! row count u64, one 32-byte sha256 per row, then row-major IEEE-754 f32
//! values. Rows follow manifest order, so re-running over an unchanged
//! corpus reproduces the cache byte for byte.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::manifest::{resolve_path, ManifestEntry};
use super::CorpusError;
use crate::features::{extract_feature_vector, extract_grayscale, FEATURE_DIM};
use crate::pe::RawBinary;

pub const CACHE_MAGIC: [u8; 4] = *b"PESF";
pub const CACHE_VERSION: u16 = 1;
pub const GRAYSCALE_DIM: usize = 64 * 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractMode {
    Vector,
    Grayscale,
}

impl ExtractMode {
    pub fn width(&self) -> usize {
        match self {
            ExtractMode::Vector => FEATURE_DIM,
            ExtractMode::Grayscale => GRAYSCALE_DIM,
        }
    }
}

impl std::str::FromStr for ExtractMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vector" => Ok(ExtractMode::Vector),
            "grayscale" => Ok(ExtractMode::Grayscale),
            other => Err(format!("unknown extract mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub width: u32,
    pub digests: Vec<[u8; 32]>,
    /// Row-major, `digests.len() * width` values.
    pub data: Vec<f32>,
}

impl FeatureCache {
    pub fn rows(&self) -> usize {
        self.digests.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let w = self.width as usize;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn index_by_digest(&self) -> HashMap<[u8; 32], usize> {
        self.digests
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = Vec::with_capacity(18 + self.digests.len() * 32 + self.data.len() * 4);
        out.extend_from_slice(&CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&(self.digests.len() as u64).to_le_bytes());
        for d in &self.digests {
            out.extend_from_slice(d);
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, out).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let bad = |msg: &str| CorpusError::BadCache(format!("{}: {msg}", path.display()));
        if bytes.len() < 18 || bytes[0..4] != CACHE_MAGIC {
            return Err(bad("missing PESF magic"));
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let rows = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
        let digest_end = 18 + rows * 32;
        let expected = digest_end + rows * width as usize * 4;
        if bytes.len() != expected {
            return Err(bad("truncated or oversized payload"));
        }
        let digests = bytes[18..digest_end]
            .chunks_exact(32)
            .map(|c| c.try_into().unwrap())
            .collect();
        let data = bytes[digest_end..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            width,
            digests,
            data,
        })
    }
}

#[derive(Debug)]
pub struct CacheBuildReport {
    pub cache: FeatureCache,
    /// Paths whose extraction failed; their rows are omitted.
    pub failures: Vec<String>,
}

fn extract_row(raw: &RawBinary, mode: ExtractMode) -> Option<Vec<f32>> {
    match mode {
        ExtractMode::Vector => Some(
            extract_feature_vector(raw)
                .values
                .iter()
                .map(|&v| v as f32)
                .collect(),
        ),
        ExtractMode::Grayscale => extract_grayscale(raw)
            .ok()
            .map(|img| img.pixels.iter().map(|&p| p as f32).collect()),
    }
}

/// Extract features for every manifest entry into a cache. Files fan out
/// across the rayon pool; rows are written in manifest order regardless of
/// completion order.
pub fn cache_features(
    manifest_path: &Path,
    entries: &[ManifestEntry],
    mode: ExtractMode,
) -> CacheBuildReport {
    let results: Vec<(usize, Option<Vec<f32>>)> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let row = RawBinary::from_file(&resolve_path(manifest_path, entry))
                .ok()
                .and_then(|raw| extract_row(&raw, mode));
            (i, row)
        })
        .collect();
    let mut cache = FeatureCache {
        width: mode.width() as u32,
        digests: Vec::new(),
        data: Vec::new(),
    };
    let mut failures = Vec::new();
    for (i, row) in results {
        match row {
            Some(values) => {
                let mut digest = [0u8; 32];
                hex::decode_to_slice(&entries[i].sha256, &mut digest).unwrap_or_default();
                cache.digests.push(digest);
                cache.data.extend(values);
            }
            None => failures.push(entries[i].path.clone()),
        }
    }
    CacheBuildReport { cache, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{generate_synthetic_corpus, CorpusProfile};

    #[test]
    fn cache_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let entries =
            generate_synthetic_corpus(dir.path(), &CorpusProfile::balanced(1), 3).unwrap();
        let manifest = dir.path().join("manifest.jsonl");
        let report = cache_features(&manifest, &entries, ExtractMode::Vector);
        assert!(report.failures.is_empty());
        assert_eq!(report.cache.rows(), 6);
        assert_eq!(report.cache.width, 2381);
        let path = dir.path().join("features.pesf");
        report.cache.write(&path).unwrap();
        let reread = FeatureCache::read(&path).unwrap();
        assert_eq!(reread, report.cache);
    }

    #[test]
    fn rerun_produces_identical_file_digest() {
        let dir = tempfile::tempdir().unwrap();
        let entries =
            generate_synthetic_corpus(dir.path(), &CorpusProfile::balanced(1), 5).unwrap();
        let manifest = dir.path().join("manifest.jsonl");
        let p1 = dir.path().join("a.pesf");
        let p2 = dir.path().join("b.pesf");
        cache_features(&manifest, &entries, ExtractMode::Vector)
            .cache
            .write(&p1)
            .unwrap();
        cache_features(&manifest, &entries, ExtractMode::Vector)
            .cache
            .write(&p2)
            .unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn grayscale_mode_width() {
        let dir = tempfile::tempdir().unwrap();
        let entries =
            generate_synthetic_corpus(dir.path(), &CorpusProfile::balanced(1), 9).unwrap();
        let manifest = dir.path().join("manifest.jsonl");
        let report = cache_features(&manifest, &entries, ExtractMode::Grayscale);
        assert_eq!(report.cache.width, 4096);
    }

    #[test]
    fn unreadable_file_reported_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![ManifestEntry {
            path: "missing.exe".to_string(),
            label: crate::corpus::Label::Benign,
            family: None,
            source: "t".to_string(),
            sha256: "00".repeat(32),
        }];
        let report = cache_features(&dir.path().join("m.jsonl"), &entries, ExtractMode::Vector);
        assert_eq!(report.cache.rows(), 0);
        assert_eq!(report.failures.len(), 1);
    }
}
