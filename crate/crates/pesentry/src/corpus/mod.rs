//! Corpus handling: manifests, the synthetic generator, feature caching and
//! dataset assembly.

pub mod cache;
pub mod dataset;
pub mod manifest;
pub mod synth;

pub use cache::{cache_features, CacheBuildReport, ExtractMode, FeatureCache};
pub use dataset::{build_dataset, Dataset, DatasetSpec, LabeledSet, Task};
pub use manifest::{ingest_manifest, resolve_path, write_manifest, Family, IngestReport, Label, ManifestEntry};
pub use synth::{generate_synthetic_corpus, CorpusProfile, PeBuilder, SectionSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("class {0} has no entries")]
    InsufficientClass(String),
    #[error("bad feature cache: {0}")]
    BadCache(String),
}
