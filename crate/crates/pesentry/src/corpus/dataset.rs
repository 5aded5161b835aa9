//! Dataset assembly: per-class caps, deterministic subsampling and the
//! stratified 70/15/15 split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cache::FeatureCache;
use super::manifest::{Family, Label, ManifestEntry};
use super::CorpusError;
use crate::features::hashing::fnv1a64;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MalwareDetection,
    FamilyClassification,
    RansomwareDetection,
    BilayerEval,
}

impl Task {
    /// Ordered class vocabulary for the task; the order fixes label indices
    /// and tie-breaking.
    pub fn classes(&self) -> Vec<&'static str> {
        match self {
            Task::MalwareDetection => vec!["benign", "malicious"],
            Task::FamilyClassification => Family::ALL.iter().map(|f| f.name()).collect(),
            Task::RansomwareDetection => vec!["other_malware", "ransomware"],
            Task::BilayerEval => vec!["benign", "malware_other", "ransomware"],
        }
    }

    /// The designated positive class for binary tasks (drives FNR).
    pub fn positive_class(&self) -> Option<&'static str> {
        match self {
            Task::MalwareDetection => Some("malicious"),
            Task::RansomwareDetection => Some("ransomware"),
            _ => None,
        }
    }

    /// Map an entry to its class under this task; `None` excludes it.
    pub fn class_of(&self, entry: &ManifestEntry) -> Option<&'static str> {
        match self {
            Task::MalwareDetection => Some(match entry.label {
                Label::Benign => "benign",
                Label::Malicious => "malicious",
            }),
            Task::FamilyClassification => entry.family.as_ref().map(|f| f.name()),
            Task::RansomwareDetection => match (entry.label, entry.family) {
                (Label::Malicious, Some(Family::Ransomware)) => Some("ransomware"),
                (Label::Malicious, _) => Some("other_malware"),
                (Label::Benign, _) => None,
            },
            Task::BilayerEval => match (entry.label, entry.family) {
                (Label::Benign, _) => Some("benign"),
                (Label::Malicious, Some(Family::Ransomware)) => Some("ransomware"),
                (Label::Malicious, _) => Some("malware_other"),
            },
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "malware" | "malware_detection" => Ok(Task::MalwareDetection),
            "families" | "family_classification" => Ok(Task::FamilyClassification),
            "ransomware" | "ransomware_detection" => Ok(Task::RansomwareDetection),
            "bilayer" | "bilayer_eval" => Ok(Task::BilayerEval),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub task: Task,
    /// Per-class selection caps; classes not listed are uncapped.
    pub caps: BTreeMap<String, usize>,
    /// (train, val, test) fractions, summing to 1.
    pub split: (f64, f64, f64),
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(task: Task, seed: u64) -> Self {
        Self {
            task,
            caps: BTreeMap::new(),
            split: (0.70, 0.15, 0.15),
            seed,
        }
    }

    /// Digest over the serialized spec, recorded in run metadata.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(crate::pe::sha256_digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub digests: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
}

/// Largest-remainder apportionment of `n` samples over the split fractions.
pub fn split_counts(n: usize, fractions: (f64, f64, f64)) -> [usize; 3] {
    let fracs = [fractions.0, fractions.1, fractions.2];
    let mut counts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    let mut assigned = 0;
    for i in 0..3 {
        let exact = fracs[i] * n as f64;
        counts[i] = exact.floor() as usize;
        remainders[i] = exact - exact.floor();
        assigned += counts[i];
    }
    let mut order: Vec<usize> = (0..3).collect();
    // ties broken by split order: train, then val, then test
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Assemble stratified train/val/test matrices from manifest entries and a
/// feature cache. Per class, a seeded permutation picks `min(cap, n)`
/// entries and the split is apportioned by largest remainder; no digest
/// lands in two splits.
pub fn build_dataset(
    entries: &[ManifestEntry],
    spec: &DatasetSpec,
    cache: &FeatureCache,
) -> Result<Dataset, CorpusError> {
    let class_names: Vec<String> = spec.task.classes().iter().map(|s| s.to_string()).collect();
    let by_digest = cache.index_by_digest();

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, entry) in entries.iter().enumerate() {
        if let Some(class) = spec.task.class_of(entry) {
            let idx = class_names.iter().position(|c| c == class).unwrap();
            per_class[idx].push(i);
        }
    }

    let mut sets = [LabeledSet::default(), LabeledSet::default(), LabeledSet::default()];
    let mut rows: [Vec<Vec<f64>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (class_idx, indices) in per_class.iter_mut().enumerate() {
        let class = &class_names[class_idx];
        if indices.is_empty() {
            return Err(CorpusError::InsufficientClass(class.clone()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a64(class));
        indices.shuffle(&mut rng);
        let cap = spec.caps.get(class).copied().unwrap_or(usize::MAX);
        indices.truncate(cap);
        let counts = split_counts(indices.len(), spec.split);
        let mut cursor = 0;
        for (split, &count) in counts.iter().enumerate() {
            for &entry_idx in &indices[cursor..cursor + count] {
                let entry = &entries[entry_idx];
                let mut digest = [0u8; 32];
                hex::decode_to_slice(&entry.sha256, &mut digest).map_err(|_| {
                    CorpusError::BadCache(format!("undecodable digest for {}", entry.path))
                })?;
                let row = by_digest.get(&digest).ok_or_else(|| {
                    CorpusError::BadCache(format!("no cache row for {}", entry.path))
                })?;
                rows[split].push(cache.row(*row).iter().map(|&v| v as f64).collect());
                sets[split].labels.push(class_idx);
                sets[split].digests.push(entry.sha256.clone());
            }
            cursor += count;
        }
    }
    let [mut train, mut val, mut test] = sets;
    let [r_train, r_val, r_test] = rows;
    train.features = Matrix::from_rows(&r_train);
    val.features = Matrix::from_rows(&r_val);
    test.features = Matrix::from_rows(&r_test);
    Ok(Dataset {
        class_names,
        train,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::cache::{cache_features, ExtractMode};
    use crate::corpus::synth::{generate_synthetic_corpus, CorpusProfile};

    #[test]
    fn split_counts_100_is_70_15_15() {
        assert_eq!(split_counts(100, (0.70, 0.15, 0.15)), [70, 15, 15]);
    }

    #[test]
    fn split_counts_exhaustive_and_ordered() {
        for n in 0..200 {
            let c = split_counts(n, (0.70, 0.15, 0.15));
            assert_eq!(c[0] + c[1] + c[2], n);
        }
    }

    fn small_dataset(seed: u64) -> (tempfile::TempDir, Vec<ManifestEntry>, FeatureCache) {
        let dir = tempfile::tempdir().unwrap();
        let entries =
            generate_synthetic_corpus(dir.path(), &CorpusProfile::balanced(10), seed).unwrap();
        let cache = cache_features(&dir.path().join("manifest.jsonl"), &entries, ExtractMode::Vector)
            .cache;
        (dir, entries, cache)
    }

    #[test]
    fn caps_and_determinism() {
        let (_dir, entries, cache) = small_dataset(42);
        let mut spec = DatasetSpec::new(Task::MalwareDetection, 7);
        spec.caps.insert("malicious".to_string(), 4);
        let a = build_dataset(&entries, &spec, &cache).unwrap();
        let b = build_dataset(&entries, &spec, &cache).unwrap();
        let total_malicious = a
            .train
            .labels
            .iter()
            .chain(&a.val.labels)
            .chain(&a.test.labels)
            .filter(|&&l| l == 1)
            .count();
        assert_eq!(total_malicious, 4);
        assert_eq!(a.train.digests, b.train.digests);
        assert_eq!(a.test.digests, b.test.digests);
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let (_dir, entries, cache) = small_dataset(11);
        let spec = DatasetSpec::new(Task::BilayerEval, 3);
        let ds = build_dataset(&entries, &spec, &cache).unwrap();
        let mut all: Vec<&String> = ds
            .train
            .digests
            .iter()
            .chain(&ds.val.digests)
            .chain(&ds.test.digests)
            .collect();
        let total = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), total, "digest appears in two splits");
        assert_eq!(total, entries.len());
    }

    #[test]
    fn missing_class_is_insufficient() {
        let dir = tempfile::tempdir().unwrap();
        let profile = CorpusProfile {
            n_benign: 5,
            n_trojan: 5,
            ..Default::default()
        };
        let entries = generate_synthetic_corpus(dir.path(), &profile, 1).unwrap();
        let cache = cache_features(&dir.path().join("manifest.jsonl"), &entries, ExtractMode::Vector)
            .cache;
        let spec = DatasetSpec::new(Task::FamilyClassification, 1);
        match build_dataset(&entries, &spec, &cache) {
            Err(CorpusError::InsufficientClass(c)) => assert_eq!(c, "worm"),
            other => panic!("expected InsufficientClass, got {other:?}"),
        }
    }
}
