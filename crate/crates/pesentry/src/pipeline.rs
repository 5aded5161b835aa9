//! Two model topologies over the same three-way verdict space: a cascade
//! that gates a ransomware stage behind a malware stage, and a flat
//! three-class benchmark.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::ModelError;
use crate::features::hashing::fnv1a64;
use crate::gbdt::{gbdt_predict_proba, gbdt_train, GbdtConfig, GbdtModel, TrainLog};
use crate::matrix::Matrix;
use crate::mlp::{mlp_predict_proba, mlp_train, MlpConfig, MlpModel};
use crate::pe::sha256_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    GbdtXgbLike,
    GbdtLgbmLike,
    Mlp,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::GbdtXgbLike => "xgb-like",
            ModelFamily::GbdtLgbmLike => "lgbm-like",
            ModelFamily::Mlp => "mlp",
        }
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "xgb-like" | "xgb" => Ok(ModelFamily::GbdtXgbLike),
            "lgbm-like" | "lgbm" => Ok(ModelFamily::GbdtLgbmLike),
            "mlp" => Ok(ModelFamily::Mlp),
            other => Err(format!(
                "unknown model family {other:?}, expected xgb-like, lgbm-like or mlp"
            )),
        }
    }
}

/// Knobs shared by every trainer call. `rounds` means boosting rounds for
/// the tree families and epochs for the MLP.
#[derive(Debug, Clone)]
pub struct TrainerSettings {
    pub family: ModelFamily,
    pub rounds: usize,
    pub min_samples_leaf: usize,
    pub mlp_hidden: Vec<usize>,
    pub seed: u64,
}

impl TrainerSettings {
    pub fn new(family: ModelFamily, seed: u64) -> Self {
        Self {
            family,
            rounds: 40,
            min_samples_leaf: 5,
            mlp_hidden: vec![64, 32],
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Gbdt(GbdtModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn input_width(&self) -> usize {
        match self {
            TrainedModel::Gbdt(m) => m.input_width,
            TrainedModel::Mlp(m) => m.config.layer_sizes[0],
        }
    }

    pub fn label_schema(&self) -> &[String] {
        match self {
            TrainedModel::Gbdt(m) => &m.label_schema,
            TrainedModel::Mlp(m) => &m.label_schema,
        }
    }

    pub fn predict_proba(&self, features: &Matrix) -> Result<Matrix, ModelError> {
        match self {
            TrainedModel::Gbdt(m) => gbdt_predict_proba(m, features),
            TrainedModel::Mlp(m) => mlp_predict_proba(m, features),
        }
    }

    pub fn to_json(&self) -> String {
        let (family, inner) = match self {
            TrainedModel::Gbdt(m) => ("gbdt", m.to_json()),
            TrainedModel::Mlp(m) => ("mlp", m.to_json()),
        };
        let model: serde_json::Value = serde_json::from_str(&inner).expect("model json");
        serde_json::json!({ "family": family, "model": model }).to_string()
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(json).map_err(|e| ModelError::Serialization(e.to_string()))?;
        let family = value["family"].as_str().unwrap_or_default().to_string();
        let inner = value["model"].to_string();
        match family.as_str() {
            "gbdt" => Ok(TrainedModel::Gbdt(GbdtModel::from_json(&inner)?)),
            "mlp" => Ok(TrainedModel::Mlp(MlpModel::from_json(&inner)?)),
            other => Err(ModelError::Serialization(format!(
                "unknown model family tag {other:?}"
            ))),
        }
    }
}

/// Train one model on an already-assembled label view.
pub fn train_model(
    features: &Matrix,
    labels: &[usize],
    schema: Vec<String>,
    settings: &TrainerSettings,
    validation: Option<(&Matrix, &[usize])>,
) -> Result<(TrainedModel, TrainLog), ModelError> {
    let classes = schema.len();
    match settings.family {
        ModelFamily::GbdtXgbLike | ModelFamily::GbdtLgbmLike => {
            let mut config = if settings.family == ModelFamily::GbdtXgbLike {
                GbdtConfig::xgboost_like()
            } else {
                GbdtConfig::lightgbm_like()
            };
            config.num_rounds = settings.rounds;
            config.min_samples_leaf = settings.min_samples_leaf;
            config.num_classes = classes;
            config.seed = settings.seed;
            let (model, log) = gbdt_train(features, labels, &config, schema, validation)?;
            Ok((TrainedModel::Gbdt(model), log))
        }
        ModelFamily::Mlp => {
            let mut config = MlpConfig::with_hidden(features.cols, &settings.mlp_hidden, classes);
            config.epochs = settings.rounds;
            config.seed = settings.seed;
            let (model, log) = mlp_train(features, labels, &config, schema, validation)?;
            Ok((TrainedModel::Mlp(model), log))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictLabel {
    Benign,
    MalwareOther,
    Ransomware,
}

impl VerdictLabel {
    pub fn name(self) -> &'static str {
        match self {
            VerdictLabel::Benign => "benign",
            VerdictLabel::MalwareOther => "malware_other",
            VerdictLabel::Ransomware => "ransomware",
        }
    }

    /// Index into the shared three-way schema.
    pub fn index(self) -> usize {
        match self {
            VerdictLabel::Benign => 0,
            VerdictLabel::MalwareOther => 1,
            VerdictLabel::Ransomware => 2,
        }
    }
}

impl fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub malware_score: f64,
    /// 0 whenever the ransomware stage did not run.
    pub ransomware_score: f64,
}

#[derive(Debug)]
pub struct BiLayeredModel {
    pub stage1: TrainedModel,
    pub stage2: TrainedModel,
    pub threshold1: f64,
    pub threshold2: f64,
    stage2_evaluations: AtomicU64,
}

impl BiLayeredModel {
    pub fn new(stage1: TrainedModel, stage2: TrainedModel) -> Result<Self, ModelError> {
        if stage1.input_width() != stage2.input_width() {
            return Err(ModelError::SchemaMismatch {
                expected: stage1.input_width(),
                actual: stage2.input_width(),
            });
        }
        Ok(Self {
            stage1,
            stage2,
            threshold1: 0.5,
            threshold2: 0.5,
            stage2_evaluations: AtomicU64::new(0),
        })
    }

    /// How many rows the ransomware stage has scored so far. Exposed so
    /// tests can observe the gate short-circuit.
    pub fn stage2_evaluation_count(&self) -> u64 {
        self.stage2_evaluations.load(Ordering::SeqCst)
    }
}

fn check_width(width: usize, expected: usize) -> Result<(), ModelError> {
    if width != expected {
        return Err(ModelError::SchemaMismatch {
            expected,
            actual: width,
        });
    }
    Ok(())
}

pub fn bilayer_predict_batch(
    m: &BiLayeredModel,
    features: &Matrix,
) -> Result<Vec<Verdict>, ModelError> {
    check_width(features.cols, m.stage1.input_width())?;
    let p1 = m.stage1.predict_proba(features)?;
    let passing: Vec<usize> = (0..features.rows)
        .filter(|&i| p1.get(i, 1) >= m.threshold1)
        .collect();
    let mut verdicts: Vec<Verdict> = (0..features.rows)
        .map(|i| Verdict {
            label: VerdictLabel::Benign,
            malware_score: p1.get(i, 1),
            ransomware_score: 0.0,
        })
        .collect();
    if !passing.is_empty() {
        let gated = features.select_rows(&passing);
        let p2 = m.stage2.predict_proba(&gated)?;
        m.stage2_evaluations
            .fetch_add(passing.len() as u64, Ordering::SeqCst);
        for (slot, &row) in passing.iter().enumerate() {
            let score = p2.get(slot, 1);
            verdicts[row].ransomware_score = score;
            verdicts[row].label = if score >= m.threshold2 {
                VerdictLabel::Ransomware
            } else {
                VerdictLabel::MalwareOther
            };
        }
    }
    Ok(verdicts)
}

pub fn bilayer_predict(m: &BiLayeredModel, fv: &[f64]) -> Result<Verdict, ModelError> {
    let features = Matrix::from_rows(&[fv.to_vec()]);
    Ok(bilayer_predict_batch(m, &features)?.remove(0))
}

#[derive(Debug)]
pub struct BenchmarkModel {
    pub model: TrainedModel,
}

impl BenchmarkModel {
    pub fn new(model: TrainedModel) -> Result<Self, ModelError> {
        let expected = Task::BilayerEval.classes();
        if model.label_schema() != expected {
            return Err(ModelError::Serialization(format!(
                "benchmark model needs schema {expected:?}, got {:?}",
                model.label_schema()
            )));
        }
        Ok(Self { model })
    }
}

pub fn benchmark_predict_batch(
    m: &BenchmarkModel,
    features: &Matrix,
) -> Result<Vec<Verdict>, ModelError> {
    check_width(features.cols, m.model.input_width())?;
    let probs = m.model.predict_proba(features)?;
    Ok((0..features.rows)
        .map(|i| {
            let row = probs.row(i);
            // Strict > keeps the earliest class on ties, i.e. schema order.
            let mut best = 0;
            for (j, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = j;
                }
            }
            let label = match best {
                0 => VerdictLabel::Benign,
                1 => VerdictLabel::MalwareOther,
                _ => VerdictLabel::Ransomware,
            };
            Verdict {
                label,
                malware_score: row[1] + row[2],
                ransomware_score: row[2],
            }
        })
        .collect())
}

pub fn benchmark_predict(m: &BenchmarkModel, fv: &[f64]) -> Result<Verdict, ModelError> {
    let features = Matrix::from_rows(&[fv.to_vec()]);
    Ok(benchmark_predict_batch(m, &features)?.remove(0))
}

/// Train the cascade from one three-way labeled set. Labels follow the
/// shared schema: 0 benign, 1 malware_other, 2 ransomware. Stage 1 sees a
/// benign/malicious binarization of all rows; stage 2 sees only the
/// malicious rows relabeled other(0)/ransomware(1).
pub fn train_bilayer(
    features: &Matrix,
    labels: &[usize],
    settings: &TrainerSettings,
) -> Result<BiLayeredModel, ModelError> {
    let stage1_labels: Vec<usize> = labels.iter().map(|&l| usize::from(l != 0)).collect();
    let stage1_schema: Vec<String> = Task::MalwareDetection
        .classes()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let (stage1, _) = train_model(features, &stage1_labels, stage1_schema, settings, None)?;

    let malicious: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    let stage2_features = features.select_rows(&malicious);
    let stage2_labels: Vec<usize> = malicious.iter().map(|&i| usize::from(labels[i] == 2)).collect();
    let stage2_schema: Vec<String> = Task::RansomwareDetection
        .classes()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let stage2_settings = TrainerSettings {
        seed: settings.seed ^ fnv1a64("stage2"),
        ..settings.clone()
    };
    let (stage2, _) = train_model(
        &stage2_features,
        &stage2_labels,
        stage2_schema,
        &stage2_settings,
        None,
    )?;
    BiLayeredModel::new(stage1, stage2)
}

pub fn train_benchmark(
    features: &Matrix,
    labels: &[usize],
    settings: &TrainerSettings,
) -> Result<BenchmarkModel, ModelError> {
    let schema: Vec<String> = Task::BilayerEval
        .classes()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let (model, _) = train_model(features, labels, schema, settings, None)?;
    BenchmarkModel::new(model)
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleFile {
    kind: String,
    threshold1: Option<f64>,
    threshold2: Option<f64>,
    models: Vec<BundleModelRef>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleModelRef {
    role: String,
    path: String,
    sha256: String,
}

fn write_model_file(dir: &Path, name: &str, json: &str) -> Result<String, ModelError> {
    std::fs::write(dir.join(name), json)
        .map_err(|e| ModelError::Serialization(format!("write {name}: {e}")))?;
    Ok(hex::encode(sha256_digest(json.as_bytes())))
}

fn read_model_file(dir: &Path, entry: &BundleModelRef) -> Result<TrainedModel, ModelError> {
    let path = dir.join(&entry.path);
    let json = std::fs::read_to_string(&path)
        .map_err(|e| ModelError::Serialization(format!("read {}: {e}", path.display())))?;
    let digest = hex::encode(sha256_digest(json.as_bytes()));
    if digest != entry.sha256 {
        return Err(ModelError::Serialization(format!(
            "digest mismatch for {}: bundle says {}, file is {digest}",
            entry.path, entry.sha256
        )));
    }
    TrainedModel::from_json(&json)
}

fn write_bundle(dir: &Path, bundle: &BundleFile) -> Result<(), ModelError> {
    let json = serde_json::to_string_pretty(bundle)
        .map_err(|e| ModelError::Serialization(e.to_string()))?;
    std::fs::write(dir.join("bundle.json"), json)
        .map_err(|e| ModelError::Serialization(format!("write bundle.json: {e}")))
}

fn read_bundle(dir: &Path) -> Result<BundleFile, ModelError> {
    let path = dir.join("bundle.json");
    let json = std::fs::read_to_string(&path)
        .map_err(|e| ModelError::Serialization(format!("read {}: {e}", path.display())))?;
    serde_json::from_str(&json).map_err(|e| ModelError::Serialization(e.to_string()))
}

/// Write `stage1.json`, `stage2.json` and a `bundle.json` manifest that
/// references them by relative path and digest.
pub fn save_bilayer(model: &BiLayeredModel, dir: &Path) -> Result<(), ModelError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| ModelError::Serialization(format!("create {}: {e}", dir.display())))?;
    let d1 = write_model_file(dir, "stage1.json", &model.stage1.to_json())?;
    let d2 = write_model_file(dir, "stage2.json", &model.stage2.to_json())?;
    write_bundle(
        dir,
        &BundleFile {
            kind: "bilayer".into(),
            threshold1: Some(model.threshold1),
            threshold2: Some(model.threshold2),
            models: vec![
                BundleModelRef {
                    role: "stage1".into(),
                    path: "stage1.json".into(),
                    sha256: d1,
                },
                BundleModelRef {
                    role: "stage2".into(),
                    path: "stage2.json".into(),
                    sha256: d2,
                },
            ],
        },
    )
}

pub fn load_bilayer(dir: &Path) -> Result<BiLayeredModel, ModelError> {
    let bundle = read_bundle(dir)?;
    if bundle.kind != "bilayer" {
        return Err(ModelError::Serialization(format!(
            "expected a bilayer bundle, found kind {:?}",
            bundle.kind
        )));
    }
    let mut stage1 = None;
    let mut stage2 = None;
    for entry in &bundle.models {
        let model = read_model_file(dir, entry)?;
        match entry.role.as_str() {
            "stage1" => stage1 = Some(model),
            "stage2" => stage2 = Some(model),
            other => {
                return Err(ModelError::Serialization(format!(
                    "unknown bundle role {other:?}"
                )))
            }
        }
    }
    let (stage1, stage2) = match (stage1, stage2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(ModelError::Serialization(
                "bilayer bundle missing a stage model".into(),
            ))
        }
    };
    let mut model = BiLayeredModel::new(stage1, stage2)?;
    model.threshold1 = bundle.threshold1.unwrap_or(0.5);
    model.threshold2 = bundle.threshold2.unwrap_or(0.5);
    Ok(model)
}

pub fn save_benchmark(model: &BenchmarkModel, dir: &Path) -> Result<(), ModelError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| ModelError::Serialization(format!("create {}: {e}", dir.display())))?;
    let digest = write_model_file(dir, "model.json", &model.model.to_json())?;
    write_bundle(
        dir,
        &BundleFile {
            kind: "benchmark".into(),
            threshold1: None,
            threshold2: None,
            models: vec![BundleModelRef {
                role: "model".into(),
                path: "model.json".into(),
                sha256: digest,
            }],
        },
    )
}

pub fn load_benchmark(dir: &Path) -> Result<BenchmarkModel, ModelError> {
    let bundle = read_bundle(dir)?;
    if bundle.kind != "benchmark" {
        return Err(ModelError::Serialization(format!(
            "expected a benchmark bundle, found kind {:?}",
            bundle.kind
        )));
    }
    let entry = bundle
        .models
        .first()
        .ok_or_else(|| ModelError::Serialization("benchmark bundle has no model".into()))?;
    BenchmarkModel::new(read_model_file(dir, entry)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::tree::{Node, Tree};

    /// A one-leaf GBDT whose sigmoid output is constant.
    fn stub_binary(p: f64, schema: [&str; 2], width: usize) -> TrainedModel {
        let logit = (p / (1.0 - p)).ln();
        let mut config = GbdtConfig::default();
        config.num_classes = 2;
        TrainedModel::Gbdt(GbdtModel {
            version: crate::gbdt::GBDT_FORMAT_VERSION,
            trees: vec![vec![Tree {
                nodes: vec![Node::Leaf { value: logit }],
            }]],
            base_score: vec![0.0],
            config,
            label_schema: schema.iter().map(|s| s.to_string()).collect(),
            input_width: width,
        })
    }

    fn stub_bilayer(p1: f64, p2: f64) -> BiLayeredModel {
        BiLayeredModel::new(
            stub_binary(p1, ["benign", "malicious"], 3),
            stub_binary(p2, ["other_malware", "ransomware"], 3),
        )
        .unwrap()
    }

    #[test]
    fn gate_blocks_stage_two_for_benign_scores() {
        let m = stub_bilayer(0.01, 0.99);
        let v = bilayer_predict(&m, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.label, VerdictLabel::Benign);
        assert_eq!(v.ransomware_score, 0.0);
        assert_eq!(m.stage2_evaluation_count(), 0);
    }

    #[test]
    fn high_scores_on_both_stages_give_ransomware() {
        let m = stub_bilayer(0.99, 0.99);
        let v = bilayer_predict(&m, &[0.0; 3]).unwrap();
        assert_eq!(v.label, VerdictLabel::Ransomware);
        assert_eq!(m.stage2_evaluation_count(), 1);
    }

    #[test]
    fn mid_stage_one_low_stage_two_gives_malware_other() {
        let m = stub_bilayer(0.7, 0.3);
        let v = bilayer_predict(&m, &[0.0; 3]).unwrap();
        assert_eq!(v.label, VerdictLabel::MalwareOther);
        assert!((v.malware_score - 0.7).abs() < 1e-9);
        assert!((v.ransomware_score - 0.3).abs() < 1e-9);
    }

    #[test]
    fn raising_threshold_one_never_unbenigns_an_input() {
        let mut m = stub_bilayer(0.6, 0.9);
        let before = bilayer_predict(&m, &[0.0; 3]).unwrap();
        assert_ne!(before.label, VerdictLabel::Benign);
        m.threshold1 = 0.7;
        let after = bilayer_predict(&m, &[0.0; 3]).unwrap();
        assert_eq!(after.label, VerdictLabel::Benign);
        // And a benign verdict stays benign under any higher threshold.
        m.threshold1 = 0.99;
        assert_eq!(
            bilayer_predict(&m, &[0.0; 3]).unwrap().label,
            VerdictLabel::Benign
        );
    }

    #[test]
    fn width_mismatch_is_a_schema_error() {
        let m = stub_bilayer(0.9, 0.9);
        let err = bilayer_predict(&m, &[0.0; 5]).unwrap_err();
        assert!(matches!(err, ModelError::SchemaMismatch { .. }));
    }

    fn three_class_blob_data() -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let jitter = (i % 10) as f64 * 0.01;
            match i % 3 {
                0 => {
                    rows.push(vec![0.0 + jitter, 0.0]);
                    labels.push(0);
                }
                1 => {
                    rows.push(vec![5.0 + jitter, 0.0]);
                    labels.push(1);
                }
                _ => {
                    rows.push(vec![5.0 + jitter, 5.0]);
                    labels.push(2);
                }
            }
        }
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn trained_cascade_separates_three_blob_classes() {
        let (x, y) = three_class_blob_data();
        let mut settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 42);
        settings.rounds = 20;
        let m = train_bilayer(&x, &y, &settings).unwrap();
        let verdicts = bilayer_predict_batch(&m, &x).unwrap();
        let predicted: Vec<usize> = verdicts.iter().map(|v| v.label.index()).collect();
        assert_eq!(predicted, y);
    }

    #[test]
    fn trained_benchmark_separates_three_blob_classes() {
        let (x, y) = three_class_blob_data();
        let mut settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 42);
        settings.rounds = 20;
        let m = train_benchmark(&x, &y, &settings).unwrap();
        let verdicts = benchmark_predict_batch(&m, &x).unwrap();
        let predicted: Vec<usize> = verdicts.iter().map(|v| v.label.index()).collect();
        assert_eq!(predicted, y);
    }

    #[test]
    fn benchmark_tie_breaks_in_schema_order() {
        // All-leaf softmax stub with equal logits per class.
        let mut config = GbdtConfig::default();
        config.num_classes = 3;
        let tree = Tree {
            nodes: vec![Node::Leaf { value: 0.0 }],
        };
        let model = TrainedModel::Gbdt(GbdtModel {
            version: crate::gbdt::GBDT_FORMAT_VERSION,
            trees: vec![vec![tree.clone(), tree.clone(), tree]],
            base_score: vec![0.0; 3],
            config,
            label_schema: Task::BilayerEval
                .classes()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            input_width: 2,
        });
        let m = BenchmarkModel::new(model).unwrap();
        let v = benchmark_predict(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(v.label, VerdictLabel::Benign);
    }

    #[test]
    fn missing_ransomware_class_degenerates_stage_two() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.1], vec![1.1]]);
        let y = vec![0, 1, 0, 1];
        let settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 1);
        let err = train_bilayer(&x, &y, &settings).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateLabels(_)));
    }

    #[test]
    fn benchmark_rejects_two_class_corpus() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.1], vec![1.1]]);
        let y = vec![0, 2, 0, 2];
        let settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 1);
        let err = train_benchmark(&x, &y, &settings).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateLabels(_)));
    }

    #[test]
    fn bundle_round_trip_preserves_predictions() {
        let (x, y) = three_class_blob_data();
        let mut settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 9);
        settings.rounds = 10;
        let bilayer = train_bilayer(&x, &y, &settings).unwrap();
        let benchmark = train_benchmark(&x, &y, &settings).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bi_dir = dir.path().join("bi");
        let bench_dir = dir.path().join("bench");
        save_bilayer(&bilayer, &bi_dir).unwrap();
        save_benchmark(&benchmark, &bench_dir).unwrap();
        let bi2 = load_bilayer(&bi_dir).unwrap();
        let bench2 = load_benchmark(&bench_dir).unwrap();
        assert_eq!(
            bilayer_predict_batch(&bilayer, &x).unwrap(),
            bilayer_predict_batch(&bi2, &x).unwrap()
        );
        assert_eq!(
            benchmark_predict_batch(&benchmark, &x).unwrap(),
            benchmark_predict_batch(&bench2, &x).unwrap()
        );
    }

    #[test]
    fn tampered_model_file_fails_digest_check() {
        let (x, y) = three_class_blob_data();
        let mut settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 9);
        settings.rounds = 5;
        let benchmark = train_benchmark(&x, &y, &settings).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_benchmark(&benchmark, dir.path()).unwrap();
        let path = dir.path().join("model.json");
        let mut contents = std::fs::read_to_string(&path).unwrap();
        contents.push(' ');
        std::fs::write(&path, contents).unwrap();
        let err = load_benchmark(dir.path()).unwrap_err();
        assert!(err.to_string().contains("digest mismatch"));
    }

    #[test]
    fn stage_two_retrain_leaves_stage_one_file_untouched() {
        let (x, y) = three_class_blob_data();
        let mut settings = TrainerSettings::new(ModelFamily::GbdtXgbLike, 3);
        settings.rounds = 10;
        let bilayer = train_bilayer(&x, &y, &settings).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bilayer(&bilayer, dir.path()).unwrap();
        let stage1_before = std::fs::read(dir.path().join("stage1.json")).unwrap();

        let mut retrain = settings.clone();
        retrain.seed = 77;
        let retrained = train_bilayer(&x, &y, &retrain).unwrap();
        let swapped = BiLayeredModel::new(bilayer.stage1.clone(), retrained.stage2).unwrap();
        save_bilayer(&swapped, dir.path()).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("stage1.json")).unwrap(),
            stage1_before
        );
    }
}
