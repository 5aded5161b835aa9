//! From-scratch second-order gradient boosting for binary and multiclass
//! classification. Two presets stand in for the XGBoost and LightGBM roles.

pub mod tree;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::features::hashing::fnv1a64;
use crate::matrix::Matrix;
pub use tree::{find_best_split, Node, Tree};
use tree::TreeBuilder;

pub const GBDT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda_l2: f64,
    /// Fraction of feature columns considered per tree, in (0, 1].
    pub feature_subsample: f64,
    pub num_classes: usize,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            num_rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 20,
            lambda_l2: 1.0,
            feature_subsample: 1.0,
            num_classes: 2,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn xgboost_like() -> Self {
        Self::default()
    }

    pub fn lightgbm_like() -> Self {
        Self {
            max_depth: 8,
            min_samples_leaf: 20,
            feature_subsample: 0.8,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: u32,
    /// `trees[round][class]`; binary models keep one tree per round.
    pub trees: Vec<Vec<Tree>>,
    pub base_score: Vec<f64>,
    pub config: GbdtConfig,
    pub label_schema: Vec<String>,
    pub input_width: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn validate_training_inputs(
    features: &Matrix,
    labels: &[usize],
    config: &GbdtConfig,
) -> Result<(), ModelError> {
    if features.rows != labels.len() {
        return Err(ModelError::ShapeMismatch {
            expected: features.rows,
            actual: labels.len(),
        });
    }
    let mut counts = vec![0usize; config.num_classes];
    for &l in labels {
        if l >= config.num_classes {
            return Err(ModelError::DegenerateLabels(format!(
                "label {l} out of range for {} classes",
                config.num_classes
            )));
        }
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(ModelError::DegenerateLabels(format!(
            "class {missing} has no samples"
        )));
    }
    Ok(())
}

fn subsample_features(width: usize, config: &GbdtConfig, round: usize, class: usize) -> Vec<usize> {
    if config.feature_subsample >= 1.0 {
        return (0..width).collect();
    }
    let take = ((config.feature_subsample * width as f64).ceil() as usize).clamp(1, width);
    let mut ids: Vec<usize> = (0..width).collect();
    let salt = fnv1a64(&format!("tree/{round}/{class}"));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ salt);
    ids.shuffle(&mut rng);
    ids.truncate(take);
    ids.sort_unstable();
    ids
}

struct Scores {
    // rows x classes (binary stores the single logit in column 0)
    data: Matrix,
    num_classes: usize,
}

impl Scores {
    fn new(rows: usize, num_classes: usize, base: &[f64]) -> Self {
        let cols = if num_classes == 2 { 1 } else { num_classes };
        let mut data = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                data.set(i, j, base[j]);
            }
        }
        Self { data, num_classes }
    }

    fn loss(&self, labels: &[usize]) -> f64 {
        let n = labels.len();
        let mut total = 0.0;
        if self.num_classes == 2 {
            for (i, &y) in labels.iter().enumerate() {
                let p = clamp_prob(sigmoid(self.data.get(i, 0)));
                total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
            }
        } else {
            let mut probs = vec![0.0; self.num_classes];
            for (i, &y) in labels.iter().enumerate() {
                softmax_into(self.data.row(i), &mut probs);
                total -= clamp_prob(probs[y]).ln();
            }
        }
        total / n as f64
    }
}

/// Train a boosted-tree classifier. Deterministic given (data, config, seed).
pub fn gbdt_train(
    features: &Matrix,
    labels: &[usize],
    config: &GbdtConfig,
    label_schema: Vec<String>,
    validation: Option<(&Matrix, &[usize])>,
) -> Result<(GbdtModel, TrainLog), ModelError> {
    validate_training_inputs(features, labels, config)?;
    let n = features.rows;
    let width = features.cols;
    let k = config.num_classes;
    let trees_per_round = if k == 2 { 1 } else { k };
    let base_score = vec![0.0; trees_per_round];

    let mut model = GbdtModel {
        version: GBDT_FORMAT_VERSION,
        trees: Vec::with_capacity(config.num_rounds),
        base_score: base_score.clone(),
        config: config.clone(),
        label_schema,
        input_width: width,
    };
    let mut scores = Scores::new(n, k, &base_score);
    let mut val_scores = validation.map(|(vx, _)| Scores::new(vx.rows, k, &base_score));
    let mut log = TrainLog {
        train_loss: Vec::with_capacity(config.num_rounds),
        val_loss: validation.map(|_| Vec::with_capacity(config.num_rounds)),
    };

    let mut gradients = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    for round in 0..config.num_rounds {
        let mut round_trees = Vec::with_capacity(trees_per_round);
        if k == 2 {
            for i in 0..n {
                let p = sigmoid(scores.data.get(i, 0));
                gradients[i] = p - labels[i] as f64;
                hessians[i] = p * (1.0 - p);
            }
            let feature_ids = subsample_features(width, config, round, 0);
            let tree = TreeBuilder {
                features,
                gradients: &gradients,
                hessians: &hessians,
                config,
                feature_ids: &feature_ids,
            }
            .build();
            for i in 0..n {
                let delta = tree.predict(features.row(i));
                scores.data.data[i * scores.data.cols] += delta;
            }
            if let (Some(vs), Some((vx, _))) = (&mut val_scores, validation) {
                for i in 0..vx.rows {
                    vs.data.data[i * vs.data.cols] += tree.predict(vx.row(i));
                }
            }
            round_trees.push(tree);
        } else {
            let mut probs = Matrix::zeros(n, k);
            for i in 0..n {
                let row = scores.data.row(i).to_vec();
                softmax_into(&row, probs.row_mut(i));
            }
            for class in 0..k {
                for i in 0..n {
                    let p = probs.get(i, class);
                    let y = (labels[i] == class) as u8 as f64;
                    gradients[i] = p - y;
                    hessians[i] = p * (1.0 - p);
                }
                let feature_ids = subsample_features(width, config, round, class);
                let tree = TreeBuilder {
                    features,
                    gradients: &gradients,
                    hessians: &hessians,
                    config,
                    feature_ids: &feature_ids,
                }
                .build();
                for i in 0..n {
                    let delta = tree.predict(features.row(i));
                    let cur = scores.data.get(i, class);
                    scores.data.set(i, class, cur + delta);
                }
                if let (Some(vs), Some((vx, _))) = (&mut val_scores, validation) {
                    for i in 0..vx.rows {
                        let cur = vs.data.get(i, class);
                        vs.data.set(i, class, cur + tree.predict(vx.row(i)));
                    }
                }
                round_trees.push(tree);
            }
        }
        model.trees.push(round_trees);
        log.train_loss.push(scores.loss(labels));
        if let (Some(vs), Some((_, vy)), Some(vl)) =
            (&val_scores, validation, log.val_loss.as_mut())
        {
            vl.push(vs.loss(vy));
        }
    }
    Ok((model, log))
}

/// Per-row class probabilities; rows sum to 1.
pub fn gbdt_predict_proba(model: &GbdtModel, features: &Matrix) -> Result<Matrix, ModelError> {
    if features.cols != model.input_width {
        return Err(ModelError::ShapeMismatch {
            expected: model.input_width,
            actual: features.cols,
        });
    }
    let k = model.config.num_classes;
    let mut out = Matrix::zeros(features.rows, k);
    for i in 0..features.rows {
        let row = features.row(i);
        if k == 2 {
            let mut score = model.base_score[0];
            for round in &model.trees {
                score += round[0].predict(row);
            }
            let p = sigmoid(score);
            out.set(i, 0, 1.0 - p);
            out.set(i, 1, p);
        } else {
            let mut scores = model.base_score.clone();
            for round in &model.trees {
                for (class, tree) in round.iter().enumerate() {
                    scores[class] += tree.predict(row);
                }
            }
            softmax_into(&scores, out.row_mut(i));
        }
    }
    Ok(out)
}

impl GbdtModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        serde_json::from_str(json).map_err(|e| ModelError::Serialization(e.to_string()))
    }

    pub fn predicted_labels(&self, features: &Matrix) -> Result<Vec<usize>, ModelError> {
        let probs = gbdt_predict_proba(self, features)?;
        Ok((0..probs.rows)
            .map(|i| {
                let row = probs.row(i);
                row.iter()
                    .enumerate()
                    .max_by(|(ai, av), (bi, bv)| av.partial_cmp(bv).unwrap().then(bi.cmp(ai)))
                    .map(|(idx, _)| idx)
                    .unwrap()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn schema2() -> Vec<String> {
        vec!["neg".to_string(), "pos".to_string()]
    }

    #[test]
    fn stump_leaf_values_match_closed_form() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let y = [0, 1];
        let config = GbdtConfig {
            num_rounds: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            lambda_l2: 1.0,
            ..GbdtConfig::default()
        };
        let (model, _) = gbdt_train(&x, &y, &config, schema2(), None).unwrap();
        let tree = &model.trees[0][0];
        // At base score 0: p = 0.5, g = +/-0.5, h = 0.25.
        let expected = 0.1 * 0.5 / (0.25 + 1.0);
        match &tree.nodes[0] {
            Node::Split {
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(*threshold, 0.5);
                let (Node::Leaf { value: lv }, Node::Leaf { value: rv }) =
                    (&tree.nodes[*left], &tree.nodes[*right])
                else {
                    panic!("expected leaves");
                };
                assert!((lv + expected).abs() < 1e-12, "left leaf {lv}");
                assert!((rv - expected).abs() < 1e-12, "right leaf {rv}");
            }
            _ => panic!("expected a stump"),
        }
        let probs = gbdt_predict_proba(&model, &x).unwrap();
        assert!(probs.get(0, 1) < 0.5);
        assert!(probs.get(1, 1) > 0.5);
    }

    #[test]
    fn identical_labels_are_degenerate() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let err = gbdt_train(&x, &[1, 1], &GbdtConfig::default(), schema2(), None).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateLabels(_)));
    }

    fn blob_dataset(seed: u64, n: usize) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let center = if label == 0 { -2.0 } else { 2.0 };
            rows.push(vec![
                center + rng.random_range(-1.0..1.0),
                center + rng.random_range(-1.0..1.0),
            ]);
            labels.push(label);
        }
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn separable_blobs_reach_perfect_training_accuracy() {
        let (x, y) = blob_dataset(9, 200);
        let config = GbdtConfig {
            num_rounds: 50,
            min_samples_leaf: 5,
            ..GbdtConfig::default()
        };
        let (model, log) = gbdt_train(&x, &y, &config, schema2(), None).unwrap();
        let predicted = model.predicted_labels(&x).unwrap();
        assert_eq!(predicted, y);
        for w in log.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_round_binary_is_uniform() {
        let x = Matrix::from_rows(&[vec![0.5], vec![-3.0]]);
        let config = GbdtConfig {
            num_rounds: 0,
            ..GbdtConfig::default()
        };
        let (model, _) = gbdt_train(&x, &[0, 1], &config, schema2(), None).unwrap();
        let probs = gbdt_predict_proba(&model, &x).unwrap();
        for i in 0..2 {
            assert_eq!(probs.get(i, 0), 0.5);
            assert_eq!(probs.get(i, 1), 0.5);
        }
    }

    #[test]
    fn zero_round_multiclass_is_uniform() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let config = GbdtConfig {
            num_rounds: 0,
            num_classes: 3,
            ..GbdtConfig::default()
        };
        let schema = vec!["a".into(), "b".into(), "c".into()];
        let (model, _) = gbdt_train(&x, &[0, 1, 2], &config, schema, None).unwrap();
        let probs = gbdt_predict_proba(&model, &x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((probs.get(i, j) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let (x, y) = blob_dataset(4, 60);
        let config = GbdtConfig {
            num_rounds: 10,
            min_samples_leaf: 2,
            ..GbdtConfig::default()
        };
        let (model, _) = gbdt_train(&x, &y, &config, schema2(), None).unwrap();
        let probs = gbdt_predict_proba(&model, &x).unwrap();
        for i in 0..probs.rows {
            let sum: f64 = probs.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(probs.row(i).iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn serialization_round_trip_and_determinism() {
        let (x, y) = blob_dataset(13, 80);
        let config = GbdtConfig {
            num_rounds: 5,
            min_samples_leaf: 2,
            feature_subsample: 0.5,
            seed: 3,
            ..GbdtConfig::default()
        };
        let (m1, _) = gbdt_train(&x, &y, &config, schema2(), None).unwrap();
        let (m2, _) = gbdt_train(&x, &y, &config, schema2(), None).unwrap();
        assert_eq!(m1.to_json(), m2.to_json());
        let reloaded = GbdtModel::from_json(&m1.to_json()).unwrap();
        assert_eq!(reloaded, m1);
        assert_eq!(reloaded.to_json(), m1.to_json());
    }

    #[test]
    fn monotone_feature_transform_preserves_predictions() {
        let (x, y) = blob_dataset(21, 100);
        let cubed = Matrix::from_rows(
            &(0..x.rows)
                .map(|i| x.row(i).iter().map(|v| v.powi(3)).collect())
                .collect::<Vec<_>>(),
        );
        let config = GbdtConfig {
            num_rounds: 20,
            min_samples_leaf: 3,
            ..GbdtConfig::default()
        };
        let (m1, _) = gbdt_train(&x, &y, &config, schema2(), None).unwrap();
        let (m2, _) = gbdt_train(&cubed, &y, &config, schema2(), None).unwrap();
        assert_eq!(
            m1.predicted_labels(&x).unwrap(),
            m2.predicted_labels(&cubed).unwrap()
        );
    }

    #[test]
    fn shape_mismatch_on_predict() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let config = GbdtConfig {
            num_rounds: 1,
            min_samples_leaf: 1,
            ..GbdtConfig::default()
        };
        let (model, _) = gbdt_train(&x, &[0, 1], &config, schema2(), None).unwrap();
        let bad = Matrix::from_rows(&[vec![0.0]]);
        assert!(matches!(
            gbdt_predict_proba(&model, &bad),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }
}
