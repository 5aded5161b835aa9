//! Dense ReLU network trained with Adam, standing in for the DNN model
//! family. Training standardizes inputs with train-set statistics and is
//! fully deterministic for a given seed.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::gbdt::TrainLog;
use crate::matrix::Matrix;

pub const MLP_FORMAT_VERSION: u32 = 1;
const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Input, hidden..., output widths.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without validation-loss improvement.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input: usize, classes: usize) -> Self {
        Self {
            layer_sizes: vec![input, 512, 128, classes],
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 128,
            epochs: 30,
            patience: None,
            seed: 0,
        }
    }

    pub fn with_hidden(input: usize, hidden: &[usize], classes: usize) -> Self {
        let mut layer_sizes = vec![input];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(classes);
        Self {
            layer_sizes,
            ..Self::new(input, classes)
        }
    }
}

/// Per-feature (mean, stddev) fitted on training data. Zero-variance
/// features get stddev 1 so standardization stays a bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Matrix) -> Self {
        let (n, d) = (features.rows, features.cols);
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(features.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                let delta = features.get(i, j) - mean[j];
                var[j] += delta * delta;
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, features: &Matrix) -> Matrix {
        let mut out = features.clone();
        for i in 0..out.rows {
            for j in 0..out.cols {
                let v = (out.get(i, j) - self.mean[j]) / self.std[j];
                out.set(i, j, v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `input x output`, row-major.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub version: u32,
    pub layers: Vec<Layer>,
    pub standardizer: Standardizer,
    pub label_schema: Vec<String>,
    pub config: MlpConfig,
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

fn matmul(x: &Matrix, w: &Matrix) -> Matrix {
    assert_eq!(x.cols, w.rows);
    let mut out = Matrix::zeros(x.rows, w.cols);
    for i in 0..x.rows {
        for k in 0..x.cols {
            let xv = x.get(i, k);
            if xv == 0.0 {
                continue;
            }
            let w_row = w.row(k);
            let o_row = out.row_mut(i);
            for (o, &wv) in o_row.iter_mut().zip(w_row) {
                *o += xv * wv;
            }
        }
    }
    out
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

struct ForwardPass {
    /// Post-activation per layer, `activations[0]` being the input.
    activations: Vec<Matrix>,
    probs: Matrix,
}

fn forward(layers: &[Layer], input: &Matrix) -> ForwardPass {
    let mut activations = vec![input.clone()];
    for (li, layer) in layers.iter().enumerate() {
        let mut z = matmul(activations.last().unwrap(), &layer.weights);
        for i in 0..z.rows {
            for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let last = li + 1 == layers.len();
        if !last {
            for v in &mut z.data {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        activations.push(z);
    }
    let probs = softmax_rows(activations.last().unwrap());
    ForwardPass {
        activations,
        probs,
    }
}

fn cross_entropy(probs: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        total -= probs.get(i, y).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln();
    }
    total / labels.len() as f64
}

/// Mean cross-entropy loss and its analytic gradients for one batch of
/// already-standardized inputs.
pub fn mlp_loss_and_gradients(
    layers: &[Layer],
    batch: &Matrix,
    labels: &[usize],
) -> (f64, Vec<LayerGradients>) {
    assert!(!labels.is_empty());
    assert_eq!(batch.rows, labels.len());
    let pass = forward(layers, batch);
    let loss = cross_entropy(&pass.probs, labels);
    let n = labels.len() as f64;

    // dZ for the output layer: (p - onehot)/n.
    let mut dz = pass.probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        let v = dz.get(i, y);
        dz.set(i, y, v - 1.0);
    }
    for v in &mut dz.data {
        *v /= n;
    }

    let mut grads: Vec<LayerGradients> = Vec::with_capacity(layers.len());
    for li in (0..layers.len()).rev() {
        let input = &pass.activations[li];
        // dW = input^T . dZ
        let mut dw = Matrix::zeros(layers[li].weights.rows, layers[li].weights.cols);
        for i in 0..input.rows {
            for k in 0..input.cols {
                let xv = input.get(i, k);
                if xv == 0.0 {
                    continue;
                }
                let dz_row = dz.row(i);
                let dw_row = dw.row_mut(k);
                for (d, &g) in dw_row.iter_mut().zip(dz_row) {
                    *d += xv * g;
                }
            }
        }
        let mut db = vec![0.0; layers[li].bias.len()];
        for i in 0..dz.rows {
            for (b, &g) in db.iter_mut().zip(dz.row(i)) {
                *b += g;
            }
        }
        if li > 0 {
            // dA_{l-1} = dZ . W^T, masked by ReLU activity.
            let mut da = Matrix::zeros(dz.rows, layers[li].weights.rows);
            for i in 0..dz.rows {
                for j in 0..layers[li].weights.cols {
                    let g = dz.get(i, j);
                    if g == 0.0 {
                        continue;
                    }
                    for k in 0..layers[li].weights.rows {
                        let v = da.get(i, k) + g * layers[li].weights.get(k, j);
                        da.set(i, k, v);
                    }
                }
            }
            for (v, &a) in da.data.iter_mut().zip(&pass.activations[li].data) {
                if a <= 0.0 {
                    *v = 0.0;
                }
            }
            dz = da;
        }
        grads.push(LayerGradients {
            weights: dw,
            bias: db,
        });
    }
    grads.reverse();
    (loss, grads)
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], config: &MlpConfig, t: u64) {
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        let bias1 = 1.0 - b1.powi(t as i32);
        let bias2 = 1.0 - b2.powi(t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grads[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
    }
}

pub fn he_uniform_init(layer_sizes: &[usize], seed: u64) -> Vec<Layer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let mut weights = Matrix::zeros(fan_in, fan_out);
            for v in &mut weights.data {
                *v = rng.random_range(-limit..limit);
            }
            Layer {
                weights,
                bias: vec![0.0; fan_out],
            }
        })
        .collect()
}

fn validate(features: &Matrix, labels: &[usize], classes: usize) -> Result<(), ModelError> {
    if features.rows != labels.len() {
        return Err(ModelError::ShapeMismatch {
            expected: features.rows,
            actual: labels.len(),
        });
    }
    let mut counts = vec![0usize; classes];
    for &l in labels {
        if l >= classes {
            return Err(ModelError::DegenerateLabels(format!(
                "label {l} out of range for {classes} classes"
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

/// Train the network. Softmax cross-entropy for any class count (binary
/// included), seeded shuffling, standard Adam with bias correction.
pub fn mlp_train(
    features: &Matrix,
    labels: &[usize],
    config: &MlpConfig,
    label_schema: Vec<String>,
    validation: Option<(&Matrix, &[usize])>,
) -> Result<(MlpModel, TrainLog), ModelError> {
    let classes = *config.layer_sizes.last().unwrap();
    validate(features, labels, classes)?;
    if config.layer_sizes[0] != features.cols {
        return Err(ModelError::ShapeMismatch {
            expected: config.layer_sizes[0],
            actual: features.cols,
        });
    }
    let standardizer = Standardizer::fit(features);
    let x = standardizer.transform(features);
    let val = validation.map(|(vx, vy)| (standardizer.transform(vx), vy));

    let mut layers = he_uniform_init(&config.layer_sizes, config.seed);
    let mut adam_w: Vec<AdamState> = layers
        .iter()
        .map(|l| AdamState::new(l.weights.data.len()))
        .collect();
    let mut adam_b: Vec<AdamState> = layers
        .iter()
        .map(|l| AdamState::new(l.bias.len()))
        .collect();

    let mut log = TrainLog {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: validation.map(|_| Vec::new()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut order: Vec<usize> = (0..x.rows).collect();
    let mut step: u64 = 0;
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;
    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch = x.select_rows(chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, grads) = mlp_loss_and_gradients(&layers, &batch, &batch_labels);
            step += 1;
            for (li, grad) in grads.iter().enumerate() {
                adam_w[li].update(&mut layers[li].weights.data, &grad.weights.data, config, step);
                adam_b[li].update(&mut layers[li].bias, &grad.bias, config, step);
            }
        }
        let pass = forward(&layers, &x);
        log.train_loss.push(cross_entropy(&pass.probs, labels));
        if let Some((vx, vy)) = &val {
            let vloss = cross_entropy(&forward(&layers, vx).probs, vy);
            log.val_loss.as_mut().unwrap().push(vloss);
            if let Some(patience) = config.patience {
                if vloss + 1e-12 < best_val {
                    best_val = vloss;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= patience {
                        break;
                    }
                }
            }
        }
    }
    Ok((
        MlpModel {
            version: MLP_FORMAT_VERSION,
            layers,
            standardizer,
            label_schema,
            config: config.clone(),
        },
        log,
    ))
}

/// Per-row class probabilities on raw (unstandardized) features.
pub fn mlp_predict_proba(model: &MlpModel, features: &Matrix) -> Result<Matrix, ModelError> {
    if features.cols != model.config.layer_sizes[0] {
        return Err(ModelError::ShapeMismatch {
            expected: model.config.layer_sizes[0],
            actual: features.cols,
        });
    }
    let x = model.standardizer.transform(features);
    Ok(forward(&model.layers, &x).probs)
}

impl MlpModel {
    pub fn predicted_labels(&self, features: &Matrix) -> Result<Vec<usize>, ModelError> {
        let probs = mlp_predict_proba(self, features)?;
        Ok((0..probs.rows)
            .map(|i| {
                probs.row(i)
                    .iter()
                    .enumerate()
                    .max_by(|(ai, av), (bi, bv)| av.partial_cmp(bv).unwrap().then(bi.cmp(ai)))
                    .map(|(idx, _)| idx)
                    .unwrap()
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MlpModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let file: MlpModelFile =
            serde_json::from_str(json).map_err(|e| ModelError::Serialization(e.to_string()))?;
        file.try_into()
    }
}

fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode_f64s(b64: &str) -> Result<Vec<f64>, ModelError> {
    let bytes = B64
        .decode(b64)
        .map_err(|e| ModelError::Serialization(e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(ModelError::Serialization("weight blob not 8-aligned".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// On-disk shape: weights and biases as base64 little-endian f64 blobs.
#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: String,
    bias: String,
}

#[derive(Serialize, Deserialize)]
struct MlpModelFile {
    version: u32,
    layers: Vec<LayerFile>,
    mean: String,
    std: String,
    label_schema: Vec<String>,
    config: MlpConfig,
}

impl From<&MlpModel> for MlpModelFile {
    fn from(m: &MlpModel) -> Self {
        Self {
            version: m.version,
            layers: m
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.weights.rows,
                    cols: l.weights.cols,
                    weights: encode_f64s(&l.weights.data),
                    bias: encode_f64s(&l.bias),
                })
                .collect(),
            mean: encode_f64s(&m.standardizer.mean),
            std: encode_f64s(&m.standardizer.std),
            label_schema: m.label_schema.clone(),
            config: m.config.clone(),
        }
    }
}

impl TryFrom<MlpModelFile> for MlpModel {
    type Error = ModelError;

    fn try_from(f: MlpModelFile) -> Result<Self, ModelError> {
        let mut layers = Vec::with_capacity(f.layers.len());
        for lf in &f.layers {
            let data = decode_f64s(&lf.weights)?;
            if data.len() != lf.rows * lf.cols {
                return Err(ModelError::Serialization("weight blob size mismatch".into()));
            }
            layers.push(Layer {
                weights: Matrix {
                    data,
                    rows: lf.rows,
                    cols: lf.cols,
                },
                bias: decode_f64s(&lf.bias)?,
            });
        }
        Ok(MlpModel {
            version: f.version,
            layers,
            standardizer: Standardizer {
                mean: decode_f64s(&f.mean)?,
                std: decode_f64s(&f.std)?,
            },
            label_schema: f.label_schema,
            config: f.config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> (Matrix, Vec<usize>) {
        (
            Matrix::from_rows(&[
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ]),
            vec![0, 1, 1, 0],
        )
    }

    #[test]
    fn xor_reaches_perfect_training_accuracy() {
        let (x, y) = xor_data();
        let mut config = MlpConfig::with_hidden(2, &[8], 2);
        config.epochs = 2000;
        config.batch_size = 4;
        config.seed = 1;
        let (model, _) = mlp_train(&x, &y, &config, vec!["a".into(), "b".into()], None).unwrap();
        assert_eq!(model.predicted_labels(&x).unwrap(), y);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (x, y) = xor_data();
        let mut config = MlpConfig::with_hidden(2, &[4], 2);
        config.epochs = 0;
        config.seed = 5;
        let (model, log) = mlp_train(&x, &y, &config, vec!["a".into(), "b".into()], None).unwrap();
        let std = Standardizer::fit(&x);
        let init = he_uniform_init(&config.layer_sizes, 5);
        assert_eq!(model.layers, init);
        assert_eq!(model.standardizer, std);
        assert!(log.train_loss.is_empty());
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let (x, y) = xor_data();
        let mut config = MlpConfig::with_hidden(2, &[4], 2);
        config.epochs = 3;
        config.learning_rate = 0.0;
        config.seed = 7;
        let (model, _) = mlp_train(&x, &y, &config, vec!["a".into(), "b".into()], None).unwrap();
        assert_eq!(model.layers, he_uniform_init(&config.layer_sizes, 7));
    }

    #[test]
    fn all_zero_weights_give_uniform_probabilities() {
        let layers = vec![Layer {
            weights: Matrix::zeros(3, 2),
            bias: vec![0.0; 2],
        }];
        let model = MlpModel {
            version: MLP_FORMAT_VERSION,
            layers,
            standardizer: Standardizer {
                mean: vec![0.0; 3],
                std: vec![1.0; 3],
            },
            label_schema: vec!["a".into(), "b".into()],
            config: MlpConfig {
                layer_sizes: vec![3, 2],
                ..MlpConfig::new(3, 2)
            },
        };
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]);
        let probs = mlp_predict_proba(&model, &x).unwrap();
        assert_eq!(probs.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn duplicated_input_rows_predict_identically() {
        let (x, y) = xor_data();
        let mut config = MlpConfig::with_hidden(2, &[6], 2);
        config.epochs = 50;
        let (model, _) = mlp_train(&x, &y, &config, vec!["a".into(), "b".into()], None).unwrap();
        let dup = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let probs = mlp_predict_proba(&model, &dup).unwrap();
        assert_eq!(probs.row(0), probs.row(1));
    }

    /// Central finite-difference oracle over every parameter.
    fn gradient_check(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = he_uniform_init(&[3, 4, 2], seed);
        let batch = Matrix::from_rows(
            &(0..5)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect::<Vec<_>>(),
        );
        let labels: Vec<usize> = (0..5).map(|_| rng.random_range(0..2)).collect();
        let (_, grads) = mlp_loss_and_gradients(&layers, &batch, &labels);
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for li in 0..layers.len() {
            for wi in 0..layers[li].weights.data.len() {
                let orig = layers[li].weights.data[wi];
                layers[li].weights.data[wi] = orig + h;
                let (lp, _) = mlp_loss_and_gradients(&layers, &batch, &labels);
                layers[li].weights.data[wi] = orig - h;
                let (lm, _) = mlp_loss_and_gradients(&layers, &batch, &labels);
                layers[li].weights.data[wi] = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads[li].weights.data[wi];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                max_rel = max_rel.max((numeric - analytic).abs() / denom);
            }
            for bi in 0..layers[li].bias.len() {
                let orig = layers[li].bias[bi];
                layers[li].bias[bi] = orig + h;
                let (lp, _) = mlp_loss_and_gradients(&layers, &batch, &labels);
                layers[li].bias[bi] = orig - h;
                let (lm, _) = mlp_loss_and_gradients(&layers, &batch, &labels);
                layers[li].bias[bi] = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let denom = numeric.abs().max(grads[li].bias[bi].abs()).max(1e-8);
                max_rel = max_rel.max((numeric - grads[li].bias[bi]).abs() / denom);
            }
        }
        max_rel
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for seed in 0..5 {
            let err = gradient_check(seed);
            assert!(err < 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn dead_relu_unit_has_zero_incoming_gradient() {
        // Hidden unit 0 gets a large negative bias: pre-activation < 0 for
        // the whole batch, so its incoming weights get zero gradient.
        let mut layers = he_uniform_init(&[2, 2, 2], 3);
        layers[0].bias[0] = -100.0;
        let batch = Matrix::from_rows(&[vec![0.5, -0.5], vec![1.0, 1.0]]);
        let (_, grads) = mlp_loss_and_gradients(&layers, &batch, &[0, 1]);
        assert_eq!(grads[0].weights.get(0, 0), 0.0);
        assert_eq!(grads[0].weights.get(1, 0), 0.0);
        assert_eq!(grads[0].bias[0], 0.0);
    }

    #[test]
    fn perfect_prediction_loss_is_zero() {
        // Huge logit on the true class per row.
        let layers = vec![Layer {
            weights: Matrix::from_rows(&[vec![100.0, -100.0]]),
            bias: vec![0.0; 2],
        }];
        let batch = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
        let (loss, _) = mlp_loss_and_gradients(&layers, &batch, &[0, 1]);
        assert!(loss < 1e-9, "loss {loss}");
    }

    #[test]
    fn standardizer_refit_is_idempotent() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![8.0, 5.0]]);
        let s = Standardizer::fit(&x);
        let z = s.transform(&x);
        let s2 = Standardizer::fit(&z);
        for (m, sd) in s2.mean.iter().zip(&s2.std) {
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9 || *sd == 1.0);
        }
    }

    #[test]
    fn determinism_and_serialization_round_trip() {
        let (x, y) = xor_data();
        let mut config = MlpConfig::with_hidden(2, &[5], 2);
        config.epochs = 20;
        config.seed = 11;
        let schema = vec!["a".to_string(), "b".to_string()];
        let (m1, _) = mlp_train(&x, &y, &config, schema.clone(), None).unwrap();
        let (m2, _) = mlp_train(&x, &y, &config, schema, None).unwrap();
        assert_eq!(m1, m2);
        let json = m1.to_json();
        let reloaded = MlpModel::from_json(&json).unwrap();
        assert_eq!(reloaded, m1);
        assert_eq!(reloaded.to_json(), json);
    }

    #[test]
    fn probability_rows_normalize() {
        let (x, y) = xor_data();
        let mut config = MlpConfig::with_hidden(2, &[4], 2);
        config.epochs = 10;
        let (model, _) = mlp_train(&x, &y, &config, vec!["a".into(), "b".into()], None).unwrap();
        let probs = mlp_predict_proba(&model, &x).unwrap();
        for i in 0..probs.rows {
            assert!((probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
