//! Linear classifiers (logistic regression and a hinge-loss margin
//! classifier) trained by seeded SGD with a grid search on the tune set.

mod pipeline;

pub use pipeline::{build_combined, Classifier, ClassifierSpec, Pipeline, MODEL_VERSION};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::eval;
use crate::features::{FeatureVector, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LogisticRegression,
    MarginClassifier,
}

impl ModelKind {
    pub fn default_threshold(self) -> f64 {
        match self {
            ModelKind::LogisticRegression => 0.5,
            ModelKind::MarginClassifier => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logistic-regression",
            ModelKind::MarginClassifier => "margin-classifier",
        }
    }

    /// Loss of one example at signed margin m = y·f.
    fn loss(self, m: f64) -> f64 {
        match self {
            // ln(1 + e^-m), stable on both tails
            ModelKind::LogisticRegression => {
                if m > 0.0 {
                    (-m).exp().ln_1p()
                } else {
                    -m + m.exp().ln_1p()
                }
            }
            ModelKind::MarginClassifier => (1.0 - m).max(0.0),
        }
    }

    /// d loss / d m.
    fn dloss(self, m: f64) -> f64 {
        match self {
            ModelKind::LogisticRegression => -sigmoid(-m),
            ModelKind::MarginClassifier => {
                if m < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic-regression" | "lr" => Ok(ModelKind::LogisticRegression),
            "margin-classifier" | "svm" => Ok(ModelKind::MarginClassifier),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Basic,
    Extended,
    Combined,
    IndependentCombined,
    EmbeddingCombined,
    EmbeddingIndependent,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Basic,
        Variant::Extended,
        Variant::Combined,
        Variant::IndependentCombined,
        Variant::EmbeddingCombined,
        Variant::EmbeddingIndependent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Extended => "extended",
            Variant::Combined => "combined",
            Variant::IndependentCombined => "independent-combined",
            Variant::EmbeddingCombined => "embedding-combined",
            Variant::EmbeddingIndependent => "embedding-independent",
        }
    }

    pub fn needs_embedding(self) -> bool {
        matches!(self, Variant::EmbeddingCombined | Variant::EmbeddingIndependent)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// One shuffled pass per epoch, early stopping on tune F-score.
    Sgd,
    /// Gradient descent with backtracking; the objective never increases.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambdas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub class_weighting: bool,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1],
            learning_rates: vec![0.01, 0.1],
            max_epochs: 200,
            patience: 10,
            class_weighting: true,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn single(lambda: f64, learning_rate: f64) -> Self {
        TrainConfig {
            lambdas: vec![lambda],
            learning_rates: vec![learning_rate],
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.learning_rates.is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("lambda must be finite and >= 0".into()));
        }
        if self.learning_rates.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Encoded examples sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet {
    pub layout: Arc<Layout>,
    /// Row-major, `len() * dim()` values.
    pub values: Vec<f64>,
    pub labels: Vec<ClassLabel>,
}

impl EncodedSet {
    pub fn new(layout: Arc<Layout>, rows: Vec<Vec<f64>>, labels: Vec<ClassLabel>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let dim = layout.len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::LayoutMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            values.extend(r);
        }
        Ok(EncodedSet {
            layout,
            values,
            labels,
        })
    }

    pub fn from_vectors(vectors: Vec<FeatureVector>, labels: Vec<ClassLabel>) -> Result<Self> {
        let layout = match vectors.first() {
            Some(v) => Arc::clone(&v.layout),
            None => return Err(Error::EmptyDataset),
        };
        if let Some(v) = vectors.iter().find(|v| *v.layout != *layout) {
            return Err(Error::LayoutMismatch {
                expected: layout.len(),
                found: v.len(),
            });
        }
        let rows = vectors.into_iter().map(|v| v.values).collect();
        Self::new(layout, rows, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.layout.slots {
            h.update(s.as_bytes());
            h.update([0]);
        }
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        for l in &self.labels {
            h.update([u8::from(l.is_positive())]);
        }
        hex(&h.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Regularized weighted empirical risk
/// `Σ c_i·loss(y_i(w·x_i + b)) / Σ c_i + λ/2·|w|²` and its gradient.
pub fn objective(
    kind: ModelKind,
    w: &[f64],
    b: f64,
    data: &EncodedSet,
    sample_weights: &[f64],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let total: f64 = sample_weights.iter().sum();
    let mut gw: Vec<f64> = w.iter().map(|wi| lambda * wi).collect();
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (i, sw) in sample_weights.iter().enumerate() {
        let x = data.row(i);
        let y = data.labels[i].sign();
        let m = y * (b + dot(w, x));
        let c = sw / total;
        loss += c * kind.loss(m);
        let d = c * kind.dloss(m) * y;
        if d != 0.0 {
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += d * xi;
            }
            gb += d;
        }
    }
    loss += 0.5 * lambda * w.iter().map(|x| x * x).sum::<f64>();
    (loss, gw, gb)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse class frequency, scaled to mean 1.
pub fn class_weights(labels: &[ClassLabel], enabled: bool) -> Vec<f64> {
    if !enabled {
        return vec![1.0; labels.len()];
    }
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|l| l.is_positive()).count() as f64;
    let (wp, wn) = (n / (2.0 * pos), n / (2.0 * (n - pos)));
    labels
        .iter()
        .map(|l| if l.is_positive() { wp } else { wn })
        .collect()
}

/// Per-column centering and scaling fitted on the training rows.
#[derive(Debug, Clone)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(data: &EncodedSet) -> Self {
        let (n, d) = (data.len() as f64, data.dim());
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, x) in mean.iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((v, x), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, data: &EncodedSet) -> EncodedSet {
        let d = data.dim();
        let values = data
            .values
            .iter()
            .enumerate()
            .map(|(k, x)| (x - self.mean[k % d]) / self.scale[k % d])
            .collect();
        EncodedSet {
            layout: Arc::clone(&data.layout),
            values,
            labels: data.labels.clone(),
        }
    }

    /// Weights and bias of the same decision function on unscaled inputs.
    fn unscale(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = w.iter().zip(&self.scale).map(|(wi, s)| wi / s).collect();
        let bias = b - dot(&raw, &self.mean);
        (raw, bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub tune_f_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub class_weighting: bool,
    pub optimizer: Optimizer,
    pub tune_f_score: Option<f64>,
    /// Threshold with the best tune-set F-score.
    pub tuned_threshold: Option<f64>,
    pub data_fingerprint: String,
    pub grid: Vec<GridPoint>,
    /// Training objective after each epoch (standardized space).
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub variant: Variant,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: f64,
    pub threshold: f64,
    pub layout: Layout,
    pub trained: bool,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: ClassLabel,
    pub score: f64,
    pub threshold: f64,
}

impl LinearModel {
    /// w·x + b.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + dot(&self.weights, x)
    }

    /// Probability of Company for LR, signed margin otherwise.
    pub fn score_values(&self, x: &[f64]) -> f64 {
        let m = self.margin(x);
        match self.kind {
            ModelKind::LogisticRegression => sigmoid(m),
            ModelKind::MarginClassifier => m,
        }
    }

    pub fn decide_values(&self, x: &[f64], threshold: f64) -> Result<Decision> {
        if x.len() != self.weights.len() {
            return Err(Error::LayoutMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        let score = self.score_values(x);
        let label = if score >= threshold {
            ClassLabel::Company
        } else {
            ClassLabel::Cryptocurrency
        };
        Ok(Decision {
            label,
            score,
            threshold,
        })
    }

    pub fn predict(&self, vector: &FeatureVector, threshold: f64) -> Result<Decision> {
        if *vector.layout != self.layout {
            return Err(Error::LayoutMismatch {
                expected: self.layout.len(),
                found: vector.len(),
            });
        }
        self.decide_values(&vector.values, threshold)
    }

    pub fn weight(&self, slot: &str) -> Option<f64> {
        self.layout.position(slot).map(|i| self.weights[i])
    }
}

struct Run {
    w: Vec<f64>,
    b: f64,
    epochs: usize,
    tune_f: Option<f64>,
    history: Vec<f64>,
}

fn tune_f_score(kind: ModelKind, w: &[f64], b: f64, tune: &EncodedSet) -> Option<f64> {
    let t = kind.default_threshold();
    let preds: Vec<ClassLabel> = (0..tune.len())
        .map(|i| {
            let m = b + dot(w, tune.row(i));
            let s = match kind {
                ModelKind::LogisticRegression => sigmoid(m),
                ModelKind::MarginClassifier => m,
            };
            if s >= t {
                ClassLabel::Company
            } else {
                ClassLabel::Cryptocurrency
            }
        })
        .collect();
    eval::confusion(&preds, &tune.labels)
        .ok()
        .and_then(|c| eval::metrics(c).f_score)
}

fn better(a: Option<f64>, b: Option<f64>) -> bool {
    a.unwrap_or(-1.0) > b.unwrap_or(-1.0)
}

fn run_sgd(
    kind: ModelKind,
    train: &EncodedSet,
    tune: &EncodedSet,
    weights: &[f64],
    (lambda, lr): (f64, f64),
    config: &TrainConfig,
    seed: u64,
) -> Run {
    let d = train.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let mut best: Option<Run> = None;
    let mut history = Vec::new();
    let mut stalled = 0;
    let mut t = 0.0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = lr / (1.0 + lr * lambda * t);
            t += 1.0;
            let x = train.row(i);
            let y = train.labels[i].sign();
            let g = weights[i] * kind.dloss(y * (b + dot(&w, x))) * y;
            let shrink = 1.0 - eta * lambda;
            for (wj, xj) in w.iter_mut().zip(x) {
                *wj = shrink * *wj - eta * g * xj;
            }
            b -= eta * g;
        }
        history.push(objective(kind, &w, b, train, weights, lambda).0);
        let f = tune_f_score(kind, &w, b, tune);
        if best.as_ref().is_none_or(|r| better(f, r.tune_f)) {
            best = Some(Run {
                w: w.clone(),
                b,
                epochs: epoch,
                tune_f: f,
                history: Vec::new(),
            });
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= config.patience {
                break;
            }
        }
    }
    let mut best = best.expect("at least one epoch runs");
    best.history = history;
    best
}

fn run_full_batch(
    kind: ModelKind,
    train: &EncodedSet,
    tune: &EncodedSet,
    weights: &[f64],
    lambda: f64,
    lr: f64,
    config: &TrainConfig,
) -> Run {
    let d = train.dim();
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut f, mut gw, mut gb) = objective(kind, &w, b, train, weights, lambda);
    let mut history = Vec::new();
    let mut step = lr;
    let mut epochs = 0;
    for _ in 0..config.max_epochs {
        let g2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if g2.sqrt() < 1e-12 {
            break;
        }
        epochs += 1;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let b_new = b - step * gb;
            let (f_new, gw_new, gb_new) = objective(kind, &w_new, b_new, train, weights, lambda);
            if f_new <= f - 1e-4 * step * g2 {
                (w, b, f, gw, gb) = (w_new, b_new, f_new, gw_new, gb_new);
                step = (step * 2.0).min(lr * 1024.0);
                break;
            }
            step /= 2.0;
            if step < 1e-20 {
                break;
            }
        }
        history.push(f);
        if step < 1e-20 {
            break;
        }
    }
    let tune_f = tune_f_score(kind, &w, b, tune);
    Run {
        w,
        b,
        epochs,
        tune_f,
        history,
    }
}

/// Train on `train`, choosing (λ, learning rate) by tune-set F-score.
/// An empty tune set falls back to the training set for selection.
pub fn train(
    train: &EncodedSet,
    tune: &EncodedSet,
    kind: ModelKind,
    config: &TrainConfig,
    seed: u64,
) -> Result<LinearModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pos = train.labels.iter().filter(|l| l.is_positive()).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::SingleClassTrainingSet);
    }
    if *tune.layout != *train.layout {
        return Err(Error::LayoutMismatch {
            expected: train.dim(),
            found: tune.dim(),
        });
    }
    let scaler = Standardizer::fit(train);
    let z_train = scaler.apply(train);
    let z_tune = if tune.is_empty() {
        z_train.clone()
    } else {
        scaler.apply(tune)
    };
    let weights = class_weights(&train.labels, config.class_weighting);

    let mut grid = Vec::new();
    let mut chosen: Option<(Run, f64, f64)> = None;
    for &lambda in &config.lambdas {
        for &lr in &config.learning_rates {
            let run = match config.optimizer {
                Optimizer::Sgd => run_sgd(kind, &z_train, &z_tune, &weights, (lambda, lr), config, seed),
                Optimizer::FullBatch => run_full_batch(kind, &z_train, &z_tune, &weights, lambda, lr, config),
            };
            log::debug!("λ={lambda} lr={lr}: tune F {:?} after {} epochs", run.tune_f, run.epochs);
            grid.push(GridPoint {
                lambda,
                learning_rate: lr,
                epochs: run.epochs,
                tune_f_score: run.tune_f,
            });
            if chosen.as_ref().is_none_or(|(c, _, _)| better(run.tune_f, c.tune_f)) {
                chosen = Some((run, lambda, lr));
            }
        }
    }
    let (run, lambda, lr) = chosen.expect("grid is non-empty");
    let (raw_w, raw_b) = scaler.unscale(&run.w, run.b);
    let mut model = LinearModel {
        kind,
        variant: Variant::Basic,
        weights: raw_w,
        bias: raw_b,
        regularization: lambda,
        threshold: kind.default_threshold(),
        layout: (*train.layout).clone(),
        trained: true,
        metadata: TrainingMetadata {
            seed,
            learning_rate: lr,
            epochs: run.epochs,
            class_weighting: config.class_weighting,
            optimizer: config.optimizer,
            tune_f_score: run.tune_f,
            tuned_threshold: None,
            data_fingerprint: train.fingerprint(),
            grid,
            objective_history: run.history,
        },
    };
    let select = if tune.is_empty() { train } else { tune };
    let scores: Vec<f64> = (0..select.len()).map(|i| model.score_values(select.row(i))).collect();
    model.metadata.tuned_threshold = eval::best_f_threshold(&scores, &select.labels)
        .ok()
        .map(|(t, _)| t);
    Ok(model)
}
