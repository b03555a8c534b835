//! Shallow baseline: a one-vs-rest linear SVM trained with SGD on the
//! L2-regularized hinge loss, consuming either raw 500-dim windows or
//! 36-dim MFCC features, with per-dimension standardization.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdae::argmax;

pub const SVM_FORMAT_VERSION: u32 = 1;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Raw,
    Mfcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    /// Learning rate at epoch e is `lr0 / (1 + lr_decay * e)`.
    pub lr0: f64,
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 200,
            lr0: 0.1,
            lr_decay: 0.01,
            seed: 0,
        }
    }
}

/// Per-dimension mean/std computed on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(features: &[Vec<f64>]) -> Result<FeatureScaler> {
    if features.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let dim = features[0].len();
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in var.iter_mut().zip(f).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok(FeatureScaler { mean, std })
}

pub fn apply_scaler(scaler: &FeatureScaler, feature: &[f64]) -> Vec<f64> {
    feature
        .iter()
        .zip(&scaler.mean)
        .zip(&scaler.std)
        .map(|((v, m), s)| (v - m) / s)
        .collect()
}

/// One weight vector and bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrLinearSvm {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub lambda: f64,
    pub feature_kind: FeatureKind,
}

impl OvrLinearSvm {
    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// `(lambda/2)||w||^2 + mean_i max(0, 1 - y_i (w.x_i + b))` for one
/// binary one-vs-rest problem.
pub fn binary_objective(
    w: &[f64],
    b: f64,
    lambda: f64,
    features: &[Vec<f64>],
    ys: &[f64],
) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = features
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let margin = y * (dot(w, x) + b);
            (1.0 - margin).max(0.0)
        })
        .sum::<f64>()
        / features.len() as f64;
    reg + hinge
}

/// Train one-vs-rest linear SVMs by per-sample subgradient SGD on
/// standardized features. Deterministic given the seed.
pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[usize],
    feature_kind: FeatureKind,
    config: &SvmConfig,
) -> Result<OvrLinearSvm> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::InvalidConfig(
            "features and labels must be non-empty and matching".into(),
        ));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    if labels.iter().collect::<std::collections::HashSet<_>>().len() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = features[0].len();
    let n = features.len();

    let mut weights = vec![vec![0.0; dim]; n_classes];
    let mut biases = vec![0.0; n_classes];
    for c in 0..n_classes {
        // per-class seed so the one-vs-rest problems stay independent
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(c as u64));
        let ys: Vec<f64> = labels
            .iter()
            .map(|&l| if l == c { 1.0 } else { -1.0 })
            .collect();
        let w = &mut weights[c];
        let b = &mut biases[c];
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..config.epochs {
            let lr = config.lr0 / (1.0 + config.lr_decay * epoch as f64);
            order.shuffle(&mut rng);
            for &i in &order {
                let x = &features[i];
                let y = ys[i];
                let margin = y * (dot(w, x) + *b);
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj -= lr * (config.lambda * *wj - y * xj);
                    }
                    *b += lr * y;
                } else {
                    for wj in w.iter_mut() {
                        *wj -= lr * config.lambda * *wj;
                    }
                }
            }
        }
    }
    Ok(OvrLinearSvm {
        weights,
        biases,
        lambda: config.lambda,
        feature_kind,
    })
}

/// Scores `s_c = w_c . x + b_c`; the label is the argmax score, ties to
/// the lowest index.
pub fn svm_predict(model: &OvrLinearSvm, feature: &[f64]) -> Result<(usize, Vec<f64>)> {
    if feature.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: feature.len(),
        });
    }
    let scores: Vec<f64> = model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| dot(w, feature) + b)
        .collect();
    Ok((argmax(&scores), scores))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A trained SVM plus the training-set scaler it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub svm: OvrLinearSvm,
    pub scaler: FeatureScaler,
}

impl SvmModel {
    /// Scale the raw feature and classify it.
    pub fn predict(&self, feature: &[f64]) -> Result<(usize, Vec<f64>)> {
        svm_predict(&self.svm, &apply_scaler(&self.scaler, feature))
    }
}

/// Fit the scaler, standardize, and train in one call.
pub fn train_svm_pipeline(
    features: &[Vec<f64>],
    labels: &[usize],
    feature_kind: FeatureKind,
    config: &SvmConfig,
) -> Result<SvmModel> {
    let scaler = fit_scaler(features)?;
    let scaled: Vec<Vec<f64>> = features.iter().map(|f| apply_scaler(&scaler, f)).collect();
    let svm = train_svm(&scaled, labels, feature_kind, config)?;
    Ok(SvmModel { svm, scaler })
}

#[derive(Serialize, Deserialize)]
struct SvmModelFile {
    format_version: u32,
    model_kind: String,
    feature_kind: FeatureKind,
    lambda: f64,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
}

pub fn save_svm<P: AsRef<Path>>(model: &SvmModel, path: P) -> Result<()> {
    let file = SvmModelFile {
        format_version: SVM_FORMAT_VERSION,
        model_kind: "svm".into(),
        feature_kind: model.svm.feature_kind,
        lambda: model.svm.lambda,
        weights: model.svm.weights.clone(),
        biases: model.svm.biases.clone(),
        scaler_mean: model.scaler.mean.clone(),
        scaler_std: model.scaler.std.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_svm<P: AsRef<Path>>(path: P) -> Result<SvmModel> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|_| Error::FileNotFound(path.as_ref().to_path_buf()))?;
    let file: SvmModelFile =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format_version != SVM_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            file.format_version
        )));
    }
    if file.model_kind != "svm" {
        return Err(Error::ModelFormat(format!(
            "expected an svm model, found {}",
            file.model_kind
        )));
    }
    let dim = file.weights.first().map_or(0, Vec::len);
    if file.weights.iter().any(|w| w.len() != dim)
        || file.biases.len() != file.weights.len()
        || file.scaler_mean.len() != dim
        || file.scaler_std.len() != dim
    {
        return Err(Error::ModelFormat("inconsistent shapes in svm file".into()));
    }
    Ok(SvmModel {
        svm: OvrLinearSvm {
            weights: file.weights,
            biases: file.biases,
            lambda: file.lambda,
            feature_kind: file.feature_kind,
        },
        scaler: FeatureScaler {
            mean: file.scaler_mean,
            std: file.scaler_std,
        },
    })
}
