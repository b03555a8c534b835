//! Dense-layer numerical engine: affine maps, activations, losses,
//! analytic gradients via reverse accumulation, plain SGD, and a
//! central-difference gradient oracle.
//!
//! All arithmetic is `f64`; training paths run batched so the inner
//! loops are matrix products.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CROSS_ENTROPY_EPS: f64 = 1e-12;

/// One affine stage: `out_dim x in_dim` weights plus an `out_dim` bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    /// Scaled uniform init in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights =
            Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Mse,
    CrossEntropy,
}

/// Per-sample training target.
#[derive(Debug, Clone)]
pub enum Target {
    /// Regression target for [`Loss::Mse`].
    Vector(Array1<f64>),
    /// Class index for [`Loss::CrossEntropy`].
    Label(usize),
}

/// Batched training targets, one row / entry per sample.
#[derive(Debug, Clone)]
pub enum Targets {
    Vectors(Array2<f64>),
    Labels(Vec<usize>),
}

/// Gradients shape-congruent with a layer stack.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub d_weights: Vec<Array2<f64>>,
    pub d_bias: Vec<Array1<f64>>,
}

pub fn affine_forward(layer: &DenseLayer, x: &Array1<f64>) -> Result<Array1<f64>> {
    if x.len() != layer.in_dim() {
        return Err(Error::DimensionMismatch {
            expected: layer.in_dim(),
            got: x.len(),
        });
    }
    Ok(layer.weights.dot(x) + &layer.bias)
}

pub fn activate(activation: Activation, z: &Array1<f64>) -> Array1<f64> {
    match activation {
        Activation::Tanh => z.mapv(f64::tanh),
        Activation::Identity => z.clone(),
        Activation::Softmax => {
            let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let exp = z.mapv(|v| (v - max).exp());
            let sum = exp.sum();
            exp / sum
        }
    }
}

pub fn mse_loss(x_hat: &Array1<f64>, x: &Array1<f64>) -> Result<f64> {
    if x_hat.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    let n = x.len() as f64;
    Ok((x_hat - x).mapv(|d| d * d).sum() / n)
}

pub fn cross_entropy_loss(probs: &Array1<f64>, label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            n_classes: probs.len(),
        });
    }
    Ok(-(probs[label] + CROSS_ENTROPY_EPS).ln())
}

/// Forward one sample through a layer stack; returns post-activation
/// outputs of every layer.
pub fn forward(
    layers: &[DenseLayer],
    activations: &[Activation],
    x: &Array1<f64>,
) -> Result<Vec<Array1<f64>>> {
    debug_assert_eq!(layers.len(), activations.len());
    let mut outputs = Vec::with_capacity(layers.len());
    let mut current = x.clone();
    for (layer, &act) in layers.iter().zip(activations) {
        let z = affine_forward(layer, &current)?;
        current = activate(act, &z);
        outputs.push(current.clone());
    }
    Ok(outputs)
}

fn activate_batch(activation: Activation, z: Array2<f64>) -> Array2<f64> {
    match activation {
        Activation::Tanh => z.mapv(f64::tanh),
        Activation::Identity => z,
        Activation::Softmax => {
            let mut out = z;
            for mut row in out.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|v| v / sum);
            }
            out
        }
    }
}

/// Forward a batch (rows = samples); returns per-layer activations.
pub fn forward_batch(
    layers: &[DenseLayer],
    activations: &[Activation],
    xs: &Array2<f64>,
) -> Result<Vec<Array2<f64>>> {
    if xs.ncols() != layers[0].in_dim() {
        return Err(Error::DimensionMismatch {
            expected: layers[0].in_dim(),
            got: xs.ncols(),
        });
    }
    let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    for (i, (layer, &act)) in layers.iter().zip(activations).enumerate() {
        let prev = if i == 0 { xs } else { &outputs[i - 1] };
        if prev.ncols() != layer.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: layer.in_dim(),
                got: prev.ncols(),
            });
        }
        let z = prev.dot(&layer.weights.t()) + &layer.bias;
        outputs.push(activate_batch(act, z));
    }
    Ok(outputs)
}

fn batch_loss(loss: Loss, output: &Array2<f64>, targets: &Targets) -> Result<f64> {
    let batch = output.nrows();
    let mut total = 0.0;
    match (loss, targets) {
        (Loss::Mse, Targets::Vectors(t)) => {
            if t.dim() != output.dim() {
                return Err(Error::DimensionMismatch {
                    expected: output.ncols(),
                    got: t.ncols(),
                });
            }
            let n = output.ncols() as f64;
            total = (output - t).mapv(|d| d * d).sum() / n;
        }
        (Loss::CrossEntropy, Targets::Labels(labels)) => {
            for (row, &label) in output.rows().into_iter().zip(labels) {
                if label >= row.len() {
                    return Err(Error::LabelOutOfRange {
                        label,
                        n_classes: row.len(),
                    });
                }
                total += -(row[label] + CROSS_ENTROPY_EPS).ln();
            }
        }
        _ => {
            return Err(Error::InvalidConfig(
                "loss/target combination mismatch".into(),
            ))
        }
    }
    Ok(total / batch as f64)
}

/// Reverse-mode gradients of the mean per-sample loss over a batch.
///
/// Cross-entropy requires a softmax output layer (the combined output
/// gradient is `probs - one_hot`); MSE pairs with tanh or identity.
pub fn backprop_batch(
    layers: &[DenseLayer],
    activations: &[Activation],
    loss: Loss,
    xs: &Array2<f64>,
    targets: &Targets,
) -> Result<(f64, GradientSet)> {
    let outputs = forward_batch(layers, activations, xs)?;
    let final_out = outputs.last().expect("at least one layer");
    let loss_value = batch_loss(loss, final_out, targets)?;
    let batch = xs.nrows() as f64;

    // gradient of the mean loss w.r.t. the final pre-activation
    let mut delta: Array2<f64> = match (loss, targets, activations.last().copied().unwrap()) {
        (Loss::CrossEntropy, Targets::Labels(labels), Activation::Softmax) => {
            let mut d = final_out.clone();
            for (mut row, &label) in d.rows_mut().into_iter().zip(labels) {
                row[label] -= 1.0;
            }
            d / batch
        }
        (Loss::Mse, Targets::Vectors(t), act) => {
            if act == Activation::Softmax {
                return Err(Error::InvalidConfig(
                    "MSE with a softmax output is not supported".into(),
                ));
            }
            let n = final_out.ncols() as f64;
            let d_out = (final_out - t) * (2.0 / (n * batch));
            apply_activation_derivative(act, d_out, final_out)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "unsupported loss/activation combination".into(),
            ))
        }
    };

    let mut d_weights = vec![Array2::zeros((0, 0)); layers.len()];
    let mut d_bias = vec![Array1::zeros(0); layers.len()];
    for i in (0..layers.len()).rev() {
        let prev: &Array2<f64> = if i == 0 { xs } else { &outputs[i - 1] };
        d_weights[i] = delta.t().dot(prev);
        d_bias[i] = delta.sum_axis(Axis(0));
        if i > 0 {
            let d_prev = delta.dot(&layers[i].weights);
            delta = apply_activation_derivative(activations[i - 1], d_prev, &outputs[i - 1]);
        }
    }
    Ok((loss_value, GradientSet { d_weights, d_bias }))
}

// chain rule through the activation, expressed via the post-activation
// values (tanh' = 1 - a^2)
fn apply_activation_derivative(
    activation: Activation,
    upstream: Array2<f64>,
    output: &Array2<f64>,
) -> Array2<f64> {
    match activation {
        Activation::Tanh => {
            let mut d = upstream;
            d.zip_mut_with(output, |g, &a| *g *= 1.0 - a * a);
            d
        }
        Activation::Identity => upstream,
        // softmax only appears as the output layer, where the loss
        // gradient is already taken w.r.t. the pre-activation
        Activation::Softmax => unreachable!("softmax in a hidden position"),
    }
}

/// Single-sample convenience wrapper around [`backprop_batch`].
pub fn backprop(
    layers: &[DenseLayer],
    activations: &[Activation],
    loss: Loss,
    x: &Array1<f64>,
    target: &Target,
) -> Result<(f64, GradientSet)> {
    let xs = x
        .clone()
        .into_shape_with_order((1, x.len()))
        .expect("row reshape");
    let targets = match target {
        Target::Vector(t) => Targets::Vectors(
            t.clone()
                .into_shape_with_order((1, t.len()))
                .expect("row reshape"),
        ),
        Target::Label(l) => Targets::Labels(vec![*l]),
    };
    backprop_batch(layers, activations, loss, &xs, &targets)
}

/// In-place plain SGD: `theta <- theta - lr * g` for every parameter.
pub fn sgd_step(layers: &mut [DenseLayer], grads: &GradientSet, lr: f64) {
    for (layer, (dw, db)) in layers
        .iter_mut()
        .zip(grads.d_weights.iter().zip(&grads.d_bias))
    {
        layer.weights.scaled_add(-lr, dw);
        layer.bias.scaled_add(-lr, db);
    }
}

fn loss_at(
    layers: &[DenseLayer],
    activations: &[Activation],
    loss: Loss,
    x: &Array1<f64>,
    target: &Target,
) -> Result<f64> {
    let outputs = forward(layers, activations, x)?;
    let out = outputs.last().unwrap();
    match (loss, target) {
        (Loss::Mse, Target::Vector(t)) => mse_loss(out, t),
        (Loss::CrossEntropy, Target::Label(l)) => cross_entropy_loss(out, *l),
        _ => Err(Error::InvalidConfig(
            "loss/target combination mismatch".into(),
        )),
    }
}

/// Compare analytic gradients against central finite differences.
///
/// Returns `max_i |g_a - g_n| / max(1e-8, |g_a| + |g_n|)` over every
/// weight and bias entry.
pub fn grad_check(
    layers: &[DenseLayer],
    activations: &[Activation],
    loss: Loss,
    x: &Array1<f64>,
    target: &Target,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::InvalidConfig("eps must lie in (0, 1e-2]".into()));
    }
    let (_, grads) = backprop(layers, activations, loss, x, target)?;
    let mut work = layers.to_vec();
    let mut max_rel = 0.0f64;

    let mut check = |analytic: f64, numeric: f64| {
        let rel = (analytic - numeric).abs() / 1e-8f64.max(analytic.abs() + numeric.abs());
        max_rel = max_rel.max(rel);
    };

    for li in 0..work.len() {
        for idx in 0..work[li].weights.len() {
            let (r, c) = (idx / work[li].weights.ncols(), idx % work[li].weights.ncols());
            let orig = work[li].weights[[r, c]];
            work[li].weights[[r, c]] = orig + eps;
            let plus = loss_at(&work, activations, loss, x, target)?;
            work[li].weights[[r, c]] = orig - eps;
            let minus = loss_at(&work, activations, loss, x, target)?;
            work[li].weights[[r, c]] = orig;
            check(grads.d_weights[li][[r, c]], (plus - minus) / (2.0 * eps));
        }
        for bi in 0..work[li].bias.len() {
            let orig = work[li].bias[bi];
            work[li].bias[bi] = orig + eps;
            let plus = loss_at(&work, activations, loss, x, target)?;
            work[li].bias[bi] = orig - eps;
            let minus = loss_at(&work, activations, loss, x, target)?;
            work[li].bias[bi] = orig;
            check(grads.d_bias[li][bi], (plus - minus) / (2.0 * eps));
        }
    }
    Ok(max_rel)
}
