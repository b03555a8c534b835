//! One denoising autoencoder: masking corruption, encode/decode with
//! an untied decoder, and the unsupervised layer pretraining loop.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    self, Activation, DenseLayer, Loss, Targets,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dae {
    pub encoder: DenseLayer,
    /// Untied decoder: its weights are independent of the encoder's.
    pub decoder: DenseLayer,
    pub corruption_fraction: f64,
    /// Output activation; tanh by default since inputs live in [-1, 1].
    pub decoder_activation: Activation,
}

impl Dae {
    pub fn new(
        visible: usize,
        hidden: usize,
        corruption_fraction: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&corruption_fraction) {
            return Err(Error::InvalidConfig(
                "corruption fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(Self {
            encoder: DenseLayer::init(hidden, visible, rng),
            decoder: DenseLayer::init(visible, hidden, rng),
            corruption_fraction,
            decoder_activation: Activation::Tanh,
        })
    }

    pub fn visible_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.out_dim()
    }
}

/// An input with some coordinates masked to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedInput {
    pub values: Array1<f64>,
    /// `true` marks a zeroed position.
    pub mask: Vec<bool>,
}

/// Zero exactly `round(fraction * n)` positions chosen uniformly
/// without replacement.
pub fn corrupt(x: &Array1<f64>, fraction: f64, rng: &mut ChaCha8Rng) -> Result<CorruptedInput> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(
            "corruption fraction must lie in [0, 1)".into(),
        ));
    }
    let n = x.len();
    let k = (fraction * n as f64).round() as usize;
    let mut values = x.clone();
    let mut mask = vec![false; n];
    for idx in rand::seq::index::sample(rng, n, k) {
        values[idx] = 0.0;
        mask[idx] = true;
    }
    Ok(CorruptedInput { values, mask })
}

/// `tanh(W x + b)`
pub fn encode(dae: &Dae, x: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(nn::activate(
        Activation::Tanh,
        &nn::affine_forward(&dae.encoder, x)?,
    ))
}

/// `s(W' y + b')`, reconstructing in the visible dimension.
pub fn decode(dae: &Dae, y: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(nn::activate(
        dae.decoder_activation,
        &nn::affine_forward(&dae.decoder, y)?,
    ))
}

/// Minibatch pretraining: each sample is corrupted fresh, forwarded
/// through encode/decode, and the reconstruction error is taken against
/// the clean input. Returns the trained autoencoder and the per-epoch
/// mean reconstruction loss.
pub fn pretrain_layer(
    dae: Dae,
    inputs: &Array2<f64>,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Dae, Vec<f64>)> {
    pretrain_layer_observed(dae, inputs, epochs, lr, batch_size, rng, |_, _| {})
}

/// [`pretrain_layer`] with a per-batch hook receiving the corrupted
/// forward input and the clean reconstruction target.
pub fn pretrain_layer_observed(
    mut dae: Dae,
    inputs: &Array2<f64>,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    mut observer: impl FnMut(&Array2<f64>, &Array2<f64>),
) -> Result<(Dae, Vec<f64>)> {
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::InvalidConfig("empty pretraining set".into()));
    }
    if inputs.ncols() != dae.visible_dim() {
        return Err(Error::DimensionMismatch {
            expected: dae.visible_dim(),
            got: inputs.ncols(),
        });
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }

    let activations = [Activation::Tanh, dae.decoder_activation];
    let mut history = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let mut clean = Array2::zeros((chunk.len(), dae.visible_dim()));
            let mut corrupted = Array2::zeros((chunk.len(), dae.visible_dim()));
            for (bi, &si) in chunk.iter().enumerate() {
                let row = inputs.row(si);
                clean.row_mut(bi).assign(&row);
                let noisy = corrupt(&row.to_owned(), dae.corruption_fraction, rng)?;
                corrupted.row_mut(bi).assign(&noisy.values);
            }
            observer(&corrupted, &clean);

            let mut layers = [dae.encoder, dae.decoder];
            let (loss, grads) = nn::backprop_batch(
                &layers,
                &activations,
                Loss::Mse,
                &corrupted,
                &Targets::Vectors(clean),
            )?;
            nn::sgd_step(&mut layers, &grads, lr);
            let [encoder, decoder] = layers;
            dae.encoder = encoder;
            dae.decoder = decoder;

            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    phase: "pretrain",
                    epoch,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok((dae, history))
}
