//! The stacked network: greedy layer-wise pretraining of each
//! autoencoder on the previous layer's latent codes, a softmax head,
//! supervised fine-tuning through all layers, prediction, and JSON
//! model persistence.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dae::{pretrain_layer, Dae};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, DenseLayer, Loss, Targets};
use crate::signal::{LabeledDataset, SignalWindow};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Layer sizes from input to output, e.g. `500-200-200-200-30`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub dims: Vec<usize>,
}

impl LayerLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "layout needs at least input and output dims".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("layout dims must be >= 1".into()));
        }
        Ok(Self { dims })
    }

    /// Input dim, `hidden` interior sizes, output dim.
    pub fn from_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        Self::new(dims)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.dims[1..self.dims.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub pretrain_lr: f64,
    pub finetune_lr: f64,
    pub corruption_fraction: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 500,
            finetune_epochs: 100,
            pretrain_lr: 0.1,
            finetune_lr: 0.1,
            corruption_fraction: 0.25,
            batch_size: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pretrain_lr <= 0.0 || self.finetune_lr <= 0.0 {
            return Err(Error::InvalidConfig("learning rates must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.corruption_fraction) {
            return Err(Error::InvalidConfig(
                "corruption fraction must lie in [0, 1)".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdaeModel {
    /// tanh encoder stack, input to last hidden.
    pub encoders: Vec<DenseLayer>,
    /// softmax classifier layer.
    pub head: DenseLayer,
    pub layout: LayerLayout,
    pub train_config: TrainConfig,
}

impl SdaeModel {
    pub fn n_classes(&self) -> usize {
        self.layout.output_dim()
    }

    fn check_chain(&self) -> Result<()> {
        let mut dim = self.layout.input_dim();
        for (enc, &expected) in self.encoders.iter().zip(self.layout.hidden_dims()) {
            if enc.in_dim() != dim || enc.out_dim() != expected {
                return Err(Error::ModelFormat(format!(
                    "encoder shape {}x{} breaks layout chain",
                    enc.out_dim(),
                    enc.in_dim()
                )));
            }
            dim = enc.out_dim();
        }
        if self.encoders.len() != self.layout.hidden_dims().len()
            || self.head.in_dim() != dim
            || self.head.out_dim() != self.layout.output_dim()
        {
            return Err(Error::ModelFormat("head shape breaks layout chain".into()));
        }
        Ok(())
    }
}

/// One row of the `phase,layer,epoch,loss` training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub phase: String,
    pub layer: usize,
    pub epoch: usize,
    pub loss: f64,
}

pub fn write_training_log<P: AsRef<Path>>(path: P, records: &[TrainLogRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Map a representation matrix through one tanh encoder.
fn encode_all(encoder: &DenseLayer, reps: &Array2<f64>) -> Array2<f64> {
    (reps.dot(&encoder.weights.t()) + &encoder.bias).mapv(f64::tanh)
}

/// Greedy layer-wise pretraining: each hidden layer's autoencoder is
/// trained on the previous layer's latent codes.
pub fn pretrain_stack(
    windows: &Array2<f64>,
    layout: &LayerLayout,
    config: &TrainConfig,
) -> Result<(Vec<DenseLayer>, Vec<Vec<f64>>)> {
    config.validate()?;
    if windows.ncols() != layout.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.input_dim(),
            got: windows.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut encoders = Vec::new();
    let mut histories = Vec::new();
    let mut reps = windows.clone();
    for &hidden in layout.hidden_dims() {
        let dae = Dae::new(reps.ncols(), hidden, config.corruption_fraction, &mut rng)?;
        let (trained, history) = pretrain_layer(
            dae,
            &reps,
            config.pretrain_epochs,
            config.pretrain_lr,
            config.batch_size,
            &mut rng,
        )?;
        reps = encode_all(&trained.encoder, &reps);
        encoders.push(trained.encoder);
        histories.push(history);
    }
    Ok((encoders, histories))
}

/// Attach a freshly initialized softmax head and fine-tune every layer
/// with minibatch SGD on cross-entropy. Returns the model and the
/// per-epoch mean training loss.
pub fn fine_tune(
    encoders: Vec<DenseLayer>,
    windows: &Array2<f64>,
    labels: &[usize],
    layout: &LayerLayout,
    config: &TrainConfig,
) -> Result<(SdaeModel, Vec<f64>)> {
    config.validate()?;
    let n_classes = layout.output_dim();
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            n_classes,
        });
    }
    let n = windows.nrows();
    if n == 0 || n != labels.len() {
        return Err(Error::InvalidConfig(
            "fine-tuning needs matching windows and labels".into(),
        ));
    }

    // the head sees a different stream than pretraining so that layer
    // count does not silently re-align the two phases
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let head_in = layout.hidden_dims().last().copied().unwrap_or(layout.input_dim());
    let head = DenseLayer::init(n_classes, head_in, &mut rng);

    let mut layers: Vec<DenseLayer> = encoders;
    layers.push(head);
    let mut activations = vec![Activation::Tanh; layers.len() - 1];
    activations.push(Activation::Softmax);

    let mut history = Vec::with_capacity(config.finetune_epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.finetune_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut xs = Array2::zeros((chunk.len(), windows.ncols()));
            let mut batch_labels = Vec::with_capacity(chunk.len());
            for (bi, &si) in chunk.iter().enumerate() {
                xs.row_mut(bi).assign(&windows.row(si));
                batch_labels.push(labels[si]);
            }
            let (loss, grads) = nn::backprop_batch(
                &layers,
                &activations,
                Loss::CrossEntropy,
                &xs,
                &Targets::Labels(batch_labels),
            )?;
            nn::sgd_step(&mut layers, &grads, config.finetune_lr);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    phase: "finetune",
                    epoch,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
        }
        history.push(epoch_loss / n as f64);
    }

    let head = layers.pop().unwrap();
    let model = SdaeModel {
        encoders: layers,
        head,
        layout: layout.clone(),
        train_config: config.clone(),
    };
    model.check_chain()?;
    Ok((model, history))
}

/// Pretrain and fine-tune in one call, collecting a training log.
pub fn train_sdae(
    dataset: &LabeledDataset,
    layout: &LayerLayout,
    config: &TrainConfig,
) -> Result<(SdaeModel, Vec<TrainLogRecord>)> {
    let windows = dataset_matrix(dataset)?;
    let (encoders, pretrain_histories) = pretrain_stack(&windows, layout, config)?;
    let (model, finetune_history) =
        fine_tune(encoders, &windows, &dataset.labels, layout, config)?;
    let mut log = Vec::new();
    for (layer, history) in pretrain_histories.iter().enumerate() {
        for (epoch, &loss) in history.iter().enumerate() {
            log.push(TrainLogRecord {
                phase: "pretrain".into(),
                layer,
                epoch,
                loss,
            });
        }
    }
    for (epoch, &loss) in finetune_history.iter().enumerate() {
        log.push(TrainLogRecord {
            phase: "finetune".into(),
            layer: 0,
            epoch,
            loss,
        });
    }
    Ok((model, log))
}

/// Stack a dataset's windows into a row-per-sample matrix.
pub fn dataset_matrix(dataset: &LabeledDataset) -> Result<Array2<f64>> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let dim = dataset.windows[0].len();
    let mut m = Array2::zeros((dataset.len(), dim));
    for (i, w) in dataset.windows.iter().enumerate() {
        if w.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: w.len(),
            });
        }
        for (j, &v) in w.values.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

/// Forward through the encoder stack and the softmax head; the label is
/// the argmax probability, ties to the lowest index.
pub fn predict(model: &SdaeModel, window: &SignalWindow) -> Result<(usize, Vec<f64>)> {
    let mut x = Array1::from(window.values.clone());
    for enc in &model.encoders {
        x = nn::activate(Activation::Tanh, &nn::affine_forward(enc, &x)?);
    }
    let probs = nn::activate(Activation::Softmax, &nn::affine_forward(&model.head, &x)?);
    let label = argmax(probs.as_slice().unwrap());
    Ok((label, probs.to_vec()))
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

// ---- persistence ----

#[derive(Serialize, Deserialize)]
struct LayerData {
    rows: usize,
    cols: usize,
    /// row-major weights
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LayerData {
    fn from_layer(layer: &DenseLayer) -> Self {
        Self {
            rows: layer.out_dim(),
            cols: layer.in_dim(),
            weights: layer.weights.iter().copied().collect(),
            bias: layer.bias.to_vec(),
        }
    }

    fn into_layer(self) -> Result<DenseLayer> {
        if self.weights.len() != self.rows * self.cols || self.bias.len() != self.rows {
            return Err(Error::ModelFormat(format!(
                "declared shape {}x{} does not match {} weights / {} biases",
                self.rows,
                self.cols,
                self.weights.len(),
                self.bias.len()
            )));
        }
        let weights = Array2::from_shape_vec((self.rows, self.cols), self.weights)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        Ok(DenseLayer {
            weights,
            bias: Array1::from(self.bias),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SdaeModelFile {
    format_version: u32,
    model_kind: String,
    layout: Vec<usize>,
    train_config: TrainConfig,
    encoders: Vec<LayerData>,
    head: LayerData,
}

pub fn save_model<P: AsRef<Path>>(model: &SdaeModel, path: P) -> Result<()> {
    let file = SdaeModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model_kind: "sdae".into(),
        layout: model.layout.dims.clone(),
        train_config: model.train_config.clone(),
        encoders: model.encoders.iter().map(LayerData::from_layer).collect(),
        head: LayerData::from_layer(&model.head),
    };
    // serde_json emits shortest round-trip decimals, so parameters
    // reload bit-exactly
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_model<P: AsRef<Path>>(path: P) -> Result<SdaeModel> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|_| Error::FileNotFound(path.as_ref().to_path_buf()))?;
    let file: SdaeModelFile =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            file.format_version
        )));
    }
    if file.model_kind != "sdae" {
        return Err(Error::ModelFormat(format!(
            "expected an sdae model, found {}",
            file.model_kind
        )));
    }
    let model = SdaeModel {
        encoders: file
            .encoders
            .into_iter()
            .map(LayerData::into_layer)
            .collect::<Result<_>>()?,
        head: file.head.into_layer()?,
        layout: LayerLayout::new(file.layout)?,
        train_config: file.train_config,
    };
    model.check_chain()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_dataset(
        n_classes: usize,
        per_class: usize,
        dim: usize,
        seed: u64,
    ) -> LabeledDataset {
        // well-separated class centers plus small noise
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..n_classes)
            .map(|_| (0..dim).map(|_| rng.gen_range(-0.8..0.8)).collect())
            .collect();
        let mut windows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                let values = center
                    .iter()
                    .map(|v| (v + rng.gen_range(-0.05..0.05)).clamp(-1.0, 1.0))
                    .collect();
                windows.push(SignalWindow { values });
                labels.push(c);
            }
        }
        LabeledDataset {
            windows,
            labels,
            n_classes,
        }
    }

    fn quick_config(seed: u64) -> TrainConfig {
        TrainConfig {
            pretrain_epochs: 30,
            finetune_epochs: 100,
            batch_size: 4,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pretrain_stack_encoder_shapes() {
        let layout = LayerLayout::new(vec![20, 8, 8, 8, 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let windows = Array2::from_shape_fn((30, 20), |_| rng.gen_range(-0.9..0.9));
        let config = TrainConfig {
            pretrain_epochs: 3,
            ..quick_config(1)
        };
        let (encoders, histories) = pretrain_stack(&windows, &layout, &config).unwrap();
        assert_eq!(encoders.len(), 3);
        assert_eq!((encoders[0].out_dim(), encoders[0].in_dim()), (8, 20));
        assert_eq!((encoders[1].out_dim(), encoders[1].in_dim()), (8, 8));
        assert_eq!((encoders[2].out_dim(), encoders[2].in_dim()), (8, 8));
        assert_eq!(histories.len(), 3);
        assert!(histories.iter().all(|h| h.len() == 3));
    }

    #[test]
    fn pretrain_stack_degenerate_layout_gives_no_encoders() {
        let layout = LayerLayout::new(vec![10, 4]).unwrap();
        let windows = Array2::zeros((5, 10));
        let (encoders, histories) =
            pretrain_stack(&windows, &layout, &quick_config(2)).unwrap();
        assert!(encoders.is_empty());
        assert!(histories.is_empty());
    }

    #[test]
    fn second_layer_inputs_are_first_layer_codes() {
        // rebuilt by hand from the returned encoders
        let layout = LayerLayout::new(vec![12, 5, 4, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let windows = Array2::from_shape_fn((15, 12), |_| rng.gen_range(-0.9..0.9));
        let config = TrainConfig {
            pretrain_epochs: 2,
            ..quick_config(4)
        };
        let (encoders, _) = pretrain_stack(&windows, &layout, &config).unwrap();
        let codes = encode_all(&encoders[0], &windows);
        for row in codes.rows() {
            assert_eq!(row.len(), 5);
            assert!(row.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn fine_tune_zero_epochs_keeps_encoders() {
        let layout = LayerLayout::new(vec![6, 3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let encoders = vec![DenseLayer::init(3, 6, &mut rng)];
        let before = encoders.clone();
        let windows = Array2::from_shape_fn((4, 6), |_| rng.gen_range(-0.5..0.5));
        let labels = vec![0, 1, 0, 1];
        let config = TrainConfig {
            finetune_epochs: 0,
            ..quick_config(6)
        };
        let (model, history) =
            fine_tune(encoders, &windows, &labels, &layout, &config).unwrap();
        assert_eq!(model.encoders, before);
        assert!(history.is_empty());
        // head is freshly initialized, matching a rebuild from the same seed
        let mut head_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
        assert_eq!(model.head, DenseLayer::init(2, 3, &mut head_rng));
    }

    #[test]
    fn fine_tune_separable_toy_task_hits_full_accuracy() {
        let layout = LayerLayout::new(vec![4, 3, 2]).unwrap();
        let dataset = toy_dataset(2, 6, 4, 7);
        let config = quick_config(8);
        let (model, _) = train_sdae(&dataset, &layout, &config).unwrap();
        let correct = dataset
            .windows
            .iter()
            .zip(&dataset.labels)
            .filter(|(w, &l)| predict(&model, w).unwrap().0 == l)
            .count();
        assert_eq!(correct, dataset.len());
    }

    #[test]
    fn training_is_deterministic() {
        let layout = LayerLayout::new(vec![6, 4, 3]).unwrap();
        let dataset = toy_dataset(3, 5, 6, 9);
        let config = quick_config(10);
        let (a, log_a) = train_sdae(&dataset, &layout, &config).unwrap();
        let (b, log_b) = train_sdae(&dataset, &layout, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(log_a.len(), log_b.len());
        for (ra, rb) in log_a.iter().zip(&log_b) {
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
        }
    }

    #[test]
    fn full_stack_gradient_passes_grad_check() {
        use crate::nn::{grad_check, Target};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layers = vec![
            DenseLayer::init(6, 8, &mut rng),
            DenseLayer::init(5, 6, &mut rng),
            DenseLayer::init(4, 5, &mut rng),
            DenseLayer::init(3, 4, &mut rng),
        ];
        let acts = [
            Activation::Tanh,
            Activation::Tanh,
            Activation::Tanh,
            Activation::Softmax,
        ];
        let x = Array1::from_shape_fn(8, |_| rng.gen_range(-1.0..1.0));
        let err =
            grad_check(&layers, &acts, Loss::CrossEntropy, &x, &Target::Label(1), 1e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn predict_all_zero_model_is_uniform_label_zero() {
        let model = SdaeModel {
            encoders: vec![DenseLayer::zeros(4, 5)],
            head: DenseLayer::zeros(30, 4),
            layout: LayerLayout::new(vec![5, 4, 30]).unwrap(),
            train_config: TrainConfig::default(),
        };
        let window = SignalWindow {
            values: vec![0.3, -0.2, 0.5, 0.0, 0.9],
        };
        let (label, probs) = predict(&model, &window).unwrap();
        assert_eq!(label, 0);
        for p in &probs {
            assert!((p - 1.0 / 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_matches_manual_encode_chain() {
        use crate::dae::encode as dae_encode;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = SdaeModel {
            encoders: vec![
                DenseLayer::init(6, 10, &mut rng),
                DenseLayer::init(4, 6, &mut rng),
            ],
            head: DenseLayer::init(3, 4, &mut rng),
            layout: LayerLayout::new(vec![10, 6, 4, 3]).unwrap(),
            train_config: TrainConfig::default(),
        };
        let window = SignalWindow {
            values: (0..10).map(|i| (i as f64 / 10.0) - 0.5).collect(),
        };
        let (label, probs) = predict(&model, &window).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // compositional oracle via dae::encode
        let wrap = |layer: &DenseLayer| Dae {
            encoder: layer.clone(),
            decoder: DenseLayer::zeros(layer.in_dim(), layer.out_dim()),
            corruption_fraction: 0.0,
            decoder_activation: Activation::Tanh,
        };
        let h1 = dae_encode(&wrap(&model.encoders[0]), &Array1::from(window.values.clone()))
            .unwrap();
        let h2 = dae_encode(&wrap(&model.encoders[1]), &h1).unwrap();
        let expected = nn::activate(
            Activation::Softmax,
            &nn::affine_forward(&model.head, &h2).unwrap(),
        );
        for (p, e) in probs.iter().zip(expected.iter()) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(label, argmax(expected.as_slice().unwrap()));
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let layout = LayerLayout::new(vec![8, 5, 4]).unwrap();
        let dataset = toy_dataset(4, 4, 8, 13);
        let config = quick_config(14);
        let (model, _) = train_sdae(&dataset, &layout, &config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);

        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let window = SignalWindow {
                values: (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let a = predict(&model, &window).unwrap();
            let b = predict(&loaded, &window).unwrap();
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let model = SdaeModel {
            encoders: vec![],
            head: DenseLayer::zeros(2, 3),
            layout: LayerLayout::new(vec![3, 2]).unwrap(),
            train_config: TrainConfig::default(),
        };
        save_model(&model, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"rows\": 2", "\"rows\": 4");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn load_rejects_bad_version_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        let model = SdaeModel {
            encoders: vec![],
            head: DenseLayer::zeros(2, 3),
            layout: LayerLayout::new(vec![3, 2]).unwrap(),
            train_config: TrainConfig::default(),
        };
        save_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));

        let garbage = dir.path().join("g.json");
        std::fs::write(&garbage, "{not json").unwrap();
        assert!(matches!(load_model(&garbage), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn empty_hidden_layer_model_round_trips() {
        let layout = LayerLayout::new(vec![4, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let model = SdaeModel {
            encoders: vec![],
            head: DenseLayer::init(3, 4, &mut rng),
            layout,
            train_config: TrainConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.json");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn finetune_loss_moving_average_is_non_increasing() {
        let dataset = crate::signal::synth_corpus(3, 12, 21).unwrap();
        let layout = LayerLayout::from_hidden(500, &[32, 32], 3).unwrap();
        let config = TrainConfig {
            pretrain_epochs: 20,
            finetune_epochs: 100,
            seed: 21,
            ..TrainConfig::default()
        };
        let (_, log) = train_sdae(&dataset, &layout, &config).unwrap();
        let losses: Vec<f64> = log
            .iter()
            .filter(|r| r.phase == "finetune")
            .map(|r| r.loss)
            .collect();
        assert_eq!(losses.len(), 100);
        let ma: Vec<f64> = (0..=losses.len() - 10)
            .map(|i| losses[i..i + 10].iter().sum::<f64>() / 10.0)
            .collect();
        for pair in ma.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "smoothed loss rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
}
