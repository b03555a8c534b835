//! Experiment harness: chronological train/test splitting, accuracy
//! and confusion metrics, inference timing, end-to-end experiment runs,
//! and the parameter sweeps with repetition averaging.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{mfcc_feature, MfccConfig};
use crate::sdae::{
    load_model, predict as sdae_predict, save_model, train_sdae, LayerLayout, SdaeModel,
    TrainConfig, TrainLogRecord,
};
use crate::shallow::{
    load_svm, save_svm, train_svm_pipeline, FeatureKind, SvmConfig, SvmModel,
};
use crate::signal::{self, LabeledDataset, SignalWindow};

/// Chronological per-class split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_per_class: 100,
            test_per_class: 20,
        }
    }
}

/// Per class, the first `train_per_class` trials in stored order go to
/// the training set and the next `test_per_class` to the test set.
pub fn split(dataset: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    if spec.train_per_class == 0 || spec.test_per_class == 0 {
        return Err(Error::InvalidConfig("split sizes must be >= 1".into()));
    }
    let needed = spec.train_per_class + spec.test_per_class;
    let mut seen = vec![0usize; dataset.n_classes];
    let mut train = LabeledDataset {
        windows: Vec::new(),
        labels: Vec::new(),
        n_classes: dataset.n_classes,
    };
    let mut test = train.clone();
    for (w, &l) in dataset.windows.iter().zip(&dataset.labels) {
        if seen[l] < spec.train_per_class {
            train.windows.push(w.clone());
            train.labels.push(l);
        } else if seen[l] < needed {
            test.windows.push(w.clone());
            test.labels.push(l);
        }
        seen[l] += 1;
    }
    for (class, &available) in seen.iter().enumerate() {
        if available < needed {
            return Err(Error::InsufficientTrials {
                class,
                available,
                needed,
            });
        }
    }
    Ok((train, test))
}

/// Row-normalized estimate-vs-truth table; row = ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Test samples per true class.
    pub class_counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.rows.len()
    }

    /// Label-frequency-weighted trace; equals overall accuracy.
    pub fn weighted_trace(&self) -> f64 {
        let total: usize = self.class_counts.iter().sum();
        self.rows
            .iter()
            .enumerate()
            .map(|(c, row)| row[c] * self.class_counts[c] as f64 / total as f64)
            .sum()
    }

    /// CSV with one header column per class index.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<String> = (0..self.n_classes()).map(|c| c.to_string()).collect();
        w.write_record(&header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Accuracy and confusion matrix of a predictor over a test set.
pub fn evaluate<F>(mut predict: F, test: &LabeledDataset) -> Result<(f64, ConfusionMatrix)>
where
    F: FnMut(&SignalWindow) -> Result<usize>,
{
    if test.is_empty() {
        return Err(Error::InvalidConfig("empty test set".into()));
    }
    let n = test.n_classes;
    let mut counts = vec![vec![0usize; n]; n];
    let mut class_counts = vec![0usize; n];
    let mut correct = 0usize;
    for (w, &truth) in test.windows.iter().zip(&test.labels) {
        let estimate = predict(w)?;
        counts[truth][estimate.min(n - 1)] += 1;
        class_counts[truth] += 1;
        if estimate == truth {
            correct += 1;
        }
    }
    let rows = counts
        .iter()
        .zip(&class_counts)
        .map(|(row, &total)| {
            if total == 0 {
                vec![0.0; n]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok((
        correct as f64 / test.len() as f64,
        ConfusionMatrix { rows, class_counts },
    ))
}

/// Wall-clock (min, max) seconds over `repetitions` full passes of
/// classification only.
pub fn time_inference<F>(
    mut predict: F,
    test: &LabeledDataset,
    repetitions: usize,
) -> Result<(f64, f64)>
where
    F: FnMut(&SignalWindow) -> Result<usize>,
{
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
    }
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for _ in 0..repetitions {
        let start = Instant::now();
        for w in &test.windows {
            std::hint::black_box(predict(w)?);
        }
        let elapsed = start.elapsed().as_secs_f64();
        min = min.min(elapsed);
        max = max.max(elapsed);
    }
    Ok((min, max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sdae")]
    Sdae,
    #[serde(rename = "svm-raw")]
    SvmRaw,
    #[serde(rename = "svm-mfcc")]
    SvmMfcc,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sdae => "sdae",
            Method::SvmRaw => "svm-raw",
            Method::SvmMfcc => "svm-mfcc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        n_classes: usize,
        trials_per_class: usize,
        seed: u64,
    },
    Manifest {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitSpec,
    pub window_len: usize,
    /// Interior hidden-layer sizes of the deep network.
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default)]
    pub mfcc: MfccConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Sdae,
            dataset: DatasetSource::Synthetic {
                n_classes: 30,
                trials_per_class: 120,
                seed: 42,
            },
            split: SplitSpec::default(),
            window_len: signal::DEFAULT_WINDOW_LEN,
            hidden: vec![200, 200, 200],
            train: TrainConfig::default(),
            svm: SvmConfig::default(),
            mfcc: MfccConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Small profile for CI: 3 classes, 20 trials, 50 pretraining and
    /// 100 fine-tuning epochs, narrow layers.
    pub fn fast() -> Self {
        Self {
            dataset: DatasetSource::Synthetic {
                n_classes: 3,
                trials_per_class: 20,
                seed: 42,
            },
            split: SplitSpec {
                train_per_class: 15,
                test_per_class: 5,
            },
            hidden: vec![64, 64, 64],
            train: TrainConfig {
                pretrain_epochs: 50,
                finetune_epochs: 100,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        match &self.dataset {
            DatasetSource::Synthetic {
                n_classes,
                trials_per_class,
                seed,
            } => signal::synth_corpus(*n_classes, *trials_per_class, *seed),
            DatasetSource::Manifest { path } => {
                signal::load_manifest_dataset(path, self.window_len)
            }
        }
    }
}

/// A trained classifier of either family.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Sdae(SdaeModel),
    Svm { model: SvmModel, mfcc: MfccConfig },
}

impl TrainedModel {
    pub fn predict_window(&self, window: &SignalWindow) -> Result<(usize, Vec<f64>)> {
        match self {
            TrainedModel::Sdae(m) => sdae_predict(m, window),
            TrainedModel::Svm { model, mfcc } => {
                let feature = match model.svm.feature_kind {
                    FeatureKind::Raw => window.values.clone(),
                    FeatureKind::Mfcc => mfcc_feature(window, mfcc)?.values,
                };
                model.predict(&feature)
            }
        }
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        match self {
            TrainedModel::Sdae(m) => save_model(m, path),
            TrainedModel::Svm { model, .. } => save_svm(model, path),
        }
    }

    /// Load either model kind, dispatching on the file's `model_kind`.
    pub fn load<P: AsRef<Path>>(path: P, mfcc: MfccConfig) -> Result<TrainedModel> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|_| Error::FileNotFound(path.as_ref().to_path_buf()))?;
        let probe: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        match probe.get("model_kind").and_then(|v| v.as_str()) {
            Some("sdae") => Ok(TrainedModel::Sdae(load_model(path)?)),
            Some("svm") => Ok(TrainedModel::Svm {
                model: load_svm(path)?,
                mfcc,
            }),
            other => Err(Error::ModelFormat(format!(
                "unrecognized model_kind {other:?}"
            ))),
        }
    }
}

/// Train the configured method on a training split.
pub fn train_method(
    config: &ExperimentConfig,
    train: &LabeledDataset,
) -> Result<(TrainedModel, Vec<TrainLogRecord>)> {
    match config.method {
        Method::Sdae => {
            let layout =
                LayerLayout::from_hidden(config.window_len, &config.hidden, train.n_classes)?;
            let (model, log) = train_sdae(train, &layout, &config.train)?;
            Ok((TrainedModel::Sdae(model), log))
        }
        Method::SvmRaw => {
            let features: Vec<Vec<f64>> =
                train.windows.iter().map(|w| w.values.clone()).collect();
            let model =
                train_svm_pipeline(&features, &train.labels, FeatureKind::Raw, &config.svm)?;
            Ok((
                TrainedModel::Svm {
                    model,
                    mfcc: config.mfcc.clone(),
                },
                Vec::new(),
            ))
        }
        Method::SvmMfcc => {
            let features: Vec<Vec<f64>> = train
                .windows
                .iter()
                .map(|w| mfcc_feature(w, &config.mfcc).map(|f| f.values))
                .collect::<Result<_>>()?;
            let model =
                train_svm_pipeline(&features, &train.labels, FeatureKind::Mfcc, &config.svm)?;
            Ok((
                TrainedModel::Svm {
                    model,
                    mfcc: config.mfcc.clone(),
                },
                Vec::new(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub feature_dim: usize,
    pub timing_min_s: f64,
    pub timing_max_s: f64,
    pub train_seconds: f64,
}

impl ExperimentReport {
    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Full protocol on an already loaded corpus: split, train, evaluate,
/// time inference.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    dataset: &LabeledDataset,
) -> Result<(ExperimentReport, ConfusionMatrix, TrainedModel)> {
    let (train, test) = split(dataset, &config.split)?;
    let start = Instant::now();
    let (model, _log) = train_method(config, &train)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let (accuracy, confusion) = evaluate(|w| model.predict_window(w).map(|p| p.0), &test)?;
    let (timing_min_s, timing_max_s) =
        time_inference(|w| model.predict_window(w).map(|p| p.0), &test, 3)?;
    let feature_dim = match config.method {
        Method::SvmMfcc => 3 * config.mfcc.n_ceps,
        _ => config.window_len,
    };
    Ok((
        ExperimentReport {
            config: config.clone(),
            accuracy,
            n_train: train.len(),
            n_test: test.len(),
            feature_dim,
            timing_min_s,
            timing_max_s,
            train_seconds,
        },
        confusion,
        model,
    ))
}

/// Load the configured corpus and run the full protocol.
pub fn run_experiment(
    config: &ExperimentConfig,
) -> Result<(ExperimentReport, ConfusionMatrix, TrainedModel)> {
    let dataset = config.load_dataset()?;
    run_experiment_on(config, &dataset)
}

// ---- sweeps ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    HiddenLayers,
    Layout,
    HiddenNodes,
    PretrainEpochs,
    FinetuneEpochs,
    LearningRate,
    Denoising,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hidden_layers" => SweepParam::HiddenLayers,
            "layout" => SweepParam::Layout,
            "hidden_nodes" => SweepParam::HiddenNodes,
            "pretrain_epochs" => SweepParam::PretrainEpochs,
            "finetune_epochs" => SweepParam::FinetuneEpochs,
            "learning_rate" => SweepParam::LearningRate,
            "denoising" => SweepParam::Denoising,
            other => return Err(Error::UnknownSweepParam(other.to_string())),
        })
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::HiddenLayers => "hidden_layers",
            SweepParam::Layout => "layout",
            SweepParam::HiddenNodes => "hidden_nodes",
            SweepParam::PretrainEpochs => "pretrain_epochs",
            SweepParam::FinetuneEpochs => "finetune_epochs",
            SweepParam::LearningRate => "learning_rate",
            SweepParam::Denoising => "denoising",
        })
    }
}

/// One grid point: a number, or a full layer layout like
/// `500-100-100-100-30`.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Layout(Vec<usize>),
}

impl SweepValue {
    pub fn parse(param: SweepParam, s: &str) -> Result<Self> {
        match param {
            SweepParam::Layout => {
                let dims = s
                    .split('-')
                    .map(|p| {
                        p.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidConfig(format!("bad layout '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if dims.len() < 2 {
                    return Err(Error::InvalidConfig(format!("bad layout '{s}'")));
                }
                Ok(SweepValue::Layout(dims))
            }
            _ => s
                .trim()
                .parse::<f64>()
                .map(SweepValue::Number)
                .map_err(|_| Error::InvalidConfig(format!("bad sweep value '{s}'"))),
        }
    }
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Layout(dims) => {
                let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
                f.write_str(&parts.join("-"))
            }
        }
    }
}

fn apply_sweep_value(
    base: &ExperimentConfig,
    param: SweepParam,
    value: &SweepValue,
) -> Result<ExperimentConfig> {
    let mut config = base.clone();
    let number = |v: &SweepValue| -> Result<f64> {
        match v {
            SweepValue::Number(n) => Ok(*n),
            SweepValue::Layout(_) => Err(Error::InvalidConfig(format!(
                "{param} takes a numeric value"
            ))),
        }
    };
    match param {
        SweepParam::HiddenLayers => {
            let n = number(value)? as usize;
            let nodes = base.hidden.first().copied().unwrap_or(200);
            config.hidden = vec![nodes; n];
        }
        SweepParam::HiddenNodes => {
            let nodes = number(value)? as usize;
            config.hidden = vec![nodes; base.hidden.len().max(1)];
        }
        SweepParam::Layout => match value {
            SweepValue::Layout(dims) => {
                config.hidden = dims[1..dims.len() - 1].to_vec();
            }
            SweepValue::Number(_) => {
                return Err(Error::InvalidConfig("layout sweep needs layouts".into()))
            }
        },
        SweepParam::PretrainEpochs => config.train.pretrain_epochs = number(value)? as usize,
        SweepParam::FinetuneEpochs => config.train.finetune_epochs = number(value)? as usize,
        SweepParam::LearningRate => {
            let lr = number(value)?;
            config.train.pretrain_lr = lr;
            config.train.finetune_lr = lr;
        }
        SweepParam::Denoising => config.train.corruption_fraction = number(value)?,
    }
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub value: String,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub seconds: Vec<f64>,
}

/// Run `repetitions` independent seeds per grid value over a fixed
/// corpus; only the training seed varies between repetitions.
pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[SweepValue],
    repetitions: usize,
) -> Result<Vec<SweepResult>> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
    }
    let dataset = base.load_dataset()?;
    let mut results = Vec::with_capacity(values.len());
    for value in values {
        let config = apply_sweep_value(base, param, value)?;
        let mut accuracies = Vec::with_capacity(repetitions);
        let mut seconds = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let mut rep_config = config.clone();
            rep_config.train.seed = base.train.seed.wrapping_add(rep as u64);
            rep_config.svm.seed = base.svm.seed.wrapping_add(rep as u64);
            let start = Instant::now();
            let (report, _, _) = run_experiment_on(&rep_config, &dataset)?;
            seconds.push(start.elapsed().as_secs_f64());
            accuracies.push(report.accuracy);
        }
        let mean_accuracy = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
        results.push(SweepResult {
            parameter: param.to_string(),
            value: value.to_string(),
            accuracies,
            mean_accuracy,
            seconds,
        });
    }
    Ok(results)
}

/// CSV `param,value,rep,accuracy,seconds`, one row per repetition plus
/// a `mean` row per value.
pub fn write_sweep_csv<P: AsRef<Path>>(path: P, results: &[SweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["param", "value", "rep", "accuracy", "seconds"])?;
    for r in results {
        for (rep, (acc, sec)) in r.accuracies.iter().zip(&r.seconds).enumerate() {
            w.write_record([
                r.parameter.clone(),
                r.value.clone(),
                rep.to_string(),
                acc.to_string(),
                sec.to_string(),
            ])?;
        }
        let total: f64 = r.seconds.iter().sum();
        w.write_record([
            r.parameter.clone(),
            r.value.clone(),
            "mean".to_string(),
            r.mean_accuracy.to_string(),
            total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
