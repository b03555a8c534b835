//! Acoustic object recognition from knock sounds.
//!
//! Peak-aligned 500-sample knock windows are classified by a stacked
//! denoising autoencoder (greedy layer-wise pretraining followed by
//! supervised fine-tuning), benchmarked against shallow linear-SVM
//! baselines on raw windows and on 36-dim MFCC features. A synthetic
//! damped-resonance corpus stands in for physical recordings, and an
//! experiment harness reproduces the split/evaluate/sweep protocol.

pub mod dae;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod sdae;
pub mod shallow;
pub mod signal;
pub mod wav;

pub use error::{Error, Result};
pub use eval::{
    evaluate, run_experiment, split, sweep, time_inference, ConfusionMatrix, DatasetSource,
    ExperimentConfig, ExperimentReport, Method, SplitSpec, SweepParam, SweepResult, SweepValue,
    TrainedModel,
};
pub use features::{mfcc_feature, MfccConfig, MfccFeature};
pub use sdae::{LayerLayout, SdaeModel, TrainConfig};
pub use shallow::{FeatureKind, OvrLinearSvm, SvmConfig, SvmModel};
pub use signal::{
    extract_window, normalize, synth_corpus, synth_knock, KnockClassParams, LabeledDataset,
    RawSignal, SignalWindow,
};
pub use wav::{load_wav, write_wav};
