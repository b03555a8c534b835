//! Command-line front end for the knock-recognition experiments.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use knock_core::eval::{
    evaluate, split, sweep, time_inference, write_sweep_csv, DatasetSource,
    ExperimentConfig, ExperimentReport, Method, SweepParam, SweepValue, TrainedModel,
};
use knock_core::features::MfccConfig;
use knock_core::nn::{grad_check, Activation, DenseLayer, Loss, Target};
use knock_core::sdae::write_training_log;
use knock_core::signal::{self, extract_window, normalize, CorpusConfig};
use knock_core::wav::load_wav;

#[derive(Parser)]
#[command(name = "knock", version, about = "Knock-sound object recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic knock corpus as WAV files plus a manifest
    Synth(SynthArgs),
    /// Train a model on the training split and save it
    Train(TrainArgs),
    /// Evaluate a saved model on the test split
    Eval(EvalArgs),
    /// Sweep one hyperparameter over a value grid with repetitions
    Sweep(SweepArgs),
    /// Verify analytic gradients against central differences
    Gradcheck(GradcheckArgs),
    /// Classify a single WAV recording
    Predict(PredictArgs),
}

/// Experiment settings: a JSON config file plus flag overrides.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Small CI-scale profile as the baseline instead of the full one
    #[arg(long)]
    fast: bool,
    /// Classifier: sdae, svm-raw, or svm-mfcc
    #[arg(long)]
    method: Option<String>,
    /// Train from WAVs listed in this `path,label` manifest CSV
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Synthetic corpus classes
    #[arg(long)]
    classes: Option<usize>,
    /// Synthetic corpus trials per class
    #[arg(long)]
    trials: Option<usize>,
    /// Synthetic corpus seed
    #[arg(long)]
    corpus_seed: Option<u64>,
    /// Training seed
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden layer sizes, comma separated, e.g. 200,200,200
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    finetune_epochs: Option<usize>,
    /// Learning rate for both pretraining and fine-tuning
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Fraction of inputs zeroed during pretraining
    #[arg(long)]
    corruption: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None if self.fast => ExperimentConfig::fast(),
            None => ExperimentConfig::default(),
        };
        if self.config.is_some() && self.fast {
            bail!("--fast replaces the default config; drop it when passing --config");
        }
        if let Some(m) = &self.method {
            config.method = match m.as_str() {
                "sdae" => Method::Sdae,
                "svm-raw" => Method::SvmRaw,
                "svm-mfcc" => Method::SvmMfcc,
                other => bail!("unknown method '{other}' (try sdae, svm-raw, svm-mfcc)"),
            };
        }
        if let Some(path) = &self.manifest {
            config.dataset = DatasetSource::Manifest { path: path.clone() };
        }
        if self.classes.is_some() || self.trials.is_some() || self.corpus_seed.is_some() {
            let (mut n_classes, mut trials_per_class, mut seed) = match config.dataset {
                DatasetSource::Synthetic {
                    n_classes,
                    trials_per_class,
                    seed,
                } => (n_classes, trials_per_class, seed),
                DatasetSource::Manifest { .. } => (30, 120, 42),
            };
            if let Some(c) = self.classes {
                n_classes = c;
            }
            if let Some(t) = self.trials {
                trials_per_class = t;
            }
            if let Some(s) = self.corpus_seed {
                seed = s;
            }
            config.dataset = DatasetSource::Synthetic {
                n_classes,
                trials_per_class,
                seed,
            };
        }
        if let Some(s) = self.seed {
            config.train.seed = s;
            config.svm.seed = s;
        }
        if let Some(h) = &self.hidden {
            config.hidden = h
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("parsing --hidden '{h}'"))?;
        }
        if let Some(e) = self.pretrain_epochs {
            config.train.pretrain_epochs = e;
        }
        if let Some(e) = self.finetune_epochs {
            config.train.finetune_epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            config.train.pretrain_lr = lr;
            config.train.finetune_lr = lr;
            config.svm.lr0 = lr;
        }
        if let Some(f) = self.corruption {
            config.train.corruption_fraction = f;
        }
        if let Some(b) = self.batch_size {
            config.train.batch_size = b;
        }
        if let Some(n) = self.train_per_class {
            config.split.train_per_class = n;
        }
        if let Some(n) = self.test_per_class {
            config.split.test_per_class = n;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for WAVs and manifest.csv
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    classes: usize,
    #[arg(long, default_value_t = 120)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Where to save the trained model (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Optional per-epoch training-loss CSV
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Saved model to evaluate
    #[arg(long)]
    model: PathBuf,
    /// Report JSON output path
    #[arg(long)]
    report: PathBuf,
    /// Confusion-matrix CSV output path
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Hyperparameter to sweep: hidden_layers, layout, hidden_nodes,
    /// pretrain_epochs, finetune_epochs, learning_rate, or denoising
    #[arg(long)]
    param: String,
    /// Comma-separated grid, e.g. 1,2,3 or 500-100-100-100-30,500-200-200-200-30
    #[arg(long)]
    values: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Sweep CSV output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Number of random architectures to check
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 124)]
    seed: u64,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Maximum tolerated relative error
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model (deep or shallow)
    #[arg(long)]
    model: PathBuf,
    /// Mono PCM WAV recording of one knock
    #[arg(long)]
    wav: PathBuf,
    #[arg(long, default_value_t = signal::DEFAULT_WINDOW_LEN)]
    window_len: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Predict(args) => cmd_predict(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let manifest = signal::write_corpus_dir(
        &args.out,
        args.classes,
        args.trials,
        args.seed,
        &CorpusConfig::default(),
    )?;
    println!(
        "wrote {} recordings ({} classes x {} trials) and {}",
        args.classes * args.trials,
        args.classes,
        args.trials,
        manifest.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let dataset = config.load_dataset()?;
    let (train, _test) = split(&dataset, &config.split)?;
    let start = std::time::Instant::now();
    let (model, log) = knock_core::eval::train_method(&config, &train)?;
    println!(
        "trained {} on {} windows in {:.1} s",
        config.method,
        train.len(),
        start.elapsed().as_secs_f64()
    );
    model.save(&args.model)?;
    println!("model saved to {}", args.model.display());
    if let Some(path) = &args.log {
        write_training_log(path, &log)?;
        println!("training log saved to {}", path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let model = TrainedModel::load(&args.model, config.mfcc.clone())?;
    let dataset = config.load_dataset()?;
    let (train, test) = split(&dataset, &config.split)?;
    let (accuracy, confusion) = evaluate(|w| model.predict_window(w).map(|p| p.0), &test)?;
    let (timing_min_s, timing_max_s) =
        time_inference(|w| model.predict_window(w).map(|p| p.0), &test, 3)?;
    let feature_dim = match config.method {
        Method::SvmMfcc => 3 * config.mfcc.n_ceps,
        _ => config.window_len,
    };
    let report = ExperimentReport {
        accuracy,
        n_train: train.len(),
        n_test: test.len(),
        feature_dim,
        timing_min_s,
        timing_max_s,
        train_seconds: 0.0,
        config,
    };
    report.write_json(&args.report)?;
    println!(
        "accuracy {:.4} on {} test windows; inference {:.5}-{:.5} s per pass",
        accuracy, report.n_test, timing_min_s, timing_max_s
    );
    println!("report saved to {}", args.report.display());
    if let Some(path) = &args.confusion {
        confusion.write_csv(path)?;
        println!("confusion matrix saved to {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let param: SweepParam = args.param.parse()?;
    let values = args
        .values
        .split(',')
        .map(|v| SweepValue::parse(param, v))
        .collect::<knock_core::Result<Vec<_>>>()?;
    let results = sweep(&config, param, &values, args.reps)?;
    write_sweep_csv(&args.out, &results)?;
    for r in &results {
        println!("{} = {}: mean accuracy {:.4}", r.parameter, r.value, r.mean_accuracy);
    }
    println!("sweep results saved to {}", args.out.display());
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    use ndarray::Array1;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst = 0.0f64;
    for arch in 0..args.count {
        let n_layers = 1 + arch % 4;
        let mut dims = Vec::with_capacity(n_layers + 1);
        for _ in 0..=n_layers {
            dims.push(rng.gen_range(2..=32usize));
        }
        let layers: Vec<DenseLayer> = (0..n_layers)
            .map(|i| DenseLayer::init(dims[i + 1], dims[i], &mut rng))
            .collect();
        let mut activations = vec![Activation::Tanh; n_layers];
        let (loss, target) = if arch % 2 == 0 {
            activations[n_layers - 1] = Activation::Softmax;
            (
                Loss::CrossEntropy,
                Target::Label(rng.gen_range(0..dims[n_layers])),
            )
        } else {
            (
                Loss::Mse,
                Target::Vector(Array1::from_shape_fn(dims[n_layers], |_| {
                    rng.gen_range(-0.9..0.9)
                })),
            )
        };
        let x = Array1::from_shape_fn(dims[0], |_| rng.gen_range(-1.0..1.0));
        let err = grad_check(&layers, &activations, loss, &x, &target, args.eps)?;
        worst = worst.max(err);
    }
    println!(
        "max relative error {worst:.3e} over {} architectures (tolerance {:.0e})",
        args.count, args.tolerance
    );
    if worst >= args.tolerance {
        bail!("gradient check failed");
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model, MfccConfig::default())?;
    let raw = load_wav(&args.wav)?;
    let window = normalize(&extract_window(&raw, args.window_len)?);
    let (label, probs) = model.predict_window(&window)?;
    println!("label: {label}");
    let mut ranked: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (class, score) in ranked.iter().take(5) {
        println!("  class {class}: {score:.6}");
    }
    Ok(())
}
