//! Raw knock recordings and their conversion into peak-aligned,
//! normalized fixed-length model inputs, plus a synthetic knock corpus
//! built from damped resonance modes.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default recording rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 8000;
/// Default model input length.
pub const DEFAULT_WINDOW_LEN: usize = 500;
/// Default recording duration in seconds.
pub const DEFAULT_DURATION_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl RawSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }
}

/// A fixed-length model input with values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub values: Vec<f64>,
}

impl SignalWindow {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One resonance mode of a struck object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub frequency_hz: f64,
    pub decay_per_s: f64,
    pub amplitude: f64,
}

/// Resonance profile of one synthetic object class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockClassParams {
    pub modes: Vec<Mode>,
    pub noise_std: f64,
}

impl KnockClassParams {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        for m in &self.modes {
            if m.frequency_hz <= 0.0 || m.frequency_hz >= nyquist {
                return Err(Error::InvalidConfig(format!(
                    "mode frequency {} Hz outside (0, {nyquist})",
                    m.frequency_hz
                )));
            }
            if m.decay_per_s <= 0.0 {
                return Err(Error::InvalidConfig("decay rate must be positive".into()));
            }
            if m.amplitude < 0.0 {
                return Err(Error::InvalidConfig("amplitude must be non-negative".into()));
            }
        }
        if self.noise_std < 0.0 {
            return Err(Error::InvalidConfig("noise_std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-trial randomization applied when synthesizing one knock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Relative frequency perturbation, uniform in `±freq_frac`.
    pub freq_frac: f64,
    /// Relative amplitude perturbation, uniform in `±amp_frac`.
    pub amp_frac: f64,
    /// Phase drawn uniformly from `[0, phase_range)` radians.
    pub phase_range: f64,
}

impl Default for Jitter {
    // An impact excites every mode near phase zero, and peak alignment pins
    // the window start, so the defaults keep trials of one class roughly
    // phase-coherent; fully random phases would scatter same-class windows
    // further apart in the time domain than the class means sit from each
    // other, and raw-waveform classifiers could not work at all.
    fn default() -> Self {
        Self {
            freq_frac: 0.005,
            amp_frac: 0.10,
            phase_range: 0.3,
        }
    }
}

impl Jitter {
    pub fn none() -> Self {
        Self {
            freq_frac: 0.0,
            amp_frac: 0.0,
            phase_range: 0.0,
        }
    }
}

/// Labeled window collection; `labels[i]` is the class of `windows[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub windows: Vec<SignalWindow>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Slice `n` samples starting at the peak of `|samples|`, zero-padding
/// on the right if the recording ends early. Ties break to the earliest
/// index.
pub fn extract_window(raw: &RawSignal, n: usize) -> Result<SignalWindow> {
    if raw.samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    if n == 0 {
        return Err(Error::InvalidConfig("window length must be >= 1".into()));
    }
    let mut peak_idx = 0;
    let mut peak_mag = f64::NEG_INFINITY;
    for (i, &s) in raw.samples.iter().enumerate() {
        if s.abs() > peak_mag {
            peak_mag = s.abs();
            peak_idx = i;
        }
    }
    let mut values = Vec::with_capacity(n);
    let end = (peak_idx + n).min(raw.samples.len());
    values.extend_from_slice(&raw.samples[peak_idx..end]);
    values.resize(n, 0.0);
    Ok(SignalWindow { values })
}

/// Rescale by `1 / max|value|` only when the window exceeds `[-1, 1]`.
pub fn normalize(window: &SignalWindow) -> SignalWindow {
    let max_abs = window.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_abs <= 1.0 {
        return window.clone();
    }
    SignalWindow {
        values: window.values.iter().map(|&v| v / max_abs).collect(),
    }
}

/// Synthesize one knock trial with default jitter.
pub fn synth_knock(
    params: &KnockClassParams,
    duration_s: f64,
    rate_hz: u32,
    rng: &mut ChaCha8Rng,
) -> Result<RawSignal> {
    synth_knock_with(params, duration_s, rate_hz, &Jitter::default(), rng)
}

/// Synthesize one knock trial: a sum of exponentially decaying
/// sinusoids with per-trial phase/frequency/amplitude jitter plus
/// Gaussian noise, clipped to `[-1, 1]`.
pub fn synth_knock_with(
    params: &KnockClassParams,
    duration_s: f64,
    rate_hz: u32,
    jitter: &Jitter,
    rng: &mut ChaCha8Rng,
) -> Result<RawSignal> {
    if duration_s <= 0.0 {
        return Err(Error::InvalidConfig("duration must be positive".into()));
    }
    params.validate(rate_hz)?;
    let n = (duration_s * f64::from(rate_hz)).round() as usize;
    let rate = f64::from(rate_hz);

    struct Realized {
        freq: f64,
        decay: f64,
        amp: f64,
        phase: f64,
    }
    let realized: Vec<Realized> = params
        .modes
        .iter()
        .map(|m| Realized {
            freq: m.frequency_hz * (1.0 + uniform_pm(rng, jitter.freq_frac)),
            decay: m.decay_per_s,
            amp: m.amplitude * (1.0 + uniform_pm(rng, jitter.amp_frac)),
            phase: if jitter.phase_range > 0.0 {
                rng.gen_range(0.0..jitter.phase_range)
            } else {
                0.0
            },
        })
        .collect();

    let mut samples = Vec::with_capacity(n);
    for t in 0..n {
        let time = t as f64 / rate;
        let mut s = 0.0;
        for r in &realized {
            s += r.amp * (-r.decay * time).exp() * (TAU * r.freq * time + r.phase).sin();
        }
        if params.noise_std > 0.0 {
            s += gaussian(rng) * params.noise_std;
        }
        samples.push(s.clamp(-1.0, 1.0));
    }
    RawSignal::new(samples, rate_hz)
}

/// Corpus generation settings; defaults mirror the recording protocol
/// (2 s at 8 kHz, 500-sample windows) with 3-5 modes per class drawn
/// from 150-3500 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub window_len: usize,
    pub min_modes: usize,
    pub max_modes: usize,
    pub freq_range_hz: (f64, f64),
    pub decay_range_per_s: (f64, f64),
    pub amp_range: (f64, f64),
    pub noise_std: f64,
    pub jitter: Jitter,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            duration_s: DEFAULT_DURATION_S,
            window_len: DEFAULT_WINDOW_LEN,
            min_modes: 3,
            max_modes: 5,
            freq_range_hz: (150.0, 3500.0),
            decay_range_per_s: (4.0, 40.0),
            amp_range: (0.3, 0.9),
            noise_std: 0.01,
            jitter: Jitter::default(),
        }
    }
}

/// Draw one class's resonance profile.
pub fn sample_class_params(config: &CorpusConfig, rng: &mut ChaCha8Rng) -> KnockClassParams {
    let n_modes = rng.gen_range(config.min_modes..=config.max_modes);
    let modes = (0..n_modes)
        .map(|_| Mode {
            frequency_hz: rng.gen_range(config.freq_range_hz.0..config.freq_range_hz.1),
            decay_per_s: rng.gen_range(config.decay_range_per_s.0..config.decay_range_per_s.1),
            amplitude: rng.gen_range(config.amp_range.0..config.amp_range.1),
        })
        .collect();
    KnockClassParams {
        modes,
        noise_std: config.noise_std,
    }
}

/// Generate a labeled synthetic corpus with default settings.
pub fn synth_corpus(n_classes: usize, trials_per_class: usize, seed: u64) -> Result<LabeledDataset> {
    synth_corpus_with(n_classes, trials_per_class, seed, &CorpusConfig::default())
}

/// Generate `n_classes` distinct resonance profiles and
/// `trials_per_class` peak-aligned, normalized windows per class.
/// Deterministic given the seed.
pub fn synth_corpus_with(
    n_classes: usize,
    trials_per_class: usize,
    seed: u64,
    config: &CorpusConfig,
) -> Result<LabeledDataset> {
    if n_classes < 2 {
        return Err(Error::InvalidConfig("need at least 2 classes".into()));
    }
    if trials_per_class < 2 {
        return Err(Error::InvalidConfig("need at least 2 trials per class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_params: Vec<KnockClassParams> = (0..n_classes)
        .map(|_| sample_class_params(config, &mut rng))
        .collect();

    let mut windows = Vec::with_capacity(n_classes * trials_per_class);
    let mut labels = Vec::with_capacity(n_classes * trials_per_class);
    for (label, params) in class_params.iter().enumerate() {
        for _ in 0..trials_per_class {
            let raw = synth_knock_with(
                params,
                config.duration_s,
                config.sample_rate_hz,
                &config.jitter,
                &mut rng,
            )?;
            let window = normalize(&extract_window(&raw, config.window_len)?);
            windows.push(window);
            labels.push(label);
        }
    }
    Ok(LabeledDataset {
        windows,
        labels,
        n_classes,
    })
}

/// One `path,label` row of a dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: usize,
}

/// Read a `path,label` manifest CSV; relative paths resolve against the
/// manifest's directory.
pub fn read_manifest<P: AsRef<Path>>(path: P) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for record in reader.deserialize() {
        let mut entry: ManifestEntry = record?;
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::Manifest(format!("{} lists no files", path.display())));
    }
    Ok(entries)
}

/// Load every manifest entry into a labeled window dataset.
pub fn load_manifest_dataset<P: AsRef<Path>>(
    manifest_path: P,
    window_len: usize,
) -> Result<LabeledDataset> {
    let entries = read_manifest(manifest_path)?;
    let n_classes = entries.iter().map(|e| e.label).max().unwrap_or(0) + 1;
    let mut windows = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    for entry in &entries {
        let raw = crate::wav::load_wav(&entry.path)?;
        windows.push(normalize(&extract_window(&raw, window_len)?));
        labels.push(entry.label);
    }
    Ok(LabeledDataset {
        windows,
        labels,
        n_classes,
    })
}

/// Synthesize a corpus and write it out as WAV files plus a
/// `manifest.csv`; returns the manifest path.
pub fn write_corpus_dir<P: AsRef<Path>>(
    dir: P,
    n_classes: usize,
    trials_per_class: usize,
    seed: u64,
    config: &CorpusConfig,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_params: Vec<KnockClassParams> = (0..n_classes)
        .map(|_| sample_class_params(config, &mut rng))
        .collect();

    let manifest_path = dir.join("manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest_path)?;
    for (label, params) in class_params.iter().enumerate() {
        for trial in 0..trials_per_class {
            let raw = synth_knock_with(
                params,
                config.duration_s,
                config.sample_rate_hz,
                &config.jitter,
                &mut rng,
            )?;
            let name = format!("class{label:03}_trial{trial:03}.wav");
            crate::wav::write_wav(dir.join(&name), &raw)?;
            writer.serialize(ManifestEntry {
                path: PathBuf::from(name),
                label,
            })?;
        }
    }
    writer.flush()?;
    Ok(manifest_path)
}

fn uniform_pm(rng: &mut ChaCha8Rng, frac: f64) -> f64 {
    if frac > 0.0 {
        rng.gen_range(-frac..frac)
    } else {
        0.0
    }
}

// Box-Muller; two uniforms per draw keeps the stream consumption fixed.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}
