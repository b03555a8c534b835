//! Baseline 36-dimensional MFCC + delta + delta-delta features:
//! Hann-windowed frames, power spectrum, triangular mel filterbank,
//! log energies, DCT-II, and temporal derivatives pooled per trial.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalWindow;

pub const MFCC_DIM: usize = 36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    /// 256 samples = 32 ms at 8 kHz.
    pub frame_len: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_filters: usize,
    /// Cepstral order; coefficient 0 is discarded.
    pub n_ceps: usize,
    pub log_floor: f64,
    pub sample_rate_hz: u32,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_len: 256,
            hop: 128,
            n_fft: 256,
            n_filters: 26,
            n_ceps: 12,
            log_floor: 1e-10,
            sample_rate_hz: 8000,
        }
    }
}

/// Hann-windowed overlapping frames of one signal window.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub hop: usize,
}

/// The pooled 36-dim feature: 12 cepstra + 12 deltas + 12 delta-deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccFeature {
    pub values: Vec<f64>,
}

/// Symmetric Hann: `w[k] = 0.5 - 0.5 cos(2 pi k / (n - 1))`.
pub fn hanning_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidConfig("Hann window needs n >= 2".into()));
    }
    Ok((0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
        .collect())
}

/// Split into overlapping frames and taper each with the Hann window.
pub fn frame_signal(window: &SignalWindow, frame_len: usize, hop: usize) -> Result<FrameMatrix> {
    if hop == 0 {
        return Err(Error::InvalidConfig("hop must be >= 1".into()));
    }
    if window.len() < frame_len {
        return Err(Error::DimensionMismatch {
            expected: frame_len,
            got: window.len(),
        });
    }
    let hann = hanning_window(frame_len)?;
    let n_frames = 1 + (window.len() - frame_len) / hop;
    let frames = (0..n_frames)
        .map(|f| {
            let start = f * hop;
            window.values[start..start + frame_len]
                .iter()
                .zip(&hann)
                .map(|(&v, &w)| v * w)
                .collect()
        })
        .collect();
    Ok(FrameMatrix {
        frames,
        frame_len,
        hop,
    })
}

/// `|DFT(frame)|^2` at bins `0 ..= n_fft/2`, zero-padding to `n_fft`.
pub fn power_spectrum(frame: &[f64], n_fft: usize) -> Result<Vec<f64>> {
    if frame.len() > n_fft {
        return Err(Error::DimensionMismatch {
            expected: n_fft,
            got: frame.len(),
        });
    }
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    Ok(buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect())
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with mel-spaced centers between 0 Hz and the
/// Nyquist frequency; every row peaks at 1 at its center bin.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_filters x (n_fft/2 + 1)` weights.
    pub weights: Vec<Vec<f64>>,
    /// Exact mel-spaced center frequencies (before bin snapping).
    pub centers_hz: Vec<f64>,
}

pub fn mel_filterbank(n_filters: usize, rate_hz: u32, n_fft: usize) -> Result<MelFilterbank> {
    if n_filters < 13 {
        return Err(Error::InvalidConfig("need at least 13 mel filters".into()));
    }
    let nyquist = f64::from(rate_hz) / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let n_bins = n_fft / 2 + 1;

    let points_hz: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bins: Vec<usize> = points_hz
        .iter()
        .map(|&hz| ((hz * n_fft as f64 / f64::from(rate_hz)).round() as usize).min(n_bins - 1))
        .collect();
    for w in bins.windows(2).skip(1).take(n_filters) {
        if w[0] >= w[1] {
            return Err(Error::InvalidConfig(format!(
                "{n_filters} filters collide at n_fft = {n_fft}"
            )));
        }
    }

    let mut weights = vec![vec![0.0; n_bins]; n_filters];
    for m in 0..n_filters {
        let (left, center, right) = (bins[m], bins[m + 1], bins[m + 2]);
        for k in left..=center {
            if center > left {
                weights[m][k] = (k - left) as f64 / (center - left) as f64;
            }
        }
        for k in center..=right {
            if right > center {
                weights[m][k] = (right - k) as f64 / (right - center) as f64;
            }
        }
        weights[m][center] = 1.0;
    }
    Ok(MelFilterbank {
        weights,
        centers_hz: points_hz[1..=n_filters].to_vec(),
    })
}

/// Orthonormal DCT-II.
pub fn dct_ii(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let scale0 = (1.0 / n as f64).sqrt();
    let scale = (2.0 / n as f64).sqrt();
    (0..n)
        .map(|k| {
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .sum();
            sum * if k == 0 { scale0 } else { scale }
        })
        .collect()
}

/// Per-frame 12-dim cepstra: power spectrum, filterbank energies,
/// `ln(E + eps)`, DCT-II, coefficients 1..=12.
pub fn mfcc_frames(window: &SignalWindow, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    let framed = frame_signal(window, config.frame_len, config.hop)?;
    let bank = mel_filterbank(config.n_filters, config.sample_rate_hz, config.n_fft)?;
    framed
        .frames
        .iter()
        .map(|frame| {
            let spectrum = power_spectrum(frame, config.n_fft)?;
            let log_energies: Vec<f64> = bank
                .weights
                .iter()
                .map(|row| {
                    let energy: f64 = row.iter().zip(&spectrum).map(|(w, s)| w * s).sum();
                    (energy + config.log_floor).ln()
                })
                .collect();
            let cepstrum = dct_ii(&log_energies);
            Ok(cepstrum[1..=config.n_ceps].to_vec())
        })
        .collect()
}

// delta[t] = c[t+1] - c[t-1] with edge replication
fn deltas(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t_max = frames.len();
    (0..t_max)
        .map(|t| {
            let next = &frames[(t + 1).min(t_max - 1)];
            let prev = &frames[t.saturating_sub(1)];
            next.iter().zip(prev).map(|(n, p)| n - p).collect()
        })
        .collect()
}

/// Mean over frames of (cepstra, delta, delta-delta), concatenated.
pub fn mfcc_feature(window: &SignalWindow, config: &MfccConfig) -> Result<MfccFeature> {
    let ceps = mfcc_frames(window, config)?;
    if ceps.is_empty() {
        return Err(Error::InvalidConfig("no frames".into()));
    }
    let d = deltas(&ceps);
    let dd = deltas(&d);
    let n_frames = ceps.len() as f64;
    let mean = |frames: &[Vec<f64>]| -> Vec<f64> {
        let mut acc = vec![0.0; config.n_ceps];
        for frame in frames {
            for (a, v) in acc.iter_mut().zip(frame) {
                *a += v;
            }
        }
        acc.into_iter().map(|v| v / n_frames).collect()
    };
    let mut values = mean(&ceps);
    values.extend(mean(&d));
    values.extend(mean(&dd));
    debug_assert_eq!(values.len(), 3 * config.n_ceps);
    Ok(MfccFeature { values })
}

/// Dump features as CSV: 36 feature columns plus a label column.
pub fn write_features_csv<P: AsRef<Path>>(
    path: P,
    features: &[MfccFeature],
    labels: &[usize],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = features.first().map_or(MFCC_DIM, |f| f.values.len());
    let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (f, &l) in features.iter().zip(labels) {
        let mut record: Vec<String> = f.values.iter().map(|v| v.to_string()).collect();
        record.push(l.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
