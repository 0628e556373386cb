//! Fixed acoustic features for the built-in baseline.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{rms, AudioClip};
use crate::error::{Error, Result};

/// 25 ms at 16 kHz.
pub const FRAME_LEN: usize = 400;
/// 10 ms at 16 kHz.
pub const HOP_LEN: usize = 160;
pub const FFT_LEN: usize = 512;

const BAND_SPLIT_HZ: f64 = 1000.0;
const ROLLOFF: f64 = 0.85;
const EPS: f64 = 1e-12;

pub const FEATURE_NAMES: [&str; 8] = [
    "rms",
    "log_duration",
    "zero_crossing_rate",
    "spectral_centroid_hz",
    "spectral_rolloff_hz",
    "spectral_flatness",
    "log10_band_energy_ratio",
    "energy_delta_rms",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

pub type FeatureVector = [f64; FEATURE_COUNT];

/// Power spectra of Hann-windowed frames (bins `0..=FFT_LEN/2`).
pub(crate) struct Spectrogram {
    pub frames: Vec<Vec<f64>>,
    pub frame_rms: Vec<f64>,
    pub bin_hz: f64,
}

pub(crate) fn spectrogram(samples: &[f64], sample_rate: u32) -> Spectrogram {
    let window: Vec<f64> = (0..FRAME_LEN)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / FRAME_LEN as f64).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_LEN);
    let n_frames = if samples.len() <= FRAME_LEN {
        1
    } else {
        1 + (samples.len() - FRAME_LEN) / HOP_LEN
    };
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_LEN];
    let mut frames = Vec::with_capacity(n_frames);
    let mut frame_rms = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * HOP_LEN;
        let end = (start + FRAME_LEN).min(samples.len());
        let frame = &samples[start..end];
        frame_rms.push((frame.iter().map(|s| s * s).sum::<f64>() / FRAME_LEN as f64).sqrt());
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, &s) in frame.iter().enumerate() {
            buf[i] = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..=FFT_LEN / 2].iter().map(|c| c.norm_sqr()).collect());
    }
    Spectrogram {
        frames,
        frame_rms,
        bin_hz: f64::from(sample_rate) / FFT_LEN as f64,
    }
}

/// Computes [`FEATURE_NAMES`] in order. Spectral shape features are averaged
/// over frames with non-zero energy.
pub fn extract_features(clip: &AudioClip) -> Result<FeatureVector> {
    let x = clip.samples();
    if x.iter().all(|&s| s == 0.0) {
        return Err(Error::Degenerate("cannot extract features from a silent clip".into()));
    }
    let spec = spectrogram(x, clip.sample_rate());

    let crossings = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    let zcr = crossings as f64 / (x.len().max(2) - 1) as f64;

    let (mut centroid, mut rolloff, mut flatness) = (0.0, 0.0, 0.0);
    let (mut low, mut high) = (0.0, 0.0);
    let mut active = 0usize;
    for power in &spec.frames {
        let total: f64 = power.iter().sum();
        if total <= 0.0 {
            continue;
        }
        active += 1;
        let mags: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
        let mag_total: f64 = mags.iter().sum();
        centroid += mags
            .iter()
            .enumerate()
            .map(|(k, m)| k as f64 * spec.bin_hz * m)
            .sum::<f64>()
            / mag_total;

        let target = ROLLOFF * total;
        let mut acc = 0.0;
        let mut roll_bin = power.len() - 1;
        for (k, p) in power.iter().enumerate() {
            acc += p;
            if acc >= target {
                roll_bin = k;
                break;
            }
        }
        rolloff += roll_bin as f64 * spec.bin_hz;

        let log_mean = power.iter().map(|p| (p + EPS).ln()).sum::<f64>() / power.len() as f64;
        let arith = power.iter().map(|p| p + EPS).sum::<f64>() / power.len() as f64;
        flatness += log_mean.exp() / arith;

        for (k, p) in power.iter().enumerate() {
            if (k as f64) * spec.bin_hz < BAND_SPLIT_HZ {
                low += p;
            } else {
                high += p;
            }
        }
    }
    let active = active.max(1) as f64;

    let deltas: Vec<f64> = spec.frame_rms.windows(2).map(|w| w[1] - w[0]).collect();

    let features = [
        rms(x),
        clip.duration_s().ln(),
        zcr,
        centroid / active,
        rolloff / active,
        flatness / active,
        ((low + EPS) / (high + EPS)).log10(),
        rms(&deltas),
    ];
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!(
            "feature {} is not finite",
            FEATURE_NAMES[i]
        )));
    }
    Ok(features)
}
