//! Synthetic labelled corpora whose labels are an affine function of the
//! baseline features plus Gaussian noise, so a correct trainer can recover them.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioClip, WavEncoding, SAMPLE_RATE};
use crate::data::{DatasetManifest, LabelScale, PerDimension, SampleRecord, Sex, Split};
use crate::error::{Error, Result};
use crate::perturb::{design_first_order_butterworth, FilterKind};
use crate::predictor::{extract_features, FeatureVector, FEATURE_COUNT};
use crate::rng::{Gaussian, SplitMix64};

/// Standard deviation of the noiseless label component.
const LABEL_SPREAD: f64 = 0.15;

/// Relative feature weights per dimension before rescaling to `LABEL_SPREAD`.
const MIX: [[f64; FEATURE_COUNT]; 3] = [
    [0.6, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.2],
    [0.0, 0.3, 0.0, 0.5, 0.0, -0.3, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, -0.2, 0.0, 0.6, 0.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    /// Speakers are assigned round-robin; even-numbered ones are female.
    pub speakers: usize,
    pub label_noise: f64,
    pub dev_fraction: f64,
    pub scale: LabelScale,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 500,
            seed: 0,
            speakers: 2,
            label_noise: 0.02,
            dev_fraction: 0.3,
            scale: LabelScale::SevenPoint,
        }
    }
}

/// Label generator: `label = bias + weights · features + noise`, clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTarget {
    pub bias: PerDimension<f64>,
    pub weights: PerDimension<Vec<f64>>,
}

impl AffineTarget {
    pub fn noiseless(&self, f: &FeatureVector) -> [f64; 3] {
        let eval = |b: f64, w: &[f64]| b + w.iter().zip(f).map(|(w, x)| w * x).sum::<f64>();
        [
            eval(self.bias.arousal, &self.weights.arousal),
            eval(self.bias.dominance, &self.weights.dominance),
            eval(self.bias.valence, &self.weights.valence),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub all: DatasetManifest,
    pub train: DatasetManifest,
    pub dev: DatasetManifest,
    pub target: AffineTarget,
}

/// Deterministic voiced-like clip: harmonic tone plus filtered noise under a
/// slow amplitude envelope, 1 to 2.5 s long.
pub fn synth_clip(seed: u64, index: usize) -> AudioClip {
    let mut rng = SplitMix64::from_key(&[&seed.to_string(), "synth", &index.to_string()]);
    let n = 16_000 + rng.next_index(24_001);
    let amp = 0.05 + 0.5 * rng.next_f64();
    let f0 = 120.0 + 2500.0 * rng.next_f64().powi(2);
    let decay = 0.2 + 0.7 * rng.next_f64();
    let mix = 0.8 * rng.next_f64();
    let cutoff = 500.0 + 6500.0 * rng.next_f64();
    let am_rate = 0.5 + 5.5 * rng.next_f64();
    let am_depth = 0.9 * rng.next_f64();
    let phase = 2.0 * PI * rng.next_f64();

    let fs = f64::from(SAMPLE_RATE);
    let mut gauss = Gaussian::new(SplitMix64::new(rng.next_u64()));
    let raw_noise: Vec<f64> = (0..n).map(|_| gauss.next()).collect();
    let filter = design_first_order_butterworth(cutoff, SAMPLE_RATE, FilterKind::Lowpass)
        .expect("cutoff below Nyquist");
    let noise = filter.process(&raw_noise);
    let noise_rms = crate::audio::rms(&noise).max(1e-12);

    let mut harmonic_norm = 0.0;
    let harmonics: Vec<(f64, f64)> = (1..=3)
        .map(|h| (f0 * h as f64, decay.powi(h - 1)))
        .filter(|(f, _)| *f < fs / 2.0)
        .inspect(|(_, g)| harmonic_norm += g)
        .collect();

    let samples = (0..n)
        .map(|t| {
            let time = t as f64 / fs;
            let tone: f64 = harmonics
                .iter()
                .map(|(f, g)| g * (2.0 * PI * f * time + phase).sin())
                .sum::<f64>()
                / harmonic_norm;
            let env = (1.0 + am_depth * (2.0 * PI * am_rate * time).sin()) / (1.0 + am_depth);
            let x = amp * env * ((1.0 - mix) * tone + mix * 0.3 * noise[t] / noise_rms);
            // stored as 32-bit float; keep the in-memory clip identical to the file
            f64::from(x.clamp(-1.0, 1.0) as f32)
        })
        .collect();
    AudioClip::new(samples, SAMPLE_RATE).expect("non-empty clip")
}

/// Writes `count` clips under `out_dir/audio` and the manifests
/// `all.csv`, `train.csv` and `dev.csv` under `out_dir`.
pub fn generate_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<SynthDataset> {
    if cfg.count < 4 || cfg.speakers == 0 {
        return Err(Error::Config("need at least 4 clips and 1 speaker".into()));
    }
    if !(cfg.dev_fraction > 0.0 && cfg.dev_fraction < 1.0) {
        return Err(Error::Config(format!(
            "dev fraction must lie in (0, 1), got {}",
            cfg.dev_fraction
        )));
    }
    if !(cfg.label_noise >= 0.0 && cfg.label_noise.is_finite()) {
        return Err(Error::Config("label noise must be a non-negative number".into()));
    }
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let features: Vec<FeatureVector> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let clip = synth_clip(cfg.seed, i);
            write_wav(&clip, &audio_dir.join(format!("{}.wav", sample_id(i))), WavEncoding::Float32)?;
            extract_features(&clip)
        })
        .collect::<Result<_>>()?;

    let target = fit_target(&features);
    let mut noise = Gaussian::new(SplitMix64::from_key(&[&cfg.seed.to_string(), "synth_labels"]));
    let records: Vec<SampleRecord> = features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let clean = target.noiseless(f);
            let labels = clean.map(|y| (y + cfg.label_noise * noise.next()).clamp(0.0, 1.0));
            let speaker = i % cfg.speakers;
            SampleRecord {
                sample_id: sample_id(i),
                audio_path: format!("audio/{}.wav", sample_id(i)),
                speaker_id: format!("spk{speaker:02}"),
                sex: if speaker % 2 == 0 { Sex::Female } else { Sex::Male },
                raw_labels: labels.map(|y| cfg.scale.denormalize(y)),
                duration_s: None,
            }
        })
        .collect();

    let dev_n = ((cfg.count as f64) * cfg.dev_fraction).round().max(2.0) as usize;
    let mut order: Vec<usize> = (0..cfg.count).collect();
    SplitMix64::from_key(&[&cfg.seed.to_string(), "synth_split"]).shuffle(&mut order);
    let mut is_dev = vec![false; cfg.count];
    for &i in &order[..dev_n] {
        is_dev[i] = true;
    }
    let pick = |dev: bool| -> Vec<SampleRecord> {
        records
            .iter()
            .zip(&is_dev)
            .filter(|(_, &d)| d == dev)
            .map(|(r, _)| r.clone())
            .collect()
    };

    let mut all = DatasetManifest::new(cfg.scale, None, records.clone())?;
    let mut train = DatasetManifest::new(cfg.scale, Some(Split::Train), pick(false))?;
    let mut dev = DatasetManifest::new(cfg.scale, Some(Split::Dev), pick(true))?;
    for (m, name) in [(&mut all, "all.csv"), (&mut train, "train.csv"), (&mut dev, "dev.csv")] {
        m.base_dir = out_dir.to_path_buf();
        m.save(&out_dir.join(name))?;
    }
    Ok(SynthDataset {
        all,
        train,
        dev,
        target,
    })
}

fn sample_id(i: usize) -> String {
    format!("syn{i:04}")
}

/// Turns the fixed mixing weights into an affine map over raw features whose
/// noiseless output has mean 0.5 and standard deviation `LABEL_SPREAD`.
fn fit_target(features: &[FeatureVector]) -> AffineTarget {
    let n = features.len() as f64;
    let mean: Vec<f64> = (0..FEATURE_COUNT)
        .map(|j| features.iter().map(|f| f[j]).sum::<f64>() / n)
        .collect();
    let std: Vec<f64> = (0..FEATURE_COUNT)
        .map(|j| {
            let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
            var.sqrt().max(1e-12)
        })
        .collect();
    let mut bias = [0.0; 3];
    let mut weights: [Vec<f64>; 3] = Default::default();
    for d in 0..3 {
        let combo: Vec<f64> = features
            .iter()
            .map(|f| (0..FEATURE_COUNT).map(|j| MIX[d][j] * (f[j] - mean[j]) / std[j]).sum())
            .collect();
        let cm = combo.iter().sum::<f64>() / n;
        let cs = (combo.iter().map(|c| (c - cm).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
        let k = LABEL_SPREAD / cs;
        weights[d] = (0..FEATURE_COUNT).map(|j| k * MIX[d][j] / std[j]).collect();
        bias[d] = 0.5
            - k * cm
            - (0..FEATURE_COUNT).map(|j| weights[d][j] * mean[j]).sum::<f64>();
    }
    let [wa, wd, wv] = weights;
    AffineTarget {
        bias: PerDimension::from_fn(|d| bias[d.index()]),
        weights: PerDimension {
            arousal: wa,
            dominance: wd,
            valence: wv,
        },
    }
}
