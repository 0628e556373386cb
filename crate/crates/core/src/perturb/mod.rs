//! The eight-augmentation perturbation protocol.
//!
//! Each augmentation draws its parameter from a small fixed menu. Draws are a
//! pure function of `(global_seed, sample_id, kind)`: the three parts are
//! hashed with [`crate::rng::derive_seed`] (the seed in decimal, the kind by
//! its snake_case name) and the hash seeds a SplitMix64 stream. Draw order
//! within the stream is fixed per kind and documented on
//! [`AugmentationParams`].

mod batch;
mod filter;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use batch::{augment_dataset, AugmentOutcome, AugmentedFile, DRAW_LOG_HEADER};
pub use filter::{design_first_order_butterworth, FilterKind, FirstOrderFilter};

use crate::audio::{rms, AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    AdditiveTone,
    AppendZeros,
    Clip,
    CropBeginning,
    Gain,
    HighpassFilter,
    LowpassFilter,
    WhiteNoise,
}

impl AugmentationKind {
    pub const ALL: [AugmentationKind; 8] = [
        AugmentationKind::AdditiveTone,
        AugmentationKind::AppendZeros,
        AugmentationKind::Clip,
        AugmentationKind::CropBeginning,
        AugmentationKind::Gain,
        AugmentationKind::HighpassFilter,
        AugmentationKind::LowpassFilter,
        AugmentationKind::WhiteNoise,
    ];

    /// Stable name used in file names, prediction variants and seed keys.
    pub fn name(self) -> &'static str {
        match self {
            AugmentationKind::AdditiveTone => "additive_tone",
            AugmentationKind::AppendZeros => "append_zeros",
            AugmentationKind::Clip => "clip",
            AugmentationKind::CropBeginning => "crop_beginning",
            AugmentationKind::Gain => "gain",
            AugmentationKind::HighpassFilter => "highpass_filter",
            AugmentationKind::LowpassFilter => "lowpass_filter",
            AugmentationKind::WhiteNoise => "white_noise",
        }
    }

    pub fn menu(self) -> ParamMenu {
        use AugmentationKind::*;
        let (choices, unit, continuous): (&'static [f64], _, _) = match self {
            AdditiveTone => (&[40.0, 45.0, 50.0], Unit::Decibel, Some((5000.0, 7000.0, Unit::Hertz))),
            AppendZeros | CropBeginning => (&[100.0, 500.0, 1000.0], Unit::Samples, None),
            Clip => (&[0.1, 0.2, 0.3], Unit::Percent, None),
            Gain => (&[-2.0, -1.0, 1.0, 2.0], Unit::Decibel, None),
            HighpassFilter => (&[50.0, 100.0, 150.0], Unit::Hertz, None),
            LowpassFilter => (&[7500.0, 7000.0, 6500.0], Unit::Hertz, None),
            WhiteNoise => (&[35.0, 40.0, 45.0], Unit::Decibel, None),
        };
        ParamMenu {
            kind: self,
            choices,
            unit,
            continuous_range: continuous,
        }
    }
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        AugmentationKind::ALL
            .into_iter()
            .find(|k| k.name() == wanted)
            .ok_or_else(|| Error::Config(format!("unknown augmentation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Hertz,
    Decibel,
    Samples,
    Percent,
}

/// Discrete parameter menu of one augmentation, plus the continuous range
/// (tone frequency) where one exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamMenu {
    pub kind: AugmentationKind,
    pub choices: &'static [f64],
    pub unit: Unit,
    pub continuous_range: Option<(f64, f64, Unit)>,
}

/// Concrete parameters for one augmentation.
///
/// Draw order from the per-sample stream:
/// - `AdditiveTone`: frequency (uniform), PSNR (menu), phase (uniform in `[0, 2π)`)
/// - `WhiteNoise`: SNR (menu), then one `u64` seeding the noise stream
/// - all others: one menu choice
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentationParams {
    AdditiveTone {
        frequency_hz: f64,
        psnr_db: f64,
        phase_rad: f64,
    },
    AppendZeros {
        samples: usize,
    },
    Clip {
        percent: f64,
    },
    CropBeginning {
        samples: usize,
    },
    Gain {
        db: f64,
    },
    HighpassFilter {
        cutoff_hz: f64,
    },
    LowpassFilter {
        cutoff_hz: f64,
    },
    WhiteNoise {
        snr_db: f64,
        noise_seed: u64,
    },
}

impl AugmentationParams {
    pub fn kind(&self) -> AugmentationKind {
        match self {
            AugmentationParams::AdditiveTone { .. } => AugmentationKind::AdditiveTone,
            AugmentationParams::AppendZeros { .. } => AugmentationKind::AppendZeros,
            AugmentationParams::Clip { .. } => AugmentationKind::Clip,
            AugmentationParams::CropBeginning { .. } => AugmentationKind::CropBeginning,
            AugmentationParams::Gain { .. } => AugmentationKind::Gain,
            AugmentationParams::HighpassFilter { .. } => AugmentationKind::HighpassFilter,
            AugmentationParams::LowpassFilter { .. } => AugmentationKind::LowpassFilter,
            AugmentationParams::WhiteNoise { .. } => AugmentationKind::WhiteNoise,
        }
    }

    /// Whether the values are drawn from this kind's menu.
    pub fn within_menu(&self) -> bool {
        let menu = self.kind().menu();
        let on_menu = |v: f64| menu.choices.contains(&v);
        match *self {
            AugmentationParams::AdditiveTone {
                frequency_hz,
                psnr_db,
                phase_rad,
            } => {
                let (lo, hi, _) = menu.continuous_range.expect("tone has a range");
                (lo..=hi).contains(&frequency_hz)
                    && on_menu(psnr_db)
                    && (0.0..2.0 * PI).contains(&phase_rad)
            }
            AugmentationParams::AppendZeros { samples }
            | AugmentationParams::CropBeginning { samples } => on_menu(samples as f64),
            AugmentationParams::Clip { percent } => on_menu(percent),
            AugmentationParams::Gain { db } => on_menu(db),
            AugmentationParams::HighpassFilter { cutoff_hz }
            | AugmentationParams::LowpassFilter { cutoff_hz } => on_menu(cutoff_hz),
            AugmentationParams::WhiteNoise { snr_db, .. } => on_menu(snr_db),
        }
    }
}

/// The key a draw was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub global_seed: u64,
    pub sample_id: String,
    pub kind: AugmentationKind,
}

impl SeedTrace {
    pub fn stream(&self) -> SplitMix64 {
        SplitMix64::from_key(&[
            &self.global_seed.to_string(),
            &self.sample_id,
            self.kind.name(),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawnParams {
    pub params: AugmentationParams,
    pub seed_trace: SeedTrace,
}

impl DrawnParams {
    pub fn kind(&self) -> AugmentationKind {
        self.params.kind()
    }
}

pub fn draw_params(kind: AugmentationKind, global_seed: u64, sample_id: &str) -> DrawnParams {
    let seed_trace = SeedTrace {
        global_seed,
        sample_id: sample_id.to_string(),
        kind,
    };
    let mut rng = seed_trace.stream();
    let menu = kind.menu();
    let pick = |rng: &mut SplitMix64| menu.choices[rng.next_index(menu.choices.len())];

    let params = match kind {
        AugmentationKind::AdditiveTone => {
            let (lo, hi, _) = menu.continuous_range.expect("tone has a range");
            let frequency_hz = lo + (hi - lo) * rng.next_f64();
            let psnr_db = pick(&mut rng);
            let phase_rad = 2.0 * PI * rng.next_f64();
            AugmentationParams::AdditiveTone {
                frequency_hz,
                psnr_db,
                phase_rad,
            }
        }
        AugmentationKind::AppendZeros => AugmentationParams::AppendZeros {
            samples: pick(&mut rng) as usize,
        },
        AugmentationKind::Clip => AugmentationParams::Clip {
            percent: pick(&mut rng),
        },
        AugmentationKind::CropBeginning => AugmentationParams::CropBeginning {
            samples: pick(&mut rng) as usize,
        },
        AugmentationKind::Gain => AugmentationParams::Gain { db: pick(&mut rng) },
        AugmentationKind::HighpassFilter => AugmentationParams::HighpassFilter {
            cutoff_hz: pick(&mut rng),
        },
        AugmentationKind::LowpassFilter => AugmentationParams::LowpassFilter {
            cutoff_hz: pick(&mut rng),
        },
        AugmentationKind::WhiteNoise => {
            let snr_db = pick(&mut rng);
            AugmentationParams::WhiteNoise {
                snr_db,
                noise_seed: rng.next_u64(),
            }
        }
    };
    DrawnParams { params, seed_trace }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Applies one augmentation.
pub fn apply(clip: &AudioClip, params: &AugmentationParams) -> Result<AudioClip> {
    if clip.sample_rate() != SAMPLE_RATE {
        return Err(Error::Config(format!(
            "augmentations require {SAMPLE_RATE} Hz audio, got {} Hz",
            clip.sample_rate()
        )));
    }
    let x = clip.samples();
    let fs = f64::from(clip.sample_rate());
    let out = match *params {
        AugmentationParams::AdditiveTone {
            frequency_hz,
            psnr_db,
            phase_rad,
        } => {
            let peak = clip.peak();
            if peak == 0.0 {
                return Err(Error::Degenerate(
                    "additive tone needs a non-silent clip (peak is 0)".into(),
                ));
            }
            let amplitude = peak / db_to_amplitude(psnr_db);
            let step = 2.0 * PI * frequency_hz / fs;
            x.iter()
                .enumerate()
                .map(|(i, s)| s + amplitude * (step * i as f64 + phase_rad).sin())
                .collect()
        }
        AugmentationParams::AppendZeros { samples } => {
            let mut out = x.to_vec();
            out.resize(x.len() + samples, 0.0);
            out
        }
        AugmentationParams::Clip { percent } => clip_percent(x, percent),
        AugmentationParams::CropBeginning { samples } => {
            if samples >= x.len() {
                return Err(Error::InvalidLength(format!(
                    "cannot crop {samples} samples from a clip of {}",
                    x.len()
                )));
            }
            x[samples..].to_vec()
        }
        AugmentationParams::Gain { db } => {
            let g = db_to_amplitude(db);
            x.iter().map(|s| s * g).collect()
        }
        AugmentationParams::HighpassFilter { cutoff_hz } => {
            design_first_order_butterworth(cutoff_hz, clip.sample_rate(), FilterKind::Highpass)?
                .process(x)
        }
        AugmentationParams::LowpassFilter { cutoff_hz } => {
            design_first_order_butterworth(cutoff_hz, clip.sample_rate(), FilterKind::Lowpass)?
                .process(x)
        }
        AugmentationParams::WhiteNoise { snr_db, noise_seed } => {
            let level = rms(x);
            if level == 0.0 {
                return Err(Error::Degenerate(
                    "white noise needs a non-silent clip (rms is 0)".into(),
                ));
            }
            let sigma = level / db_to_amplitude(snr_db);
            let mut gauss = crate::rng::Gaussian::new(SplitMix64::new(noise_seed));
            x.iter().map(|s| s + sigma * gauss.next()).collect()
        }
    };
    clip.with_samples(out)
}

/// Number of samples the clip augmentation alters at `percent`.
pub fn clip_count(len: usize, percent: f64) -> usize {
    ((len as f64) * percent / 100.0).round() as usize
}

/// Hard-clamps to the magnitude of the `(k+1)`-th largest |sample|, where `k`
/// is [`clip_count`]; exactly the `k` largest magnitudes change when there are
/// no ties.
fn clip_percent(x: &[f64], percent: f64) -> Vec<f64> {
    let k = clip_count(x.len(), percent).min(x.len() - 1);
    if k == 0 {
        return x.to_vec();
    }
    let mut mags: Vec<f64> = x.iter().map(|s| s.abs()).collect();
    let idx = x.len() - 1 - k;
    let (_, threshold, _) = mags.select_nth_unstable_by(idx, f64::total_cmp);
    let t = *threshold;
    x.iter().map(|s| s.clamp(-t, t)).collect()
}
