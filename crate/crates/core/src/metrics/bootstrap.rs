use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ccc::{ccc_slices, PairedSeries};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Samples drawn (with replacement) per repetition.
    pub draw_size: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            draw_size: 200,
            repetitions: 1000,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draw_size < 2 {
            return Err(Error::Config(format!(
                "bootstrap draw size must be at least 2, got {}",
                self.draw_size
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("bootstrap needs at least one repetition".into()));
        }
        Ok(())
    }
}

/// Mean and population standard deviation of CCC over resamples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    pub std: f64,
    /// Repetitions whose resample had an undefined CCC.
    pub skipped: usize,
}

/// Per-speaker bootstrap of CCC.
///
/// Repetition `r` draws its indices from the stream keyed by
/// `(seed, speaker_id, r)`, so the indices are identical for every emotion
/// dimension of the same speaker and independent of scheduling.
pub fn speaker_bootstrap_ccc(
    speaker_id: &str,
    series: &PairedSeries,
    cfg: &BootstrapConfig,
) -> Result<BootstrapEstimate> {
    cfg.validate()?;
    if series.len() < 2 {
        return Err(Error::Shape(format!(
            "speaker {speaker_id} has {} samples, need at least 2",
            series.len()
        )));
    }
    let seed = cfg.seed.to_string();
    let values: Vec<Option<f64>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = SplitMix64::from_key(&[&seed, speaker_id, &rep.to_string()]);
            let mut truth = Vec::with_capacity(cfg.draw_size);
            let mut pred = Vec::with_capacity(cfg.draw_size);
            for _ in 0..cfg.draw_size {
                let i = rng.next_index(series.len());
                truth.push(series.truth()[i]);
                pred.push(series.pred()[i]);
            }
            ccc_slices(&truth, &pred).ok()
        })
        .collect();

    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    let skipped = values.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::Degenerate(format!(
            "speaker {speaker_id}: all {} bootstrap repetitions were degenerate",
            cfg.repetitions
        )));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(BootstrapEstimate {
        mean,
        std: var.sqrt(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Gaussian;

    fn cfg(seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn perfect_speaker() {
        let t: Vec<f64> = (0..250).map(|i| (i % 17) as f64 / 16.0).collect();
        let s = PairedSeries::new(t.clone(), t).unwrap();
        let est = speaker_bootstrap_ccc("a", &s, &cfg(1)).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std, 0.0);
        assert_eq!(est.skipped, 0);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let mut rng = SplitMix64::new(3);
        let t: Vec<f64> = (0..300).map(|_| rng.next_f64()).collect();
        let p: Vec<f64> = t.iter().map(|v| v * 0.8 + 0.2 * rng.next_f64()).collect();
        let s = PairedSeries::new(t, p).unwrap();
        let a = speaker_bootstrap_ccc("spk", &s, &cfg(7)).unwrap();
        let b = speaker_bootstrap_ccc("spk", &s, &cfg(7)).unwrap();
        assert_eq!(a, b);
        let c = speaker_bootstrap_ccc("spk", &s, &cfg(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noisy_speaker_std_is_small() {
        let mut rng = SplitMix64::new(11);
        let mut g = Gaussian::new(SplitMix64::new(12));
        let t: Vec<f64> = (0..500).map(|_| 0.2 + 0.6 * rng.next_f64()).collect();
        let p: Vec<f64> = t.iter().map(|v| v + 0.05 * g.next()).collect();
        let s = PairedSeries::new(t, p).unwrap();
        let est = speaker_bootstrap_ccc("n", &s, &cfg(0)).unwrap();
        assert!(est.std < 0.1, "{est:?}");
        assert!(est.mean > 0.8 && est.mean < 1.0);
    }

    #[test]
    fn degenerate_resamples_are_counted() {
        // one informative pair among constants: most resamples are constant
        let mut t = vec![0.5; 40];
        let mut p = vec![0.5; 40];
        t[0] = 0.9;
        p[0] = 0.8;
        let s = PairedSeries::new(t, p).unwrap();
        let c = BootstrapConfig {
            draw_size: 5,
            repetitions: 200,
            seed: 1,
        };
        let est = speaker_bootstrap_ccc("x", &s, &c).unwrap();
        assert!(est.skipped > 0 && est.skipped < 200, "{est:?}");

        let flat = PairedSeries::new(vec![0.5; 10], vec![0.5; 10]).unwrap();
        assert!(speaker_bootstrap_ccc("y", &flat, &c).is_err());
    }

    #[test]
    fn config_validation() {
        let s = PairedSeries::new(vec![0.1, 0.2], vec![0.1, 0.3]).unwrap();
        let bad = BootstrapConfig {
            draw_size: 1,
            ..Default::default()
        };
        assert!(speaker_bootstrap_ccc("z", &s, &bad).is_err());
    }
}
