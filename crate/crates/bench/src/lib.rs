//! Fixtures shared by the benchmarks.

use ser_audit::metrics::PairedSeries;
use ser_audit::rng::{Gaussian, SplitMix64};
use ser_audit::synth::synth_clip;
use ser_audit::AudioClip;

/// Truth uniform in `[0.1, 0.9]`, prediction = truth + N(0, `noise`).
pub fn noisy_series(n: usize, noise: f64, seed: u64) -> PairedSeries {
    let mut rng = SplitMix64::new(seed);
    let mut gauss = Gaussian::new(SplitMix64::new(seed ^ 0x5eed));
    let truth: Vec<f64> = (0..n).map(|_| 0.1 + 0.8 * rng.next_f64()).collect();
    let pred = truth.iter().map(|t| t + noise * gauss.next()).collect();
    PairedSeries::new(truth, pred).expect("equal lengths")
}

/// A synthetic clip padded or cut to exactly `seconds`.
pub fn clip_of(seconds: f64, seed: u64) -> AudioClip {
    let base = synth_clip(seed, 0);
    let n = (seconds * f64::from(base.sample_rate())) as usize;
    let samples: Vec<f64> = base.samples().iter().copied().cycle().take(n).collect();
    AudioClip::new(samples, base.sample_rate()).expect("valid clip")
}
