//! First-order Butterworth sections designed by the bilinear transform.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Highpass,
    Lowpass,
}

/// Order-1 IIR section, `y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderFilter {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
    pub cutoff_hz: f64,
    pub kind: FilterKind,
}

/// Designs the filter with the analog prototype's cutoff prewarped, so the
/// digital response is exactly -3.0103 dB at `cutoff_hz`.
pub fn design_first_order_butterworth(
    cutoff_hz: f64,
    sample_rate: u32,
    kind: FilterKind,
) -> Result<FirstOrderFilter> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::FilterDesign(format!(
            "cutoff {cutoff_hz} Hz must lie strictly between 0 and {nyquist} Hz"
        )));
    }
    let k = (PI * cutoff_hz / f64::from(sample_rate)).tan();
    let norm = 1.0 / (1.0 + k);
    let a1 = (k - 1.0) * norm;
    let (b0, b1) = match kind {
        FilterKind::Lowpass => (k * norm, k * norm),
        FilterKind::Highpass => (norm, -norm),
    };
    Ok(FirstOrderFilter {
        b0,
        b1,
        a1,
        cutoff_hz,
        kind,
    })
}

impl FirstOrderFilter {
    /// One causal pass from zero initial state.
    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let mut x_prev = 0.0;
        let mut y_prev = 0.0;
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + self.b1 * x_prev - self.a1 * y_prev;
                x_prev = x;
                y_prev = y;
                y
            })
            .collect()
    }

    /// Analytic magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate: u32) -> f64 {
        let w = 2.0 * PI * freq_hz / f64::from(sample_rate);
        let (re_n, im_n) = (self.b0 + self.b1 * w.cos(), -self.b1 * w.sin());
        let (re_d, im_d) = (1.0 + self.a1 * w.cos(), -self.a1 * w.sin());
        ((re_n * re_n + im_n * im_n) / (re_d * re_d + im_d * im_d)).sqrt()
    }
}
