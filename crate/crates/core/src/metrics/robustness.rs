use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest prediction change that still counts as stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub threshold: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { threshold: 0.05 }
    }
}

impl RobustnessConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!(
                "robustness threshold must lie in (0, 1), got {threshold}"
            )));
        }
        Ok(Self { threshold })
    }
}

/// Fraction of samples whose prediction moved by strictly less than the
/// threshold between the clean and the augmented input.
pub fn robustness_score(clean: &[f64], augmented: &[f64], cfg: &RobustnessConfig) -> Result<f64> {
    if clean.len() != augmented.len() {
        return Err(Error::Shape(format!(
            "{} clean predictions but {} augmented",
            clean.len(),
            augmented.len()
        )));
    }
    if clean.is_empty() {
        return Err(Error::Shape("no predictions to compare".into()));
    }
    let stable = clean
        .iter()
        .zip(augmented)
        .filter(|(c, a)| (*c - *a).abs() < cfg.threshold)
        .count();
    Ok(stable as f64 / clean.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> RobustnessConfig {
        RobustnessConfig::default()
    }

    #[test]
    fn identical_is_one() {
        let x = [0.1, 0.5, 0.9];
        assert_eq!(robustness_score(&x, &x, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn strict_threshold() {
        let clean = [0.5; 4];
        let aug = [0.5, 0.54, 0.55, 0.6];
        assert_eq!(robustness_score(&clean, &aug, &cfg()).unwrap(), 0.5);
    }

    #[test]
    fn ninety_five_percent() {
        let clean = vec![0.4; 100];
        let aug: Vec<f64> = (0..100).map(|i| if i < 95 { 0.42 } else { 0.5 }).collect();
        assert_eq!(robustness_score(&clean, &aug, &cfg()).unwrap(), 0.95);
    }

    #[test]
    fn errors() {
        assert!(robustness_score(&[0.1], &[0.1, 0.2], &cfg()).is_err());
        assert!(robustness_score(&[], &[], &cfg()).is_err());
        assert!(RobustnessConfig::new(0.0).is_err());
        assert!(RobustnessConfig::new(1.0).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60),
            rot in 0usize..60,
        ) {
            let (c, a): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let mut rotated = pairs.clone();
            let len = rotated.len();
            rotated.rotate_left(rot % len);
            rotated.reverse();
            let (rc, ra): (Vec<f64>, Vec<f64>) = rotated.into_iter().unzip();
            prop_assert_eq!(
                robustness_score(&c, &a, &cfg()).unwrap(),
                robustness_score(&rc, &ra, &cfg()).unwrap()
            );
        }
    }
}
