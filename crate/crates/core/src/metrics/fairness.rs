use serde::{Deserialize, Serialize};

use super::ccc::{ccc, PairedSeries};
use super::mean;
use crate::data::PerDimension;
use crate::error::{Error, Result};

/// `CCC(female) - CCC(male)`; positive when the model serves female speakers better.
pub fn sex_fairness_score(female: &PairedSeries, male: &PairedSeries) -> Result<f64> {
    let label = |group: &str, e: Error| Error::Degenerate(format!("{group} group: {e}"));
    let f = ccc(female).map_err(|e| label("female", e))?;
    let m = ccc(male).map_err(|e| label("male", e))?;
    Ok(f - m)
}

/// Mean female residual minus mean male residual (residual = prediction - truth).
pub fn sex_fairness_bias(female: &PairedSeries, male: &PairedSeries) -> Result<f64> {
    let residual = |group: &str, s: &PairedSeries| -> Result<f64> {
        if s.is_empty() {
            return Err(Error::EmptySelection(format!("{group} group has no samples")));
        }
        let r: Vec<f64> = s.pred().iter().zip(s.truth()).map(|(p, t)| p - t).collect();
        Ok(mean(&r))
    };
    Ok(residual("female", female)? - residual("male", male)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFairness {
    pub ccc_female: f64,
    pub ccc_male: f64,
    pub fairness_score: f64,
    pub fairness_bias: f64,
}

impl DimensionFairness {
    pub fn compute(female: &PairedSeries, male: &PairedSeries) -> Result<Self> {
        let ccc_female = ccc(female).map_err(|e| Error::Degenerate(format!("female group: {e}")))?;
        let ccc_male = ccc(male).map_err(|e| Error::Degenerate(format!("male group: {e}")))?;
        Ok(Self {
            ccc_female,
            ccc_male,
            fairness_score: ccc_female - ccc_male,
            fairness_bias: sex_fairness_bias(female, male)?,
        })
    }
}

pub type FairnessReport = PerDimension<DimensionFairness>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn series(t: Vec<f64>, p: Vec<f64>) -> PairedSeries {
        PairedSeries::new(t, p).unwrap()
    }

    fn random_group(rng: &mut SplitMix64, n: usize) -> PairedSeries {
        let t: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let p: Vec<f64> = t.iter().map(|v| 0.7 * v + 0.2 * rng.next_f64()).collect();
        series(t, p)
    }

    fn mirror(s: &PairedSeries) -> PairedSeries {
        series(
            s.truth().iter().map(|v| 1.0 - v).collect(),
            s.pred().iter().map(|v| 1.0 - v).collect(),
        )
    }

    #[test]
    fn equal_groups_score_zero() {
        let g = series(vec![0.1, 0.5, 0.7], vec![0.2, 0.4, 0.8]);
        assert_eq!(sex_fairness_score(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn perfect_vs_constant() {
        let f = series(vec![0.1, 0.5, 0.7], vec![0.1, 0.5, 0.7]);
        let m = series(vec![0.1, 0.5, 0.7], vec![0.4, 0.4, 0.4]);
        assert_eq!(sex_fairness_score(&f, &m).unwrap(), 1.0);
    }

    #[test]
    fn mirrored_groups_score_zero() {
        let mut rng = SplitMix64::new(5);
        let female = random_group(&mut rng, 300);
        let male = mirror(&female);
        assert!(sex_fairness_score(&female, &male).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bias_cases() {
        let t = vec![0.2, 0.4, 0.6];
        let same = series(t.clone(), t.clone());
        assert_eq!(sex_fairness_bias(&same, &same).unwrap(), 0.0);
        let shifted = series(t.clone(), t.iter().map(|v| v + 0.1).collect());
        assert!((sex_fairness_bias(&shifted, &same).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bias_matches_two_pass_oracle() {
        let mut rng = SplitMix64::new(8);
        for _ in 0..20 {
            let f = random_group(&mut rng, 57);
            let m = random_group(&mut rng, 31);
            // separate oracle: means of predictions and truths computed apart
            let avg = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let oracle = (avg(f.pred()) - avg(f.truth())) - (avg(m.pred()) - avg(m.truth()));
            let got = sex_fairness_bias(&f, &m).unwrap();
            assert!((got - oracle).abs() < 1e-15, "{got} {oracle}");
        }
    }

    #[test]
    fn antisymmetric() {
        let mut rng = SplitMix64::new(9);
        let f = random_group(&mut rng, 40);
        let m = random_group(&mut rng, 50);
        assert_eq!(sex_fairness_score(&f, &m).unwrap(), -sex_fairness_score(&m, &f).unwrap());
        assert_eq!(sex_fairness_bias(&f, &m).unwrap(), -sex_fairness_bias(&m, &f).unwrap());
    }

    #[test]
    fn degenerate_group_is_labelled() {
        let ok = series(vec![0.1, 0.5], vec![0.2, 0.4]);
        let flat = series(vec![0.3, 0.3], vec![0.3, 0.3]);
        let err = sex_fairness_score(&ok, &flat).unwrap_err();
        assert!(err.to_string().contains("male"), "{err}");
        let empty = series(vec![], vec![]);
        assert!(matches!(sex_fairness_bias(&empty, &ok), Err(Error::EmptySelection(_))));
    }
}
