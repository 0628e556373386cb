use super::mean;
use crate::error::{Error, Result};

/// Ground truth and predictions of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    truth: Vec<f64>,
    pred: Vec<f64>,
}

impl PairedSeries {
    pub fn new(truth: Vec<f64>, pred: Vec<f64>) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Shape(format!(
                "truth has {} values, predictions {}",
                truth.len(),
                pred.len()
            )));
        }
        if let Some(bad) = truth.iter().chain(&pred).find(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite value {bad}")));
        }
        Ok(Self { truth, pred })
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn pred(&self) -> &[f64] {
        &self.pred
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

struct Moments {
    mean_t: f64,
    mean_p: f64,
    var_t: f64,
    var_p: f64,
    cov: f64,
}

fn moments(truth: &[f64], pred: &[f64]) -> Result<Moments> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "truth has {} values, predictions {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 pairs, got {}",
            truth.len()
        )));
    }
    let n = truth.len() as f64;
    let mean_t = exact_mean(truth);
    let mean_p = exact_mean(pred);
    let (mut var_t, mut var_p, mut cov) = (0.0, 0.0, 0.0);
    for (t, p) in truth.iter().zip(pred) {
        let dt = t - mean_t;
        let dp = p - mean_p;
        var_t += dt * dt;
        var_p += dp * dp;
        cov += dt * dp;
    }
    Ok(Moments {
        mean_t,
        mean_p,
        var_t: var_t / n,
        var_p: var_p / n,
        cov: cov / n,
    })
}

/// Mean that is exact for constant series, so their moments vanish exactly.
fn exact_mean(values: &[f64]) -> f64 {
    if values.iter().all(|v| *v == values[0]) {
        values[0]
    } else {
        mean(values)
    }
}

impl Moments {
    fn ccc_parts(&self) -> (f64, f64) {
        let shift = self.mean_t - self.mean_p;
        (2.0 * self.cov, self.var_t + self.var_p + shift * shift)
    }
}

/// Lin's concordance correlation coefficient with population moments.
pub fn ccc(series: &PairedSeries) -> Result<f64> {
    ccc_slices(&series.truth, &series.pred)
}

pub(crate) fn ccc_slices(truth: &[f64], pred: &[f64]) -> Result<f64> {
    let m = moments(truth, pred)?;
    let (num, den) = m.ccc_parts();
    if den == 0.0 {
        return Err(Error::Degenerate(
            "CCC undefined: both series constant with equal means".into(),
        ));
    }
    Ok(num / den)
}

/// `1 - ccc` and its analytic gradient with respect to each prediction.
pub fn ccc_loss_grad(series: &PairedSeries) -> Result<(f64, Vec<f64>)> {
    ccc_loss_grad_slices(&series.truth, &series.pred)
}

pub(crate) fn ccc_loss_grad_slices(truth: &[f64], pred: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = moments(truth, pred)?;
    let (num, den) = m.ccc_parts();
    if den == 0.0 {
        return Err(Error::Degenerate(
            "CCC undefined: both series constant with equal means".into(),
        ));
    }
    let n = truth.len() as f64;
    let shift = m.mean_p - m.mean_t;
    let grad = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            let d_num = 2.0 * (t - m.mean_t) / n;
            let d_den = 2.0 * (p - m.mean_p) / n + 2.0 * shift / n;
            -(d_num * den - num * d_den) / (den * den)
        })
        .collect();
    Ok((1.0 - num / den, grad))
}

/// Pearson correlation with population moments.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let m = moments(a, b)?;
    if m.var_t == 0.0 || m.var_p == 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined for a constant series".into(),
        ));
    }
    Ok(m.cov / (m.var_t * m.var_p).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn series(t: &[f64], p: &[f64]) -> PairedSeries {
        PairedSeries::new(t.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn fixed_points() {
        let t = [0.1, 0.4, 0.35, 0.9];
        assert_eq!(ccc(&series(&t, &t)).unwrap(), 1.0);
        assert_eq!(ccc(&series(&t, &[0.5; 4])).unwrap(), 0.0);
    }

    #[test]
    fn worked_three_point_example() {
        // exact rationals: 2*(2/15) / (1/6 + 8/75 + 0) = 40/41
        let v = ccc(&series(&[0.0, 0.5, 1.0], &[0.1, 0.5, 0.9])).unwrap();
        assert!((v - 0.97561).abs() < 1e-5, "{v}");
        assert!((v - 40.0 / 41.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            PairedSeries::new(vec![0.1, 0.2], vec![0.1]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ccc(&series(&[0.3, 0.3], &[0.3, 0.3])),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(ccc(&series(&[0.3], &[0.3])), Err(Error::Shape(_))));
        assert!(PairedSeries::new(vec![f64::NAN, 0.1], vec![0.1, 0.2]).is_err());
        // both constant but different means is defined: ccc = 0
        assert_eq!(ccc(&series(&[0.3, 0.3], &[0.5, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn long_constant_prediction_is_exactly_zero() {
        // 0.4 summed 250 times and divided back is not exactly 0.4
        let t: Vec<f64> = (0..250).map(|i| (i % 17) as f64 / 16.0).collect();
        let p = vec![0.4; 250];
        assert_ne!(p.iter().sum::<f64>() / 250.0, 0.4);
        assert_eq!(ccc(&series(&t, &p)).unwrap(), 0.0);
        assert_eq!(ccc(&series(&p, &t)).unwrap(), 0.0);
    }

    #[test]
    fn loss_is_zero_at_truth() {
        let t = [0.2, 0.6, 0.4];
        let (loss, grad) = ccc_loss_grad(&series(&t, &t)).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.len(), 3);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(99);
        let eps = 1e-6;
        for _ in 0..20 {
            let t: Vec<f64> = (0..20).map(|_| rng.next_f64()).collect();
            let p: Vec<f64> = (0..20).map(|_| rng.next_f64()).collect();
            let (_, grad) = ccc_loss_grad_slices(&t, &p).unwrap();
            for i in 0..20 {
                let mut up = p.clone();
                let mut down = p.clone();
                up[i] += eps;
                down[i] -= eps;
                let fd = ((1.0 - ccc_slices(&t, &up).unwrap())
                    - (1.0 - ccc_slices(&t, &down).unwrap()))
                    / (2.0 * eps);
                let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-8);
                assert!(rel < 1e-4, "i={i} fd={fd} grad={}", grad[i]);
            }
        }
    }

    #[test]
    fn shifting_away_from_truth_increases_loss() {
        let t = [0.1, 0.5, 0.3, 0.8, 0.6];
        for c in [-0.2, -0.01, 0.01, 0.2] {
            let shifted: Vec<f64> = t.iter().map(|v| v + c).collect();
            let (loss, _) = ccc_loss_grad(&series(&t, &shifted)).unwrap();
            assert!(loss > 0.0, "c={c}");
        }
        let small: Vec<f64> = t.iter().map(|v| v + 0.01).collect();
        let big: Vec<f64> = t.iter().map(|v| v + 0.2).collect();
        assert!(
            ccc_loss_grad(&series(&t, &small)).unwrap().0
                < ccc_loss_grad(&series(&t, &big)).unwrap().0
        );
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..1.0, n),
                prop::collection::vec(0.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric((t, p) in pairs()) {
            let a = ccc_slices(&t, &p);
            let b = ccc_slices(&p, &t);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn bounded_by_pearson((t, p) in pairs()) {
            if let (Ok(c), Ok(r)) = (ccc_slices(&t, &p), pearson(&t, &p)) {
                prop_assert!(c.abs() <= r.abs() + 1e-12);
            }
        }

        #[test]
        fn penalizes_scale_and_location(
            t in prop::collection::vec(0.0f64..1.0, 3..30),
            alpha in 0.2f64..2.0,
            beta in -0.3f64..0.3,
        ) {
            let var = {
                let m = mean(&t);
                t.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            };
            prop_assume!(var > 1e-6);
            prop_assume!((alpha - 1.0).abs() > 1e-3 || beta.abs() > 1e-3);
            let p: Vec<f64> = t.iter().map(|v| alpha * v + beta).collect();
            prop_assert!(ccc_slices(&t, &p).unwrap() < 1.0);
        }
    }
}
