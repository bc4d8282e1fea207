/// Running mean and population variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// NaN when empty.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Population variance; NaN when empty.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::default();
        for v in iter {
            s.push(v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;
    use proptest::prelude::*;

    fn two_pass(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn matches_two_pass_reference() {
        let mut rng = Rng::new(61);
        for scale in [1e-3, 1.0, 1e4] {
            let values: Vec<f64> = (0..5000).map(|_| 100.0 * scale + scale * rng.standard_normal()).collect();
            let s: Summary = values.iter().copied().collect();
            let (mean, var) = two_pass(&values);
            assert!((s.mean() - mean).abs() <= 1e-12 * mean.abs());
            assert!((s.variance() - var).abs() <= 1e-12 * var);
        }
    }

    #[test]
    fn small_cases() {
        assert!(Summary::default().mean().is_nan());
        let one: Summary = [3.0].into_iter().collect();
        assert_eq!((one.mean(), one.variance()), (3.0, 0.0));
        let s: Summary = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(s.mean(), 2.5);
        assert_eq!(s.variance(), 1.25);
        assert_eq!(s.count(), 4);
    }

    proptest! {
        #[test]
        fn variance_is_non_negative(values in prop::collection::vec(-1e6f64..1e6, 1..100)) {
            let s: Summary = values.iter().copied().collect();
            prop_assert!(s.variance() >= 0.0);
        }
    }
}
