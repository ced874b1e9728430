use serde::{Deserialize, Serialize};

/// A normal distribution given by its mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: f64,
    pub std: f64,
}

impl NormalSpec {
    /// Builds a spec, flooring a negative or NaN spread at zero.
    pub fn new(mean: f64, std: f64) -> Self {
        let std = if std > 0.0 { std } else { 0.0 };
        Self { mean, std }
    }

    /// A point mass at `value`.
    pub fn degenerate(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    /// Mean and sample (n - 1) standard deviation of `values`.
    ///
    /// A single value yields a zero spread. Returns `None` for an empty slice.
    pub fn from_sample(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() == 1 {
            return Some(Self::degenerate(mean));
        }
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Some(Self::new(mean, (ss / (n - 1.0)).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_uses_n_minus_one() {
        let spec = NormalSpec::from_sample(&[500.0, 516.0, 508.0]).unwrap();
        assert_eq!(spec.mean, 508.0);
        assert_eq!(spec.std, 8.0);
    }

    #[test]
    fn single_value_has_zero_spread() {
        assert_eq!(NormalSpec::from_sample(&[3.5]), Some(NormalSpec::degenerate(3.5)));
        assert_eq!(NormalSpec::from_sample(&[]), None);
    }

    #[test]
    fn negative_std_is_floored() {
        assert_eq!(NormalSpec::new(1.0, -0.3).std, 0.0);
        assert_eq!(NormalSpec::new(1.0, f64::NAN).std, 0.0);
    }
}
