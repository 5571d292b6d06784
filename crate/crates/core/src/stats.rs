//! Small statistics helpers: sample moments and simple linear regression.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::sum::pairwise_sum;

pub fn mean(xs: &[f64]) -> f64 {
    crate::sum::mean(xs)
}

/// Unbiased sample variance (`n − 1` denominator); 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for an exact two-point fit).
    pub slope_se: f64,
    /// Residual degrees of freedom `N − 2`.
    pub df: usize,
    /// One-sided p-value for `H₁: slope < 0`.
    pub p_negative: f64,
    /// One-sided p-value for `H₁: slope > 0`.
    pub p_positive: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidArgument("linear fit needs at least two points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = pairwise_sum(&x.iter().map(|xi| (xi - mx).powi(2)).collect::<Vec<_>>());
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("linear fit needs at least two distinct x values".into()));
    }
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let df = n - 2;
    let (slope_se, p_negative, p_positive) = if df == 0 {
        (0.0, f64::NAN, f64::NAN)
    } else {
        let rss = pairwise_sum(&x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).collect::<Vec<_>>());
        let se = (rss / df as f64 / sxx).sqrt();
        if se == 0.0 {
            let p = |positive: bool| if (slope > 0.0) == positive && slope != 0.0 { 0.0 } else { 1.0 };
            (0.0, p(false), p(true))
        } else {
            let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
            let t = slope / se;
            (se, dist.cdf(t), 1.0 - dist.cdf(t))
        }
    };
    Ok(LinearFit { slope, intercept, slope_se, df, p_negative, p_positive })
}
