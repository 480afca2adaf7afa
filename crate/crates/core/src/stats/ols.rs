use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ordinary least squares with an intercept. Index 0 of every vector is the
/// intercept; index `k + 1` belongs to predictor column `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
}

pub fn ols(predictors: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    if predictors.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} predictor rows for {n} responses",
            predictors.len()
        )));
    }
    let k = predictors.first().map(Vec::len).unwrap_or(0);
    let p = k + 1;
    if n <= p {
        return Err(Error::InvalidParameter(format!(
            "{n} observations cannot fit {p} parameters with residual degrees of freedom"
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { predictors[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let gram = x.transpose() * &x;
    let inv = gram
        .try_inverse()
        .ok_or(Error::Undefined("OLS with collinear predictors"))?;
    let beta = &inv * x.transpose() * &target;
    let resid = &target - &x * &beta;
    let rss = resid.norm_squared();
    let mean = target.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss <= 0.0 {
        return Err(Error::Undefined("R² with zero variance in y"));
    }
    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    let std_errors: Vec<f64> = (0..p).map(|j| (sigma2 * inv[(j, j)]).sqrt()).collect();
    let t_values: Vec<f64> = (0..p).map(|j| beta[j] / std_errors[j]).collect();
    let p_values = t_values
        .iter()
        .map(|t| {
            if t.is_finite() {
                (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        r_squared: 1.0 - rss / tss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_plane_up_to_noise() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64 / 7.0, (i % 5) as f64 / 5.0])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| 0.5 + 2.0 * r[0] - 1.0 * r[1] + if i % 2 == 0 { 1e-3 } else { -1e-3 })
            .collect();
        let fit = ols(&rows, &y).unwrap();
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-2);
        assert!((fit.coefficients[2] + 1.0).abs() < 1e-2);
        assert!(fit.r_squared > 0.999);
        assert!(fit.p_values[1] < 1e-6);
    }

    #[test]
    fn collinear_predictors_rejected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(ols(&rows, &y).is_err());
    }
}
