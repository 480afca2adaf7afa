use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ELBOW_DELTA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Selected degree.
    pub degree: usize,
    /// Coefficients of the selected fit, constant term first.
    pub coefficients: Vec<f64>,
    /// `r2_by_degree[d - 1]` is R² of the degree-`d` fit.
    pub r2_by_degree: Vec<f64>,
    /// Coefficients of every candidate fit, indexed like `r2_by_degree`.
    pub all_coefficients: Vec<Vec<f64>>,
}

/// Elbow of a nondecreasing score curve: the smallest `k` (1-based) whose
/// successor improves the score by less than `delta`, else the last `k`.
pub fn elbow(scores: &[f64], delta: f64) -> usize {
    scores
        .windows(2)
        .position(|w| w[1] - w[0] < delta)
        .map(|i| i + 1)
        .unwrap_or(scores.len())
}

/// Least squares polynomial of the given degree via normal equations on
/// column-scaled Vandermonde columns. Coefficients ascend.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "x has {} points, y has {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let p = degree + 1;
    if n < p {
        return Err(Error::InvalidParameter(format!(
            "degree {degree} needs at least {p} points, got {n}"
        )));
    }
    let mut design = DMatrix::from_fn(n, p, |i, j| x[i].powi(j as i32));
    let scale: Vec<f64> = (0..p)
        .map(|j| {
            let norm = design.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scale.iter().enumerate() {
        design.column_mut(j).unscale_mut(*s);
    }
    let target = DVector::from_column_slice(y);
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * target;
    let z = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or(Error::Undefined("polynomial fit of rank-deficient data"))?,
    };
    Ok(z.iter().zip(&scale).map(|(c, s)| c / s).collect())
}

pub fn r_squared(x: &[f64], y: &[f64], coefficients: &[f64]) -> Result<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::Undefined("R² with zero variance in y"));
    }
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - poly_eval(coefficients, *xi)).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fits degrees 1..=max_degree and selects the elbow of the R² curve.
pub fn polyfit_elbow(x: &[f64], y: &[f64], max_degree: usize, delta: f64) -> Result<PolyFit> {
    if max_degree == 0 {
        return Err(Error::InvalidParameter("max_degree must be at least 1".into()));
    }
    let mut all = Vec::with_capacity(max_degree);
    let mut r2 = Vec::with_capacity(max_degree);
    for d in 1..=max_degree {
        let c = polyfit(x, y, d)?;
        r2.push(r_squared(x, y, &c)?);
        all.push(c);
    }
    let degree = elbow(&r2, delta);
    Ok(PolyFit {
        degree,
        coefficients: all[degree - 1].clone(),
        r2_by_degree: r2,
        all_coefficients: all,
    })
}

pub fn poly_eval(coefficients: &[f64], v: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * v + c)
}

/// Horner evaluation of the value and the first two derivatives.
pub fn poly_eval_and_derivatives(coefficients: &[f64], v: f64) -> (f64, f64, f64) {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for c in coefficients.iter().rev() {
        d2 = d2 * v + 2.0 * d1;
        d1 = d1 * v + p;
        p = p * v + c;
    }
    (p, d1, d2)
}

pub fn derivative(coefficients: &[f64]) -> Vec<f64> {
    coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

/// Points in `[lo, hi]` where the first derivative changes sign, refined by
/// bisection. Stationary points of inflection (no sign change) are skipped.
pub fn stationary_points(coefficients: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let d = derivative(coefficients);
    let slope = |v: f64| poly_eval(&d, v);
    const GRID: usize = 4096;
    let mut roots = Vec::new();
    let mut prev_v = lo;
    let mut prev_s = slope(lo);
    for i in 1..=GRID {
        let v = lo + (hi - lo) * i as f64 / GRID as f64;
        let s = slope(v);
        if prev_s == 0.0 {
            roots.push(prev_v);
        } else if prev_s * s < 0.0 {
            let (mut a, mut b) = (prev_v, v);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if slope(a) * slope(m) <= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_v = v;
        prev_s = s;
    }
    if prev_s == 0.0 {
        roots.push(hi);
    }
    roots
}
