//! Significance tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_tailed: f64,
}

fn two_tailed_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

/// Paired t-test on `a − b` with the sample standard deviation.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Empty("paired t-test needs at least two pairs"));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::Undefined("t-test with zero-variance differences"));
    }
    let t = mean / (var.sqrt() / n.sqrt());
    let df = n - 1.0;
    Ok(TTest {
        t,
        df,
        p_two_tailed: two_tailed_p(t, df)?,
    })
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Empty("each sample needs at least two values"));
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, s2)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return Err(Error::Undefined("t-test with zero variance in both samples"));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p_two_tailed: two_tailed_p(t, df)?,
    })
}

/// Bonferroni adjustment: each p multiplied by `m`, clamped to 1.
pub fn bonferroni(p_values: &[f64], m: usize) -> Vec<f64> {
    p_values.iter().map(|p| (p * m as f64).min(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_paired_case() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &[0.0; 5]).unwrap();
        assert!((r.t - 4.2426).abs() < 1e-4);
        assert_eq!(r.df, 4.0);
        assert!((r.p_two_tailed - 0.0132).abs() < 5e-4);
    }

    #[test]
    fn swapping_negates_t() {
        let a = [2.1, 3.3, 1.0, 4.8, 2.2];
        let b = [1.0, 3.0, 1.5, 2.0, 1.9];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p_two_tailed, ba.p_two_tailed);
    }

    #[test]
    fn identical_samples_rejected() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(paired_t_test(&a, &a), Err(Error::Undefined(_))));
        assert!(paired_t_test(&a, &a[..2]).is_err());
    }

    #[test]
    fn bonferroni_clamps() {
        assert_eq!(bonferroni(&[0.3], 5), vec![1.0]);
        assert_eq!(bonferroni(&[0.01, 0.001], 5), vec![0.05, 0.005]);
    }

    #[test]
    fn welch_symmetric() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 3.5, 4.0, 6.0, 7.0];
        let r = welch_t_test(&a, &b).unwrap();
        let s = welch_t_test(&b, &a).unwrap();
        assert!(r.t < 0.0);
        assert_eq!(r.t, -s.t);
        assert!((r.p_two_tailed - s.p_two_tailed).abs() < 1e-15);
    }
}
