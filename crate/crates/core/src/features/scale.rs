use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range test-split features are clamped to after scaling.
pub const TEST_CLAMP: (f64, f64) = (-0.5, 1.5);

/// Per-column min-max scaling fitted on training rows. Constant columns
/// map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("rows to scale"))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for r in rows {
            if r.len() != min.len() {
                return Err(Error::InvalidParameter("ragged feature rows".into()));
            }
            for (j, v) in r.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        Ok(MinMax { min, max })
    }

    fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (v - self.min[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Scaling without clamping; training rows land in [0, 1].
    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.scale_row(r)).collect()
    }

    /// Scaling for held-out rows, clamped to [`TEST_CLAMP`] with a warning
    /// when anything had to be clamped.
    pub fn transform_clamped(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut clamped = 0usize;
        let out = rows
            .iter()
            .map(|r| {
                self.scale_row(r)
                    .into_iter()
                    .map(|v| {
                        let c = v.clamp(TEST_CLAMP.0, TEST_CLAMP.1);
                        clamped += usize::from(c != v);
                        c
                    })
                    .collect()
            })
            .collect();
        if clamped > 0 {
            log::warn!("{clamped} held-out feature values outside the training range were clamped to [{}, {}]", TEST_CLAMP.0, TEST_CLAMP.1);
        }
        out
    }
}

/// Fills undefined features with the training mean of that feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub means: Vec<f64>,
}

impl Imputer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [Option<f64>]>) -> Result<Self> {
        let mut sums: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for r in rows {
            if sums.is_empty() {
                sums = vec![0.0; r.len()];
                counts = vec![0; r.len()];
            }
            if r.len() != sums.len() {
                return Err(Error::InvalidParameter("ragged feature rows".into()));
            }
            for (j, v) in r.iter().enumerate() {
                if let Some(v) = v {
                    sums[j] += v;
                    counts[j] += 1;
                }
            }
        }
        if sums.is_empty() {
            return Err(Error::Empty("rows to impute from"));
        }
        let means = sums
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(j, (s, c))| {
                if *c == 0 {
                    log::warn!("feature {j} is undefined for every training row; imputing 0");
                    0.0
                } else {
                    s / *c as f64
                }
            })
            .collect();
        Ok(Imputer { means })
    }

    pub fn apply(&self, row: &[Option<f64>]) -> Vec<f64> {
        row.iter().zip(&self.means).map(|(v, m)| v.unwrap_or(*m)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_rows_in_unit_interval_and_test_clamped() {
        let train = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![2.0, 5.0]];
        let s = MinMax::fit(&train).unwrap();
        assert_eq!(s.transform(&train), vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.0]]);
        let test = s.transform_clamped(&[vec![10.0, 5.0], vec![2.5, 1.0]]);
        assert_eq!(test, vec![vec![1.5, 0.0], vec![0.75, 0.0]]);
    }

    #[test]
    fn imputes_training_mean() {
        let rows: Vec<Vec<Option<f64>>> = vec![vec![Some(1.0), None], vec![Some(3.0), None], vec![None, Some(4.0)]];
        let imp = Imputer::fit(rows.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(imp.means, vec![2.0, 4.0]);
        assert_eq!(imp.apply(&[None, Some(1.0)]), vec![2.0, 1.0]);
    }
}
