//! Multiple correspondence analysis on a complete disjunctive (indicator)
//! matrix. No Burt matrix, no Benzécri correction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::poly::elbow;
use crate::error::{Error, Result};

/// Indicator matrix: one row per respondent, one 0/1 column per
/// (item, category). Columns of an item are mutually exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    data: DMatrix<f64>,
    item_of_column: Vec<usize>,
    n_items: usize,
}

impl IndicatorMatrix {
    /// Builds the indicator from categorical codes: `responses[r][q]` is the
    /// category (0-based) respondent `r` chose on item `q`, with item `q`
    /// having `categories[q]` categories.
    pub fn from_categorical(responses: &[Vec<usize>], categories: &[usize]) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::Empty("MCA responses"));
        }
        let offsets: Vec<usize> = categories
            .iter()
            .scan(0, |acc, c| {
                let start = *acc;
                *acc += c;
                Some(start)
            })
            .collect();
        let n_cols: usize = categories.iter().sum();
        let mut data = DMatrix::zeros(responses.len(), n_cols);
        for (r, row) in responses.iter().enumerate() {
            if row.len() != categories.len() {
                return Err(Error::InvalidParameter(format!(
                    "row {r} answers {} items, expected {}",
                    row.len(),
                    categories.len()
                )));
            }
            for (q, &code) in row.iter().enumerate() {
                if code >= categories[q] {
                    return Err(Error::InvalidParameter(format!(
                        "row {r}, item {q}: category {code} out of {}",
                        categories[q]
                    )));
                }
                data[(r, offsets[q] + code)] = 1.0;
            }
        }
        let item_of_column = categories
            .iter()
            .enumerate()
            .flat_map(|(q, c)| std::iter::repeat_n(q, *c))
            .collect();
        Ok(IndicatorMatrix {
            data,
            item_of_column,
            n_items: categories.len(),
        })
    }

    /// Binary items (e.g. correct / wrong): column pair per item.
    pub fn from_binary(rows: &[Vec<bool>]) -> Result<Self> {
        let n_items = rows.first().map(Vec::len).unwrap_or(0);
        let coded: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| r.iter().map(|b| *b as usize).collect())
            .collect();
        Self::from_categorical(&coded, &vec![2; n_items])
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Same matrix with rows reordered by `order`.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let data = DMatrix::from_fn(self.data.nrows(), self.data.ncols(), |i, j| {
            self.data[(order[i], j)]
        });
        IndicatorMatrix {
            data,
            item_of_column: self.item_of_column.clone(),
            n_items: self.n_items,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McaResult {
    /// Principal inertias of the non-trivial dimensions, descending.
    pub eigenvalues: Vec<f64>,
    /// Principal coordinates of each indicator column; `[column][component]`.
    /// Columns with zero mass are skipped and have all-zero coordinates.
    pub column_coordinates: Vec<Vec<f64>>,
    /// Number of components at the elbow of the cumulative inertia curve.
    pub elbow_components: usize,
    /// For each item, the component (0-based, among the first
    /// `elbow_components`) its categories contribute most to.
    pub dominant_component: Vec<usize>,
}

impl McaResult {
    pub fn total_inertia(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Cumulative share of inertia after 1, 2, … components.
    pub fn cumulative_inertia(&self) -> Vec<f64> {
        let total = self.total_inertia();
        self.eigenvalues
            .iter()
            .scan(0.0, |acc, l| {
                *acc += l / total;
                Some(*acc)
            })
            .collect()
    }
}

pub fn mca(indicator: &IndicatorMatrix, delta: f64) -> Result<McaResult> {
    let z = &indicator.data;
    let (n, j) = z.shape();
    if let Some(r) = (0..n).find(|&r| z.row(r).sum() == 0.0) {
        return Err(Error::InvalidParameter(format!("indicator row {r} is all zero")));
    }
    let grand = z.sum();
    let row_mass: Vec<f64> = (0..n).map(|r| z.row(r).sum() / grand).collect();
    let col_mass: Vec<f64> = (0..j).map(|c| z.column(c).sum() / grand).collect();
    let live: Vec<usize> = (0..j).filter(|&c| col_mass[c] > 0.0).collect();

    // Standardized residuals over the observed columns.
    let s = DMatrix::from_fn(n, live.len(), |r, k| {
        let c = live[k];
        let p = z[(r, c)] / grand;
        (p - row_mass[r] * col_mass[c]) / (row_mass[r] * col_mass[c]).sqrt()
    });
    let svd = s.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Undefined("MCA singular vectors"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    // A complete disjunctive table has at most J − Q non-trivial dimensions.
    let live_items = {
        let mut seen = vec![false; indicator.n_items];
        for &c in &live {
            seen[indicator.item_of_column[c]] = true;
        }
        seen.iter().filter(|s| **s).count()
    };
    let dims = live.len().saturating_sub(live_items).min(order.len());
    let order = &order[..dims];
    let eigenvalues: Vec<f64> = order.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
    if eigenvalues.first().is_none_or(|l| *l <= 1e-12) {
        return Err(Error::Undefined("MCA of an input without variation"));
    }

    let mut column_coordinates = vec![vec![0.0; dims]; j];
    // contribution[c][k] = v_ck², summing to 1 over columns for each k.
    let mut contribution = vec![vec![0.0; dims]; j];
    for (col_pos, &c) in live.iter().enumerate() {
        for (k, &sv) in order.iter().enumerate() {
            let v = v_t[(sv, col_pos)];
            column_coordinates[c][k] = v * svd.singular_values[sv] / col_mass[c].sqrt();
            contribution[c][k] = v * v;
        }
    }

    let total: f64 = eigenvalues.iter().sum();
    let cumulative: Vec<f64> = eigenvalues
        .iter()
        .scan(0.0, |acc, l| {
            *acc += l / total;
            Some(*acc)
        })
        .collect();
    let elbow_components = elbow(&cumulative, delta);

    let dominant_component = (0..indicator.n_items)
        .map(|q| {
            let per_comp: Vec<f64> = (0..elbow_components)
                .map(|k| {
                    (0..j)
                        .filter(|&c| indicator.item_of_column[c] == q)
                        .map(|c| contribution[c][k])
                        .sum()
                })
                .collect();
            per_comp
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, v)| if *v > best.1 { (k, *v) } else { best })
                .0
        })
        .collect();

    Ok(McaResult {
        eigenvalues,
        column_coordinates,
        elbow_components,
        dominant_component,
    })
}
