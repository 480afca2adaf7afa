use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::N_HEADS;
use crate::error::{Error, Result};

pub const MIN_LEVELS: usize = 2;
pub const MAX_LEVELS: usize = 5;

/// Upper bin boundaries for each test. A score belongs to the first level
/// whose edge it does not exceed; scores on an edge fall to the lower level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub n_levels: usize,
    /// `edges[test]` has `n_levels - 1` nondecreasing entries.
    pub edges: Vec<Vec<f64>>,
}

impl LevelScheme {
    /// Equal-probability bins fitted per test on training scores
    /// (`scores[i]` = the three normalized scores of participant `i`).
    pub fn fit(scores: &[[f64; N_HEADS]], n_levels: usize) -> Result<(LevelScheme, Vec<[usize; N_HEADS]>)> {
        let mut edges = Vec::with_capacity(N_HEADS);
        let mut labels = vec![[0usize; N_HEADS]; scores.len()];
        for t in 0..N_HEADS {
            let column: Vec<f64> = scores.iter().map(|s| s[t]).collect();
            let (e, l) = quantile_bin(&column, n_levels)?;
            for (row, lab) in labels.iter_mut().zip(l) {
                row[t] = lab;
            }
            edges.push(e);
        }
        Ok((LevelScheme { n_levels, edges }, labels))
    }

    pub fn level(&self, test: usize, score: f64) -> usize {
        level_of(&self.edges[test], score)
    }

    pub fn labels(&self, scores: &[f64; N_HEADS]) -> [usize; N_HEADS] {
        std::array::from_fn(|t| self.level(t, scores[t]))
    }
}

fn level_of(edges: &[f64], score: f64) -> usize {
    edges.iter().filter(|e| score > **e).count()
}

/// Empirical-quantile bins: edge `k` is the order statistic at rank
/// ⌈k·N/n⌉, so bins hold N/n scores each when scores are distinct.
pub fn quantile_bin(scores: &[f64], n_levels: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if !(MIN_LEVELS..=MAX_LEVELS).contains(&n_levels) {
        return Err(Error::InvalidParameter(format!(
            "n_levels must be in {MIN_LEVELS}..={MAX_LEVELS}, got {n_levels}"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite score".into()));
    }
    let n = scores.len();
    if n < n_levels {
        return Err(Error::DegenerateBins { level: n });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_levels)
        .map(|k| sorted[(k * n).div_ceil(n_levels) - 1])
        .collect();
    let labels: Vec<usize> = scores.iter().map(|s| level_of(&edges, *s)).collect();
    let mut counts = vec![0usize; n_levels];
    for l in &labels {
        counts[*l] += 1;
    }
    if let Some(level) = counts.iter().position(|c| *c == 0) {
        return Err(Error::DegenerateBins { level });
    }
    Ok((edges, labels))
}

/// Row indices after resampling minority classes with replacement up to
/// the majority count. Original rows come first, in order.
pub fn oversample(labels: &[usize], seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, l) in labels.iter().enumerate() {
        members[*l].push(i);
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    for group in members.iter().filter(|g| !g.is_empty()) {
        for _ in group.len()..target {
            out.push(*group.choose(&mut rng).unwrap());
        }
    }
    out
}

/// Joint balancing of three label vectors: heads take turns topping up
/// each of their under-represented classes by one resampled row until
/// every head is balanced or the dataset has grown fivefold.
pub fn oversample_joint(labels: &[[usize; N_HEADS]], n_levels: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = vec![vec![Vec::new(); n_levels]; N_HEADS];
    let mut counts = vec![vec![0usize; n_levels]; N_HEADS];
    for (i, row) in labels.iter().enumerate() {
        for h in 0..N_HEADS {
            members[h][row[h]].push(i);
            counts[h][row[h]] += 1;
        }
    }
    let mut out: Vec<usize> = (0..labels.len()).collect();
    let cap = 5 * labels.len();
    loop {
        let mut balanced = true;
        for h in 0..N_HEADS {
            let target = *counts[h].iter().max().unwrap_or(&0);
            for c in 0..n_levels {
                if members[h][c].is_empty() || counts[h][c] >= target {
                    continue;
                }
                balanced = false;
                let pick = *members[h][c].choose(&mut rng).unwrap();
                out.push(pick);
                for (hh, cnt) in counts.iter_mut().enumerate() {
                    cnt[labels[pick][hh]] += 1;
                }
            }
        }
        if balanced || out.len() >= cap {
            break;
        }
    }
    out
}
