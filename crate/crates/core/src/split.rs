//! Train / test partition of participants.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl Split {
    pub fn new(train: impl IntoIterator<Item = String>, test: impl IntoIterator<Item = String>) -> Result<Self> {
        let split = Split {
            train: train.into_iter().collect(),
            test: test.into_iter().collect(),
        };
        split.check_disjoint()?;
        Ok(split)
    }

    pub fn check_disjoint(&self) -> Result<()> {
        match self.train.intersection(&self.test).next() {
            Some(p) => Err(Error::Leakage(p.clone())),
            None => Ok(()),
        }
    }

    /// Fails if any of `members` is a test participant.
    pub fn ensure_training_only<'a>(&self, members: impl IntoIterator<Item = &'a String>) -> Result<()> {
        for m in members {
            if self.test.contains(m) {
                return Err(Error::Leakage(m.clone()));
            }
        }
        Ok(())
    }

    /// Holds out `per_bin` randomly chosen participants from each of
    /// `bins` equal-count score bins; everyone else trains.
    pub fn stratified_holdout(scores: &[(String, f64)], bins: usize, per_bin: usize, seed: u64) -> Result<Split> {
        if bins == 0 {
            return Err(Error::InvalidParameter("bins must be positive".into()));
        }
        if scores.len() < bins * (per_bin + 1) {
            return Err(Error::InvalidParameter(format!(
                "{} participants cannot supply {per_bin} test and at least one training participant per bin",
                scores.len()
            )));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1).then_with(|| scores[a].0.cmp(&scores[b].0)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = scores.len();
        let mut test = BTreeSet::new();
        for b in 0..bins {
            let mut members: Vec<usize> = order[b * n / bins..(b + 1) * n / bins].to_vec();
            members.shuffle(&mut rng);
            test.extend(members[..per_bin].iter().map(|&i| scores[i].0.clone()));
        }
        let train = scores
            .iter()
            .map(|s| s.0.clone())
            .filter(|p| !test.contains(p))
            .collect();
        Ok(Split { train, test })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_is_leakage() {
        let err = Split::new(["a".to_string(), "b".into()], ["b".to_string()]).unwrap_err();
        assert!(matches!(err, Error::Leakage(p) if p == "b"));
    }

    #[test]
    fn four_per_quintile() {
        let scores: Vec<(String, f64)> = (0..100).map(|i| (format!("p{i:03}"), i as f64 / 100.0)).collect();
        let split = Split::stratified_holdout(&scores, 5, 4, 1).unwrap();
        assert_eq!(split.test.len(), 20);
        assert_eq!(split.train.len(), 80);
        for b in 0..5 {
            let in_bin = split
                .test
                .iter()
                .filter(|p| (p[1..].parse::<usize>().unwrap()) / 20 == b)
                .count();
            assert_eq!(in_bin, 4);
        }
        assert_eq!(split, Split::stratified_holdout(&scores, 5, 4, 1).unwrap());
        assert_ne!(split, Split::stratified_holdout(&scores, 5, 4, 2).unwrap());
    }
}
