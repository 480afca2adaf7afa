//! Literacy-level prediction from attention features: binning, training,
//! inference, attribution and greedy chart selection.

mod explain;
mod format;
mod greedy;
mod levels;
mod network;
mod train;

use serde::{Deserialize, Serialize};

pub use explain::{integrated_gradients, DEFAULT_IG_STEPS};
pub use format::{read_model, write_model, MODEL_MAGIC};
pub use greedy::{greedy_select, subset_features, ChartDataset, GreedyResult, GreedyStep};
pub use levels::{oversample, oversample_joint, quantile_bin, LevelScheme, MAX_LEVELS, MIN_LEVELS};
pub use network::{loss_and_gradients, softmax, Activation, Dense, ModelParams, DEFAULT_HIDDEN, N_HEADS};
pub use train::{train, EpochRecord, History, TrainConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Predicted level per test head.
    pub levels: [usize; N_HEADS],
    /// Class probabilities per test head.
    pub probabilities: Vec<Vec<f64>>,
}

/// Index of the largest value; ties go to the lower index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(params: &ModelParams, features: &[f64]) -> Result<PredictionResult> {
    let logits = params.logits(features)?;
    let probabilities: Vec<Vec<f64>> = logits.iter().map(|l| softmax(l)).collect();
    if probabilities.iter().flatten().any(|p| !p.is_finite()) {
        return Err(Error::Undefined("prediction with non-finite logits"));
    }
    let levels = std::array::from_fn(|h| argmax(&probabilities[h]));
    Ok(PredictionResult { levels, probabilities })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_head: [f64; N_HEADS],
    pub macro_average: f64,
    /// `confusion[head][truth][predicted]`.
    pub confusion: Vec<Vec<Vec<usize>>>,
}

impl Evaluation {
    /// Weighted mean of per-head accuracies.
    pub fn weighted(&self, weights: &[f64; N_HEADS]) -> f64 {
        let total: f64 = weights.iter().sum();
        self.per_head.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total
    }
}

pub fn evaluate(params: &ModelParams, features: &[Vec<f64>], labels: &[[usize; N_HEADS]]) -> Result<Evaluation> {
    if features.is_empty() {
        return Err(Error::Empty("evaluation rows"));
    }
    if features.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows but {} label rows",
            features.len(),
            labels.len()
        )));
    }
    let n_levels = params.n_levels();
    let mut confusion = vec![vec![vec![0usize; n_levels]; n_levels]; N_HEADS];
    let mut correct = [0usize; N_HEADS];
    for (x, y) in features.iter().zip(labels) {
        let pred = predict(params, x)?;
        for h in 0..N_HEADS {
            if y[h] >= n_levels {
                return Err(Error::InvalidParameter(format!("label {} outside 0..{n_levels}", y[h])));
            }
            confusion[h][y[h]][pred.levels[h]] += 1;
            correct[h] += usize::from(y[h] == pred.levels[h]);
        }
    }
    let per_head = correct.map(|c| c as f64 / features.len() as f64);
    Ok(Evaluation {
        per_head,
        macro_average: per_head.iter().sum::<f64>() / N_HEADS as f64,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_predict_level_zero_uniformly() {
        let p = ModelParams::zeros(24, &DEFAULT_HIDDEN, 5);
        let r = predict(&p, &[0.5; 24]).unwrap();
        assert_eq!(r.levels, [0; 3]);
        for probs in &r.probabilities {
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|v| (*v - 0.2).abs() < 1e-15));
        }
    }

    #[test]
    fn hand_built_single_layer_matches_manual_arithmetic() {
        // Trunk: 2 -> 2 ReLU; heads: 2 -> 2.
        let trunk = vec![Dense {
            weights: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]),
            bias: DVector::from_vec(vec![0.0, -1.0]),
        }];
        let head = |a: f64| Dense {
            weights: DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, 1.0]),
            bias: DVector::from_vec(vec![0.1, 0.0]),
        };
        let p = ModelParams {
            trunk,
            heads: vec![head(1.0), head(-1.0), head(3.0)],
            activation: Activation::Relu,
        };
        let x = [1.0, 3.0];
        // h = relu([1 - 3, 0.5 + 6 - 1]) = [0, 5.5]
        let logits = p.logits(&x).unwrap();
        assert_eq!(logits[0], vec![0.1, 5.5]);
        let r = predict(&p, &x).unwrap();
        assert_eq!(r.levels, [1; 3]);
        let e = (5.5f64 - 0.1).exp();
        assert!((r.probabilities[0][1] - e / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.3, 0.3, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn accuracy_agrees_with_confusion_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::new(24, &[16], 3, &mut rng);
        let x: Vec<Vec<f64>> = (0..200).map(|_| (0..24).map(|_| rng.random()).collect()).collect();
        let y: Vec<[usize; 3]> = (0..200)
            .map(|_| [rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3)])
            .collect();
        let ev = evaluate(&p, &x, &y).unwrap();
        for h in 0..3 {
            let trace: usize = (0..3).map(|c| ev.confusion[h][c][c]).sum();
            assert_eq!(ev.per_head[h], trace as f64 / 200.0);
            let total: usize = ev.confusion[h].iter().flatten().sum();
            assert_eq!(total, 200);
        }
    }

    #[test]
    fn random_binary_labels_sit_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = ModelParams::new(24, &[16], 2, &mut rng);
        let x: Vec<Vec<f64>> = (0..1000).map(|_| (0..24).map(|_| rng.random()).collect()).collect();
        let y: Vec<[usize; 3]> = (0..1000)
            .map(|_| [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)])
            .collect();
        let ev = evaluate(&p, &x, &y).unwrap();
        for a in ev.per_head {
            assert!((a - 0.5).abs() <= 0.1, "{a}");
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let p = ModelParams::zeros(4, &[2], 2);
        let ev = evaluate(&p, &vec![vec![0.0; 4]; 5], &[[0; 3]; 5]).unwrap();
        assert_eq!(ev.per_head, [1.0; 3]);
        assert_eq!(ev.macro_average, 1.0);
        assert!(predict(&p, &[0.0; 3]).is_err());
    }

    #[test]
    fn weighted_accuracy_uses_only_weighted_heads() {
        let ev = Evaluation {
            per_head: [0.9, 0.1, 0.2],
            macro_average: 0.4,
            confusion: vec![],
        };
        assert_eq!(ev.weighted(&[1.0, 0.0, 0.0]), 0.9);
        assert!((ev.weighted(&[1.0, 1.0, 1.0]) - 0.4).abs() < 1e-15);
    }
}
