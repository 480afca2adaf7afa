use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::levels::oversample_joint;
use super::network::{batch_matrix, multi_head_loss, ModelParams, DEFAULT_HIDDEN, N_HEADS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Balance the training portion's joint labels before each run.
    pub oversample: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 256,
            max_epochs: 150,
            patience: 10,
            val_fraction: 0.1,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            oversample: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidParameter(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidParameter("val_fraction must be in [0, 1)".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidParameter("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Equal to `train_loss` when training without a validation split.
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
}

impl History {
    pub fn best_val_loss(&self) -> f64 {
        self.epochs[self.best_epoch].val_loss
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        out
    }
}

/// Adam moment estimates, flattened in `ModelParams::slices` order.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut ModelParams, grad: &ModelParams) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let mut k = 0;
        for (p, g) in params.slices_mut().into_iter().zip(grad.slices()) {
            for (w, gi) in p.iter_mut().zip(g) {
                self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * gi;
                self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * gi * gi;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
                k += 1;
            }
        }
    }
}

pub(crate) fn mean_loss(params: &ModelParams, features: &[Vec<f64>], labels: &[[usize; N_HEADS]], idx: &[usize]) -> f64 {
    let rows: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_slice()).collect();
    let y: Vec<[usize; N_HEADS]> = idx.iter().map(|&i| labels[i]).collect();
    multi_head_loss(&params.forward(batch_matrix(&rows)).logits, &y).0
}

fn check_inputs(features: &[Vec<f64>], labels: &[[usize; N_HEADS]], n_levels: usize) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::Empty("training features"));
    }
    if features.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows but {} label rows",
            features.len(),
            labels.len()
        )));
    }
    let width = features[0].len();
    if let Some(i) = features.iter().position(|r| r.len() != width) {
        return Err(Error::InvalidParameter(format!("feature row {i} has width {}", features[i].len())));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite feature value".into()));
    }
    if labels.iter().flatten().any(|l| *l >= n_levels) {
        return Err(Error::InvalidParameter(format!("label outside 0..{n_levels}")));
    }
    Ok(width)
}

/// Trains a fresh network. The validation rows are drawn (seeded) before
/// any oversampling so duplicated rows never straddle the split; the
/// returned parameters are those of the epoch with the lowest validation loss.
pub fn train(
    features: &[Vec<f64>],
    labels: &[[usize; N_HEADS]],
    n_levels: usize,
    cfg: &TrainConfig,
) -> Result<(ModelParams, History)> {
    cfg.validate()?;
    let width = check_inputs(features, labels, n_levels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if features.len() >= 2 {
        ((features.len() as f64 * cfg.val_fraction).ceil() as usize).min(features.len() - 1)
    } else {
        0
    };
    let (val_idx, fit_idx) = order.split_at(n_val);
    let mut val_idx = val_idx.to_vec();
    val_idx.sort_unstable();
    let mut fit_idx = fit_idx.to_vec();
    fit_idx.sort_unstable();

    let mut train_idx: Vec<usize> = if cfg.oversample {
        let fit_labels: Vec<[usize; N_HEADS]> = fit_idx.iter().map(|&i| labels[i]).collect();
        oversample_joint(&fit_labels, n_levels, cfg.seed)
            .into_iter()
            .map(|k| fit_idx[k])
            .collect()
    } else {
        fit_idx.clone()
    };

    let mut params = ModelParams::new(width, &cfg.hidden, n_levels, &mut rng);
    let mut adam = Adam::new(params.parameter_count(), cfg.learning_rate);
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut epochs = Vec::new();
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| features[i].as_slice()).collect();
            let y: Vec<[usize; N_HEADS]> = chunk.iter().map(|&i| labels[i]).collect();
            let fwd = params.forward(batch_matrix(&rows));
            let (loss, dlogits) = multi_head_loss(&fwd.logits, &y);
            if !loss.is_finite() {
                return Err(Error::NonFinite { what: "loss", epoch, batch: b });
            }
            let (grad, _) = params.backward(&fwd, &dlogits);
            if grad.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite { what: "gradient", epoch, batch: b });
            }
            adam.update(&mut params, &grad);
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            mean_loss(&params, features, labels, &val_idx)
        };
        if !val_loss.is_finite() {
            return Err(Error::NonFinite { what: "validation loss", epoch, batch: 0 });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        epochs.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best.1, History { epochs, best_epoch: best.2 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sal2lit::evaluate;
    use rand::Rng;

    fn small_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 60,
            hidden: vec![32, 16],
            seed,
            ..TrainConfig::default()
        }
    }

    /// Feature 0 alone encodes all three labels; the rest is noise.
    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<[usize; 3]>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let level = rng.random_range(0..2usize);
            let mut row: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
            row[0] = if level == 1 { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
            x.push(row);
            y.push([level; 3]);
        }
        (x, y)
    }

    #[test]
    fn separable_data_reaches_high_accuracy() {
        let (x, y) = separable(400, 1);
        let (params, _) = train(&x[..300], &y[..300], 2, &small_cfg(3)).unwrap();
        let acc = evaluate(&params, &x[300..], &y[300..]).unwrap();
        for a in acc.per_head {
            assert!(a >= 0.95, "{a}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (x, y) = separable(120, 2);
        let cfg = TrainConfig { max_epochs: 5, ..small_cfg(9) };
        let (a, ha) = train(&x, &y, 2, &cfg).unwrap();
        let (b, hb) = train(&x, &y, 2, &cfg).unwrap();
        assert_eq!(ha.best_val_loss().to_bits(), hb.best_val_loss().to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn returned_weights_have_minimum_validation_loss() {
        let (x, y) = separable(150, 4);
        let (params, hist) = train(&x, &y, 2, &small_cfg(5)).unwrap();
        let min = hist.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(hist.best_val_loss(), min);

        // Recompute the validation loss of the returned weights independently.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.shuffle(&mut rng);
        let mut val: Vec<usize> = order[..15].to_vec();
        val.sort_unstable();
        assert!((mean_loss(&params, &x, &y, &val) - min).abs() < 1e-12);
    }

    #[test]
    fn constant_labels_converge_to_majority() {
        let (x, _) = separable(100, 6);
        let y = vec![[1usize, 0, 2]; 100];
        let (params, _) = train(&x, &y, 3, &small_cfg(1)).unwrap();
        let acc = evaluate(&params, &x, &y).unwrap();
        assert_eq!(acc.per_head, [1.0; 3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = separable(10, 0);
        assert!(train(&x, &y[..9], 2, &small_cfg(0)).is_err());
        assert!(train(&x, &y, 1, &small_cfg(0)).is_err());
        let bad = TrainConfig { batch_size: 0, ..small_cfg(0) };
        assert!(train(&x, &y, 2, &bad).is_err());
        let mut nan = x.clone();
        nan[3][2] = f64::NAN;
        assert!(train(&nan, &y, 2, &small_cfg(0)).is_err());
    }

    #[test]
    fn overflowing_activations_report_epoch_and_batch() {
        let (mut x, y) = separable(64, 8);
        for row in &mut x {
            row.iter_mut().for_each(|v| *v = 1e308);
        }
        match train(&x, &y, 2, &small_cfg(2)) {
            Err(Error::NonFinite { epoch: 0, batch: 0, .. }) => {}
            other => panic!("expected a non-finite failure in the first batch, got {other:?}"),
        }
    }
}
