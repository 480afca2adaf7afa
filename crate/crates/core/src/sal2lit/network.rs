//! Multi-head feedforward network: a ReLU trunk shared by one linear
//! softmax head per literacy test.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_HEADS: usize = 3;
/// Trunk widths: 512 halving down to 32.
pub const DEFAULT_HIDDEN: [usize; 5] = [512, 256, 128, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
}

/// Affine layer `y = W x + b`, with `W` shaped `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: DMatrix::zeros(outputs, inputs),
            bias: DVector::zeros(outputs),
        }
    }

    /// He-uniform weights, zero bias.
    fn he_uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Dense {
            weights: DMatrix::from_fn(outputs, inputs, |_, _| dist.sample(rng)),
            bias: DVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// `W X + b·1ᵀ` for a batch stored one sample per column.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub trunk: Vec<Dense>,
    pub heads: Vec<Dense>,
    pub activation: Activation,
}

/// Per-sample outputs of a forward pass, one `levels × batch` logit matrix
/// per head, plus the cached activations needed for backpropagation.
pub(crate) struct Forward {
    /// `acts[0]` is the input; `acts[i + 1]` the output of trunk layer `i`.
    acts: Vec<DMatrix<f64>>,
    pub logits: Vec<DMatrix<f64>>,
}

impl ModelParams {
    pub fn new<R: Rng>(inputs: usize, hidden: &[usize], n_levels: usize, rng: &mut R) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = inputs;
        for &h in hidden {
            trunk.push(Dense::he_uniform(width, h, rng));
            width = h;
        }
        let heads = (0..N_HEADS)
            .map(|_| Dense::he_uniform(width, n_levels, rng))
            .collect();
        ModelParams {
            trunk,
            heads,
            activation: Activation::Relu,
        }
    }

    pub fn zeros(inputs: usize, hidden: &[usize], n_levels: usize) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = inputs;
        for &h in hidden {
            trunk.push(Dense::zeros(width, h));
            width = h;
        }
        ModelParams {
            trunk,
            heads: (0..N_HEADS).map(|_| Dense::zeros(width, n_levels)).collect(),
            activation: Activation::Relu,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk
            .first()
            .or_else(|| self.heads.first())
            .map_or(0, Dense::inputs)
    }

    pub fn n_levels(&self) -> usize {
        self.heads.first().map_or(0, Dense::outputs)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.trunk.iter().map(Dense::outputs).collect()
    }

    /// Checks that layer shapes chain and every weight is finite.
    pub fn validate(&self) -> Result<()> {
        if self.heads.len() != N_HEADS {
            return Err(Error::InvalidParameter(format!(
                "expected {N_HEADS} heads, found {}",
                self.heads.len()
            )));
        }
        let mut width = self.input_dim();
        for (i, layer) in self.trunk.iter().enumerate() {
            if layer.inputs() != width || layer.bias.len() != layer.outputs() {
                return Err(Error::InvalidParameter(format!("trunk layer {i} does not chain")));
            }
            width = layer.outputs();
        }
        let levels = self.n_levels();
        for (h, head) in self.heads.iter().enumerate() {
            if head.inputs() != width || head.outputs() != levels || head.bias.len() != levels {
                return Err(Error::InvalidParameter(format!("head {h} does not chain")));
            }
        }
        if self.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(())
    }

    /// Parameter storage in a fixed order: each trunk layer's weights then
    /// bias, then each head's weights then bias.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.trunk
            .iter()
            .chain(&self.heads)
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.trunk
            .iter_mut()
            .chain(self.heads.iter_mut())
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Forward pass over a batch stored one sample per column.
    pub(crate) fn forward(&self, x: DMatrix<f64>) -> Forward {
        let mut acts = Vec::with_capacity(self.trunk.len() + 1);
        acts.push(x);
        for layer in &self.trunk {
            let mut z = layer.apply(acts.last().unwrap());
            z.apply(|v| *v = v.max(0.0));
            acts.push(z);
        }
        let top = acts.last().unwrap();
        let logits = self.heads.iter().map(|h| h.apply(top)).collect();
        Forward { acts, logits }
    }

    /// Backpropagates per-head logit gradients. Returns the parameter
    /// gradient (shaped like `self`) and the gradient w.r.t. the input.
    pub(crate) fn backward(&self, fwd: &Forward, dlogits: &[DMatrix<f64>]) -> (ModelParams, DMatrix<f64>) {
        let mut grad = ModelParams::zeros(self.input_dim(), &self.hidden_widths(), self.n_levels());
        let top = fwd.acts.last().unwrap();
        let mut da = DMatrix::zeros(top.nrows(), top.ncols());
        for ((head, g), d) in self.heads.iter().zip(&mut grad.heads).zip(dlogits) {
            g.weights = d * top.transpose();
            g.bias = d.column_sum();
            da += head.weights.transpose() * d;
        }
        for i in (0..self.trunk.len()).rev() {
            // ReLU gate: the stored activation is positive exactly where z > 0.
            let out = &fwd.acts[i + 1];
            da.zip_apply(out, |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            let input = &fwd.acts[i];
            grad.trunk[i].weights = &da * input.transpose();
            grad.trunk[i].bias = da.column_sum();
            da = self.trunk[i].weights.transpose() * &da;
        }
        (grad, da)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidParameter(format!(
                "feature width {} does not match model input {}",
                x.len(),
                self.input_dim()
            )));
        }
        let fwd = self.forward(DMatrix::from_column_slice(x.len(), 1, x));
        Ok(fwd.logits.iter().map(|l| l.column(0).iter().copied().collect()).collect())
    }
}

/// Column-wise softmax.
pub(crate) fn softmax_columns(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = logits.clone();
    for mut col in p.column_iter_mut() {
        let m = col.max();
        col.apply(|v| *v = (*v - m).exp());
        let s = col.sum();
        col /= s;
    }
    p
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Equal-weight mean of the per-head mean cross-entropies, with its
/// gradient w.r.t. every head's logits.
pub(crate) fn multi_head_loss(logits: &[DMatrix<f64>], labels: &[[usize; N_HEADS]]) -> (f64, Vec<DMatrix<f64>>) {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (h, l) in logits.iter().enumerate() {
        let mut p = softmax_columns(l);
        for (j, lab) in labels.iter().enumerate() {
            let target = lab[h];
            // log-softmax directly, to stay finite for confident wrong answers.
            let col = l.column(j);
            let m = col.max();
            let lse = m + col.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += (lse - col[target]) / (N_HEADS as f64 * n);
            p[(target, j)] -= 1.0;
        }
        p /= N_HEADS as f64 * n;
        grads.push(p);
    }
    (loss, grads)
}

/// Stacks rows into a `width × rows` matrix, one sample per column.
pub(crate) fn batch_matrix(rows: &[&[f64]]) -> DMatrix<f64> {
    let width = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(width, rows.len(), |i, j| rows[j][i])
}

/// Training loss over `features` and its gradient w.r.t. every parameter.
pub fn loss_and_gradients(
    params: &ModelParams,
    features: &[Vec<f64>],
    labels: &[[usize; N_HEADS]],
) -> Result<(f64, ModelParams)> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows for {} label rows",
            features.len(),
            labels.len()
        )));
    }
    let n_levels = params.n_levels();
    if let Some(r) = features.iter().find(|r| r.len() != params.input_dim()) {
        return Err(Error::InvalidParameter(format!(
            "feature width {} but the model takes {}",
            r.len(),
            params.input_dim()
        )));
    }
    if labels.iter().flatten().any(|l| *l >= n_levels) {
        return Err(Error::InvalidParameter(format!("label outside 0..{n_levels}")));
    }
    let rows: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
    let fwd = params.forward(batch_matrix(&rows));
    let (loss, dlogits) = multi_head_loss(&fwd.logits, labels);
    Ok((loss, params.backward(&fwd, &dlogits).0))
}
