//! Integrated Gradients attributions from the zero baseline.

use nalgebra::DMatrix;

use super::network::{ModelParams, N_HEADS};
use crate::error::{Error, Result};

pub const DEFAULT_IG_STEPS: usize = 256;

/// Riemann-midpoint Integrated Gradients of one head's class logit:
/// `x_i · mean_k ∂F/∂x_i((k + ½)/steps · x)`.
///
/// The path gradients are averaged with a running mean so a constant
/// gradient (a linear model) is reproduced exactly.
pub fn integrated_gradients(params: &ModelParams, x: &[f64], head: usize, class: usize, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    if head >= N_HEADS || class >= params.n_levels() {
        return Err(Error::InvalidParameter(format!("no output ({head}, {class})")));
    }
    let width = params.input_dim();
    if x.len() != width {
        return Err(Error::InvalidParameter(format!(
            "feature width {} does not match model input {width}",
            x.len()
        )));
    }
    let path = DMatrix::from_fn(width, steps, |i, k| x[i] * ((k as f64 + 0.5) / steps as f64));
    let fwd = params.forward(path);
    let dlogits: Vec<DMatrix<f64>> = (0..N_HEADS)
        .map(|h| {
            let mut d = DMatrix::zeros(params.n_levels(), steps);
            if h == head {
                d.row_mut(class).fill(1.0);
            }
            d
        })
        .collect();
    let (_, grads) = params.backward(&fwd, &dlogits);
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Undefined("integrated gradients (non-finite gradient)"));
    }
    let mut mean = vec![0.0; width];
    for (k, col) in grads.column_iter().enumerate() {
        for (m, g) in mean.iter_mut().zip(col.iter()) {
            *m += (g - *m) / (k + 1) as f64;
        }
    }
    Ok(mean.iter().zip(x).map(|(m, xi)| m * xi).collect())
}
