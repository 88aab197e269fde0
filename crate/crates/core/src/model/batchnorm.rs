use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::layer::{FloatDirWeights, FloatLayer};
use crate::error::{Error, Result};

/// Per-feature normalization applied to a layer's input:
/// `x = (x_sp - mu) / sqrt(sigma2 + epsilon) * gamma + beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub epsilon: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNormParams {
    pub fn identity(dim: usize) -> Self {
        BatchNormParams {
            mu: vec![0.0; dim],
            sigma2: vec![1.0; dim],
            epsilon: 0.0,
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if self.sigma2.len() != n || self.gamma.len() != n || self.beta.len() != n {
            return Err(Error::dim("batch-norm vectors differ in length"));
        }
        if let Some(j) = self.sigma2.iter().position(|s| !(s + self.epsilon > 0.0)) {
            return Err(Error::param(format!(
                "feature {j}: sigma2 + epsilon = {} is not positive",
                self.sigma2[j] + self.epsilon
            )));
        }
        Ok(())
    }

    /// Multiplicative constant per feature.
    pub fn k0(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .zip(&self.sigma2)
            .map(|(g, s)| g / (s + self.epsilon).sqrt())
            .collect()
    }

    /// Additive constant per feature.
    pub fn k1(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.beta[j] - self.gamma[j] * self.mu[j] / (self.sigma2[j] + self.epsilon).sqrt())
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mu[j]) / (self.sigma2[j] + self.epsilon).sqrt() * self.gamma[j] + self.beta[j])
            .collect()
    }
}

/// Folds a batch-norm on the layer's input into its input weights and
/// biases, so the layer can consume the sparse pre-normalization input.
pub fn refactor_batchnorm(layer: &FloatLayer, bn: &BatchNormParams) -> Result<FloatLayer> {
    layer.validate()?;
    bn.validate()?;
    if bn.dim() != layer.input_dim {
        return Err(Error::dim(format!(
            "batch-norm over {} features, layer input is {}",
            bn.dim(),
            layer.input_dim
        )));
    }
    let (k0, k1) = (bn.k0(), bn.k1());
    let fold = |d: &FloatDirWeights| -> FloatDirWeights {
        let (wx, bias) = fold_input_weights(&d.wx, &d.bias, &k0, &k1);
        FloatDirWeights {
            wx,
            wh: d.wh.clone(),
            bias,
        }
    };
    Ok(FloatLayer {
        input_dim: layer.input_dim,
        hidden: layer.hidden,
        forward: fold(&layer.forward),
        backward: layer.backward.as_ref().map(fold),
    })
}

/// `W'_ij = W_ij * K0_i` and `b'_j = b_j + sum_i W_ij * K1_i`, with rows of
/// `wx` indexing input features.
pub(crate) fn fold_input_weights(wx: &DenseMatrix, bias: &[f64], k0: &[f64], k1: &[f64]) -> (DenseMatrix, Vec<f64>) {
    let mut out = wx.clone();
    let mut bias = bias.to_vec();
    for i in 0..wx.rows() {
        for o in 0..wx.cols() {
            let w = wx.get(i, o);
            out.set(i, o, w * k0[i]);
            bias[o] += w * k1[i];
        }
    }
    (out, bias)
}
