use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::rng::SplitMix64;

/// Affine classifier on the sentence representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub input: usize,
    pub labels: usize,
    /// `input x labels`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl ClassifierHead {
    pub fn zeros(input: usize, labels: usize) -> Self {
        Self {
            input,
            labels,
            w: vec![0.0; input * labels],
            b: vec![0.0; labels],
        }
    }

    pub fn init(input: usize, labels: usize, range: f64, rng: &mut SplitMix64) -> Self {
        let mut h = Self::zeros(input, labels);
        for v in h.w.iter_mut().chain(h.b.iter_mut()) {
            *v = rng.uniform(-range, range);
        }
        h
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input {
            return Err(shape(format!(
                "head expects {} inputs, got {}",
                self.input,
                x.len()
            )));
        }
        let mut out = self.b.clone();
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.w[i * self.labels..(i + 1) * self.labels];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], grad_logits: &[f64], grad: &mut ClassifierHead) -> Vec<f64> {
        let mut grad_x = vec![0.0; self.input];
        for (o, g) in grad.b.iter_mut().enumerate() {
            *g += grad_logits[o];
        }
        for (i, &xi) in x.iter().enumerate() {
            let row = i * self.labels;
            let mut gx = 0.0;
            for (o, &go) in grad_logits.iter().enumerate() {
                grad.w[row + o] += xi * go;
                gx += self.w[row + o] * go;
            }
            grad_x[i] = gx;
        }
        grad_x
    }

    pub fn tensors(&self) -> [&Vec<f64>; 2] {
        [&self.w, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 2] {
        [&mut self.w, &mut self.b]
    }
}

/// Softmax cross-entropy; the gradient is `softmax(logits) - onehot(label)`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Argument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest value; ties go to the first.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
