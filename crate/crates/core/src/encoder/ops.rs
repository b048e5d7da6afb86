//! Sequence primitives shared by the encoder stages, with their adjoints.
//!
//! Sequences are row-major `n x d` slices holding valid positions only;
//! positions outside `0..n` read as zero.

use super::params::AttentionParams;

/// Same-padded 1-D convolution followed by ReLU.
pub(crate) struct ConvRelu {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn conv_relu(x: &[f64], n: usize, d: usize, w: &[f64], b: &[f64], k: usize) -> ConvRelu {
    let h = k / 2;
    let mut pre = vec![0.0; n * d];
    for j in 0..n {
        let row = &mut pre[j * d..(j + 1) * d];
        for (o, p) in row.iter_mut().enumerate() {
            let mut acc = b[o];
            for t in 0..k {
                let Some(src) = (j + t).checked_sub(h).filter(|&s| s < n) else {
                    continue;
                };
                let xs = &x[src * d..(src + 1) * d];
                let ws = &w[o * d * k..(o + 1) * d * k];
                for c in 0..d {
                    acc += ws[c * k + t] * xs[c];
                }
            }
            *p = acc;
        }
    }
    let out = pre.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    ConvRelu { pre, out }
}

/// Accumulates parameter and input gradients of [`conv_relu`] given the
/// upstream gradient on its output. The ReLU subgradient at 0 is 0.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_relu_backward(
    x: &[f64],
    n: usize,
    d: usize,
    w: &[f64],
    k: usize,
    pre: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    grad_x: &mut [f64],
) {
    let h = k / 2;
    for j in 0..n {
        for o in 0..d {
            let g = if pre[j * d + o] > 0.0 {
                grad_out[j * d + o]
            } else {
                0.0
            };
            if g == 0.0 {
                continue;
            }
            grad_b[o] += g;
            for t in 0..k {
                let Some(src) = (j + t).checked_sub(h).filter(|&s| s < n) else {
                    continue;
                };
                for c in 0..d {
                    let wi = (o * d + c) * k + t;
                    grad_w[wi] += g * x[src * d + c];
                    grad_x[src * d + c] += g * w[wi];
                }
            }
        }
    }
}

/// Column-wise max over `n` rows, with the first maximal row per column.
/// Returns zeros and no indices when `n == 0`.
pub(crate) fn max_rows(y: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<usize>) {
    if n == 0 {
        return (vec![0.0; d], Vec::new());
    }
    let mut out = vec![f64::NEG_INFINITY; d];
    let mut arg = vec![0; d];
    for j in 0..n {
        for o in 0..d {
            let v = y[j * d + o];
            if v > out[o] {
                out[o] = v;
                arg[o] = j;
            }
        }
    }
    (out, arg)
}

pub(crate) fn max_rows_backward(arg: &[usize], d: usize, grad_out: &[f64], grad_y: &mut [f64]) {
    for (o, &j) in arg.iter().enumerate() {
        grad_y[j * d + o] += grad_out[o];
    }
}

pub(crate) struct AttnCache {
    /// `tanh(W h_i)`, `n x hidden`
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
}

pub(crate) fn attention_pool(hs: &[f64], n: usize, p: &AttentionParams) -> (Vec<f64>, AttnCache) {
    let (d, da) = (p.d, p.hidden);
    let mut z = vec![0.0; n * da];
    let mut scores = vec![0.0; n];
    for i in 0..n {
        let hi = &hs[i * d..(i + 1) * d];
        let mut a = 0.0;
        for q in 0..da {
            let wq = &p.w[q * d..(q + 1) * d];
            let u: f64 = wq.iter().zip(hi).map(|(w, x)| w * x).sum();
            let zq = u.tanh();
            z[i * da + q] = zq;
            a += p.v[q] * zq;
        }
        scores[i] = a;
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut alpha: Vec<f64> = scores.iter().map(|&a| (a - max).exp()).collect();
    let total: f64 = alpha.iter().sum();
    for a in &mut alpha {
        *a /= total;
    }
    let mut out = vec![0.0; d];
    for i in 0..n {
        for c in 0..d {
            out[c] += alpha[i] * hs[i * d + c];
        }
    }
    (out, AttnCache { z, alpha })
}

pub(crate) fn attention_pool_backward(
    hs: &[f64],
    n: usize,
    p: &AttentionParams,
    cache: &AttnCache,
    grad_out: &[f64],
    grad: &mut AttentionParams,
    grad_h: &mut [f64],
) {
    let (d, da) = (p.d, p.hidden);
    let dalpha: Vec<f64> = (0..n)
        .map(|i| {
            hs[i * d..(i + 1) * d]
                .iter()
                .zip(grad_out)
                .map(|(h, g)| h * g)
                .sum()
        })
        .collect();
    let mean: f64 = cache.alpha.iter().zip(&dalpha).map(|(a, g)| a * g).sum();
    for i in 0..n {
        let alpha = cache.alpha[i];
        for c in 0..d {
            grad_h[i * d + c] += alpha * grad_out[c];
        }
        let dscore = alpha * (dalpha[i] - mean);
        if dscore == 0.0 {
            continue;
        }
        for q in 0..da {
            let zq = cache.z[i * da + q];
            grad.v[q] += dscore * zq;
            let du = dscore * p.v[q] * (1.0 - zq * zq);
            for c in 0..d {
                grad.w[q * d + c] += du * hs[i * d + c];
                grad_h[i * d + c] += du * p.w[q * d + c];
            }
        }
    }
}
