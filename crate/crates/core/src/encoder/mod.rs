//! Hierarchical span encoder.
//!
//! Token vectors are grouped by span into a padded [`SpanTensor`]. Stage one
//! pools the tokens of each span into a span vector (conv + ReLU + max, or
//! self-attentive pooling), stage two pools span vectors into a sentence
//! vector `s`, and the result is `s* = [s ; t1]`. Every stage has an exact
//! adjoint, see [`backward`].

mod gradcheck;
mod ops;
mod params;
mod tensor;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use gradcheck::{grad_check, GradCheckDims, GradCheckReport};
pub use params::{
    AttentionParams, EncoderParams, Variant, DEFAULT_KERNEL, INIT_RANGE, PARAM_NAMES,
};
pub use tensor::{
    concat_cls, gather_spans, ContextualEmbeddings, SentenceRepresentation, SpanTensor, SpanVectors,
};

use crate::error::{shape, Error, Result};
use ops::{
    attention_pool, attention_pool_backward, conv_relu, conv_relu_backward, max_rows,
    max_rows_backward, AttnCache,
};

/// Padding limits: at most `r` spans of at most `l` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanLimits {
    pub r: usize,
    pub l: usize,
}

impl SpanLimits {
    pub const fn new(r: usize, l: usize) -> Self {
        Self { r, l }
    }
}

impl Default for SpanLimits {
    fn default() -> Self {
        Self { r: 16, l: 64 }
    }
}

fn check_dims(params: &EncoderParams, d: usize) -> Result<()> {
    params.validate()?;
    if params.d != d {
        return Err(shape(format!(
            "parameters expect d={}, input has d={d}",
            params.d
        )));
    }
    Ok(())
}

/// Stage one with conv + ReLU + max inside every span. Fully masked rows
/// yield zero vectors.
pub fn token_stage(c: &SpanTensor, params: &EncoderParams) -> Result<SpanVectors> {
    check_dims(params, c.d)?;
    let d = c.d;
    let mut out = vec![0.0; c.r * d];
    let mut valid = vec![false; c.r];
    for i in 0..c.r {
        let n = c.span_lengths[i];
        if n == 0 {
            continue;
        }
        let conv = conv_relu(c.span_rows(i), n, d, &params.w1, &params.b1, params.k);
        let (m, _) = max_rows(&conv.out, n, d);
        out[i * d..(i + 1) * d].copy_from_slice(&m);
        valid[i] = true;
    }
    SpanVectors::new(c.r, d, out, valid)
}

/// Token-level output: the stage-one span vectors with the final pooling
/// removed, for sequence labeling heads.
pub fn encode_token_level(c: &SpanTensor, params: &EncoderParams) -> Result<SpanVectors> {
    token_stage(c, params)
}

fn valid_rows(c: &SpanVectors) -> Result<usize> {
    let n = c.valid_prefix();
    if n == 0 {
        return Err(Error::EmptySpans);
    }
    if c.valid[n..].iter().any(|&v| v) {
        return Err(shape("valid span rows must form a prefix"));
    }
    Ok(n)
}

/// Stage two: conv + ReLU across span vectors, then max over valid spans.
pub fn span_stage(c: &SpanVectors, params: &EncoderParams) -> Result<Vec<f64>> {
    check_dims(params, c.d)?;
    let n = valid_rows(c)?;
    let conv = conv_relu(&c.data[..n * c.d], n, c.d, &params.w2, &params.b2, params.k);
    Ok(max_rows(&conv.out, n, c.d).0)
}

/// Self-attentive pooling of `n` rows: softmax of `v . tanh(W h_i)` weights.
pub fn self_attentive_pool(h: &[f64], n: usize, params: &AttentionParams) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptySpans);
    }
    if h.len() != n * params.d
        || params.w.len() != params.hidden * params.d
        || params.v.len() != params.hidden
    {
        return Err(shape(format!(
            "attention over {} values with n={n} d={}",
            h.len(),
            params.d
        )));
    }
    Ok(attention_pool(h, n, params).0)
}

enum TokenCache {
    Cnn { pre: Vec<f64>, arg: Vec<usize> },
    Attn(AttnCache),
}

enum SpanCache {
    Cnn { pre: Vec<f64>, arg: Vec<usize> },
    Max { arg: Vec<usize> },
    Attn(AttnCache),
}

enum Body {
    Spans {
        tensor: SpanTensor,
        tokens: Vec<TokenCache>,
        c: SpanVectors,
        valid: usize,
        span: SpanCache,
    },
    Tokens {
        x: Vec<f64>,
        n: usize,
        pre1: Vec<f64>,
        out1: Vec<f64>,
        pre2: Vec<f64>,
        arg: Vec<usize>,
    },
}

/// Intermediates recorded by [`forward`] for [`backward`].
pub struct ForwardCache {
    variant: Variant,
    fingerprint: u64,
    m: usize,
    d: usize,
    body: Body,
}

impl ForwardCache {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Stage-one span vectors (absent for [`Variant::TokenCnn`]).
    pub fn span_vectors(&self) -> Option<&SpanVectors> {
        match &self.body {
            Body::Spans { c, .. } => Some(c),
            Body::Tokens { .. } => None,
        }
    }
}

/// Runs the full encoder: gather, stage one, stage two, concatenation.
pub fn forward(
    t: &ContextualEmbeddings,
    boundaries: &[Range<usize>],
    limits: SpanLimits,
    params: &EncoderParams,
    variant: Variant,
) -> Result<(SentenceRepresentation, ForwardCache)> {
    let d = t.dim();
    check_dims(params, d)?;
    let (s, body) = if variant.uses_spans() {
        spans_forward(t, boundaries, limits, params, variant)?
    } else {
        tokens_forward(t, params)
    };
    let rep = concat_cls(&s, t)?;
    let cache = ForwardCache {
        variant,
        fingerprint: params.fingerprint(),
        m: t.rows(),
        d,
        body,
    };
    Ok((rep, cache))
}

fn spans_forward(
    t: &ContextualEmbeddings,
    boundaries: &[Range<usize>],
    limits: SpanLimits,
    params: &EncoderParams,
    variant: Variant,
) -> Result<(Vec<f64>, Body)> {
    let d = t.dim();
    let k = params.k;
    let tensor = gather_spans(t, boundaries, limits.r, limits.l)?;
    let valid = tensor.span_count;
    let mut c = vec![0.0; tensor.r * d];
    let mut flags = vec![false; tensor.r];
    let mut tokens = Vec::with_capacity(valid);
    for i in 0..valid {
        let n = tensor.span_lengths[i];
        let x = tensor.span_rows(i);
        let (ci, cache) = match variant {
            Variant::CnnCnn | Variant::CnnMax => {
                let conv = conv_relu(x, n, d, &params.w1, &params.b1, k);
                let (m, arg) = max_rows(&conv.out, n, d);
                (m, TokenCache::Cnn { pre: conv.pre, arg })
            }
            _ => {
                let (m, cache) = attention_pool(x, n, &params.token_attn);
                (m, TokenCache::Attn(cache))
            }
        };
        c[i * d..(i + 1) * d].copy_from_slice(&ci);
        flags[i] = true;
        tokens.push(cache);
    }
    let c = SpanVectors::new(tensor.r, d, c, flags)?;
    let rows = &c.data[..valid * d];
    let (s, span) = match variant {
        Variant::CnnCnn => {
            let conv = conv_relu(rows, valid, d, &params.w2, &params.b2, k);
            let (s, arg) = max_rows(&conv.out, valid, d);
            (s, SpanCache::Cnn { pre: conv.pre, arg })
        }
        Variant::CnnMax | Variant::AttnMax => {
            let (s, arg) = max_rows(rows, valid, d);
            (s, SpanCache::Max { arg })
        }
        Variant::AttnAttn => {
            let (s, cache) = attention_pool(rows, valid, &params.span_attn);
            (s, SpanCache::Attn(cache))
        }
        Variant::TokenCnn => unreachable!("token_cnn has no span stage"),
    };
    Ok((
        s,
        Body::Spans {
            tensor,
            tokens,
            c,
            valid,
            span,
        },
    ))
}

fn tokens_forward(t: &ContextualEmbeddings, params: &EncoderParams) -> (Vec<f64>, Body) {
    let d = t.dim();
    let n = t.rows() - 1;
    let x = t.as_slice()[d..].to_vec();
    let first = conv_relu(&x, n, d, &params.w1, &params.b1, params.k);
    let second = conv_relu(&first.out, n, d, &params.w2, &params.b2, params.k);
    let (s, arg) = max_rows(&second.out, n, d);
    (
        s,
        Body::Tokens {
            x,
            n,
            pre1: first.pre,
            out1: first.out,
            pre2: second.pre,
            arg,
        },
    )
}

/// Gradients of a scalar objective with respect to parameters and `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: EncoderParams,
    /// `m x d`, same layout as [`ContextualEmbeddings`].
    pub embeddings: Vec<f64>,
}

/// Back-propagates `upstream = dL/ds*` through a recorded forward pass.
///
/// Max pooling routes to the first maximal index, the ReLU subgradient at 0
/// is 0, and padded slots receive no gradient.
pub fn backward(
    cache: &ForwardCache,
    params: &EncoderParams,
    upstream: &[f64],
) -> Result<Gradients> {
    let d = cache.d;
    if params.fingerprint() != cache.fingerprint {
        return Err(Error::Cache(
            "parameters changed since the forward pass".into(),
        ));
    }
    if upstream.len() != 2 * d {
        return Err(shape(format!(
            "upstream gradient has {} entries, expected {}",
            upstream.len(),
            2 * d
        )));
    }
    let k = params.k;
    let mut grad = EncoderParams::zeros(d, k);
    let mut grad_t = vec![0.0; cache.m * d];
    let (grad_s, grad_cls) = upstream.split_at(d);
    grad_t[..d].copy_from_slice(grad_cls);

    match &cache.body {
        Body::Spans {
            tensor,
            tokens,
            c,
            valid,
            span,
        } => {
            let n = *valid;
            let rows = &c.data[..n * d];
            let mut grad_c = vec![0.0; n * d];
            match span {
                SpanCache::Cnn { pre, arg } => {
                    let mut grad_y = vec![0.0; n * d];
                    max_rows_backward(arg, d, grad_s, &mut grad_y);
                    conv_relu_backward(
                        rows,
                        n,
                        d,
                        &params.w2,
                        k,
                        pre,
                        &grad_y,
                        &mut grad.w2,
                        &mut grad.b2,
                        &mut grad_c,
                    );
                }
                SpanCache::Max { arg } => max_rows_backward(arg, d, grad_s, &mut grad_c),
                SpanCache::Attn(ac) => attention_pool_backward(
                    rows,
                    n,
                    &params.span_attn,
                    ac,
                    grad_s,
                    &mut grad.span_attn,
                    &mut grad_c,
                ),
            }
            for (i, tc) in tokens.iter().enumerate() {
                let len = tensor.span_lengths[i];
                let x = tensor.span_rows(i);
                let gc = &grad_c[i * d..(i + 1) * d];
                let mut grad_x = vec![0.0; len * d];
                match tc {
                    TokenCache::Cnn { pre, arg } => {
                        let mut grad_y = vec![0.0; len * d];
                        max_rows_backward(arg, d, gc, &mut grad_y);
                        conv_relu_backward(
                            x,
                            len,
                            d,
                            &params.w1,
                            k,
                            pre,
                            &grad_y,
                            &mut grad.w1,
                            &mut grad.b1,
                            &mut grad_x,
                        );
                    }
                    TokenCache::Attn(ac) => attention_pool_backward(
                        x,
                        len,
                        &params.token_attn,
                        ac,
                        gc,
                        &mut grad.token_attn,
                        &mut grad_x,
                    ),
                }
                for (j, &pos) in tensor.span_positions(i).iter().enumerate() {
                    for ch in 0..d {
                        grad_t[pos * d + ch] += grad_x[j * d + ch];
                    }
                }
            }
        }
        Body::Tokens {
            x,
            n,
            pre1,
            out1,
            pre2,
            arg,
        } => {
            let n = *n;
            let mut grad_y2 = vec![0.0; n * d];
            max_rows_backward(arg, d, grad_s, &mut grad_y2);
            let mut grad_y1 = vec![0.0; n * d];
            conv_relu_backward(
                out1,
                n,
                d,
                &params.w2,
                k,
                pre2,
                &grad_y2,
                &mut grad.w2,
                &mut grad.b2,
                &mut grad_y1,
            );
            let mut grad_x = vec![0.0; n * d];
            conv_relu_backward(
                x,
                n,
                d,
                &params.w1,
                k,
                pre1,
                &grad_y1,
                &mut grad.w1,
                &mut grad.b1,
                &mut grad_x,
            );
            for (g, gx) in grad_t[d..].iter_mut().zip(&grad_x) {
                *g += gx;
            }
        }
    }
    Ok(Gradients {
        params: grad,
        embeddings: grad_t,
    })
}

#[cfg(test)]
mod tests;
