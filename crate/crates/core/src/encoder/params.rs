use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::rng::{mix64, SplitMix64};

pub const DEFAULT_KERNEL: usize = 3;
pub const INIT_RANGE: f64 = 0.05;

/// Encoder architecture.
///
/// The first word names how tokens inside a span are pooled into a span
/// vector, the second how span vectors are pooled into `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Conv + ReLU + max within spans, then conv + ReLU + max across spans.
    CnnCnn,
    /// Conv + ReLU + max within spans, then elementwise max across spans.
    CnnMax,
    /// Self-attentive pooling within spans, then elementwise max.
    AttnMax,
    /// Self-attentive pooling within spans and across spans.
    AttnAttn,
    /// No segmentation: two conv + ReLU layers over the whole token sequence,
    /// then max over positions. Uses the same parameters as `CnnCnn`.
    TokenCnn,
}

impl Variant {
    pub const SPAN_VARIANTS: [Variant; 4] = [
        Variant::CnnCnn,
        Variant::CnnMax,
        Variant::AttnMax,
        Variant::AttnAttn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CnnCnn => "cnn_cnn",
            Variant::CnnMax => "cnn_max",
            Variant::AttnMax => "attn_max",
            Variant::AttnAttn => "attn_attn",
            Variant::TokenCnn => "token_cnn",
        }
    }

    pub fn uses_spans(self) -> bool {
        self != Variant::TokenCnn
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cnn_cnn" => Variant::CnnCnn,
            "cnn_max" => Variant::CnnMax,
            "attn_max" => Variant::AttnMax,
            "attn_attn" => Variant::AttnAttn,
            "token_cnn" => Variant::TokenCnn,
            other => {
                return Err(Error::Argument(format!(
                    "unknown encoder variant {other:?}"
                )))
            }
        })
    }
}

/// Single-hop self-attentive pooling: `a_i = v . tanh(W h_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub d: usize,
    pub hidden: usize,
    /// `hidden x d`
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(d: usize, hidden: usize) -> Self {
        Self {
            d,
            hidden,
            w: vec![0.0; hidden * d],
            v: vec![0.0; hidden],
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.w.len() != self.hidden * self.d || self.v.len() != self.hidden {
            return Err(shape(format!(
                "{name}: attention parameters do not match d={} hidden={}",
                self.d, self.hidden
            )));
        }
        Ok(())
    }
}

/// Trainable parameters of every encoder variant.
///
/// Conv kernels are stored `[out][in][tap]`, output size equal to `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub d: usize,
    pub k: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub token_attn: AttentionParams,
    pub span_attn: AttentionParams,
}

pub const PARAM_NAMES: [&str; 8] = [
    "w1",
    "b1",
    "w2",
    "b2",
    "token_attn.w",
    "token_attn.v",
    "span_attn.w",
    "span_attn.v",
];

impl EncoderParams {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            w1: vec![0.0; d * d * k],
            b1: vec![0.0; d],
            w2: vec![0.0; d * d * k],
            b2: vec![0.0; d],
            token_attn: AttentionParams::zeros(d, d),
            span_attn: AttentionParams::zeros(d, d),
        }
    }

    /// Uniform initialization in `(-range, range)`.
    pub fn init(d: usize, k: usize, range: f64, rng: &mut SplitMix64) -> Self {
        let mut p = Self::zeros(d, k);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.uniform(-range, range);
            }
        }
        p
    }

    /// Kernel whose only non-zero tap is the identity at the center.
    pub fn center_identity(d: usize, k: usize) -> Self {
        let mut p = Self::zeros(d, k);
        let h = k / 2;
        for o in 0..d {
            p.w1[(o * d + o) * k + h] = 1.0;
            p.w2[(o * d + o) * k + h] = 1.0;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.d, self.k);
        if d == 0 || k % 2 == 0 {
            return Err(shape(format!("need d > 0 and odd k, got d={d} k={k}")));
        }
        if self.w1.len() != d * d * k
            || self.w2.len() != d * d * k
            || self.b1.len() != d
            || self.b2.len() != d
        {
            return Err(shape(format!("conv parameters do not match d={d} k={k}")));
        }
        if self.token_attn.d != d || self.span_attn.d != d {
            return Err(shape("attention input size differs from d"));
        }
        self.token_attn.check("token_attn")?;
        self.span_attn.check("span_attn")?;
        if self
            .tensors()
            .iter()
            .any(|t| t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numeric("encoder parameters".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.token_attn.w,
            &self.token_attn.v,
            &self.span_attn.w,
            &self.span_attn.v,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.token_attn.w,
            &mut self.token_attn.v,
            &mut self.span_attn.w,
            &mut self.span_attn.v,
        ]
    }

    /// Hash of every parameter bit pattern; detects stale forward caches.
    pub fn fingerprint(&self) -> u64 {
        let mut h = mix64(self.d as u64 ^ ((self.k as u64) << 32));
        for t in self.tensors() {
            for v in t {
                h = mix64(h ^ v.to_bits());
            }
            h = mix64(h.wrapping_add(t.len() as u64));
        }
        h
    }

    /// Adds `scale * other` into `self`.
    pub fn add_scaled(&mut self, other: &EncoderParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
    }
}
