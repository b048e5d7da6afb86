//! Central-difference verification of [`backward`](super::backward).

use std::ops::Range;

use super::{
    backward, forward, ContextualEmbeddings, EncoderParams, SpanLimits, Variant, PARAM_NAMES,
};
use crate::error::Result;
use crate::rng::SplitMix64;

/// Denominator floor for relative errors of near-zero gradients.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCheckDims {
    pub d: usize,
    pub r: usize,
    pub l: usize,
    pub k: usize,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Coordinate with the largest relative error, e.g. `w1[4]` or `t[2,1]`.
    pub worst: String,
    pub checked: usize,
    pub passed: bool,
}

pub(crate) struct Instance {
    pub t: ContextualEmbeddings,
    pub boundaries: Vec<Range<usize>>,
    pub params: EncoderParams,
    pub projection: Vec<f64>,
}

/// A random problem that exercises both padding and truncation: up to `r + 1`
/// spans of up to `l + 1` tokens each.
pub(crate) fn random_instance(dims: &GradCheckDims, seed: u64) -> Instance {
    let mut rng = SplitMix64::new(seed);
    let spans = 1 + rng.below(dims.r as u64 + 1) as usize;
    let mut boundaries = Vec::with_capacity(spans);
    let mut pos = 1;
    for _ in 0..spans {
        let len = 1 + rng.below(dims.l as u64 + 1) as usize;
        boundaries.push(pos..pos + len);
        pos += len;
    }
    let m = pos;
    let data = (0..m * dims.d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let t = ContextualEmbeddings::new(m, dims.d, data).expect("finite instance");
    let params = EncoderParams::init(dims.d, dims.k, 0.5, &mut rng);
    let projection = (0..2 * dims.d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    Instance {
        t,
        boundaries,
        params,
        projection,
    }
}

fn objective(
    inst: &Instance,
    params: &EncoderParams,
    t: &ContextualEmbeddings,
    dims: &GradCheckDims,
) -> Result<f64> {
    let limits = SpanLimits::new(dims.r, dims.l);
    let (rep, _) = forward(t, &inst.boundaries, limits, params, dims.variant)?;
    Ok(rep
        .as_slice()
        .iter()
        .zip(&inst.projection)
        .map(|(a, b)| a * b)
        .sum())
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

struct Tracker {
    max_rel: f64,
    max_abs: f64,
    worst: String,
    checked: usize,
}

impl Tracker {
    fn record(&mut self, analytic: f64, numeric: f64, label: impl FnOnce() -> String) {
        let rel = rel_error(analytic, numeric);
        self.checked += 1;
        self.max_abs = self.max_abs.max((analytic - numeric).abs());
        if rel > self.max_rel || self.checked == 1 {
            self.max_rel = rel;
            self.worst = label();
        }
    }
}

/// Compares analytic gradients of `p . s*` for a random projection `p`
/// against central differences, coordinate by coordinate, over every
/// parameter and every entry of `T`.
pub fn grad_check(
    dims: GradCheckDims,
    seed: u64,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(crate::Error::Argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let inst = random_instance(&dims, seed);
    let limits = SpanLimits::new(dims.r, dims.l);
    let (_, cache) = forward(
        &inst.t,
        &inst.boundaries,
        limits,
        &inst.params,
        dims.variant,
    )?;
    let grads = backward(&cache, &inst.params, &inst.projection)?;

    let mut tracker = Tracker {
        max_rel: 0.0,
        max_abs: 0.0,
        worst: String::new(),
        checked: 0,
    };

    for (ti, name) in PARAM_NAMES.iter().enumerate() {
        let len = inst.params.tensors()[ti].len();
        for idx in 0..len {
            let mut plus = inst.params.clone();
            plus.tensors_mut()[ti][idx] += epsilon;
            let mut minus = inst.params.clone();
            minus.tensors_mut()[ti][idx] -= epsilon;
            let numeric = (objective(&inst, &plus, &inst.t, &dims)?
                - objective(&inst, &minus, &inst.t, &dims)?)
                / (2.0 * epsilon);
            let analytic = grads.params.tensors()[ti][idx];
            tracker.record(analytic, numeric, || format!("{name}[{idx}]"));
        }
    }

    let d = dims.d;
    for idx in 0..inst.t.as_slice().len() {
        let mut plus = inst.t.clone();
        plus.as_mut_slice()[idx] += epsilon;
        let mut minus = inst.t.clone();
        minus.as_mut_slice()[idx] -= epsilon;
        let numeric = (objective(&inst, &inst.params, &plus, &dims)?
            - objective(&inst, &inst.params, &minus, &dims)?)
            / (2.0 * epsilon);
        tracker.record(grads.embeddings[idx], numeric, || {
            format!("t[{},{}]", idx / d, idx % d)
        });
    }

    Ok(GradCheckReport {
        max_rel_error: tracker.max_rel,
        max_abs_error: tracker.max_abs,
        worst: tracker.worst,
        checked: tracker.checked,
        passed: tracker.max_rel < tolerance,
    })
}
