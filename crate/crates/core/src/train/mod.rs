//! Fine-tuning the span encoder plus a classifier head on frozen embeddings.

mod data;
mod head;
mod optim;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{
    load_dataset, prepare, read_dataset, EmbeddingSource, ExampleInput, LabeledExample,
    PreparedExample, Segmentation,
};
pub use head::{argmax, cross_entropy, ClassifierHead};
pub use optim::{lr_at_step, AdamConfig, AdamState};

use crate::encoder::{
    backward, forward, EncoderParams, SpanLimits, Variant, DEFAULT_KERNEL, INIT_RANGE,
};
use crate::error::{Error, Result};
use crate::metrics::{classification_metrics, ClassificationMetrics};
use crate::rng::SplitMix64;

/// What sits between the frozen embeddings and the classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variant")]
pub enum Architecture {
    /// Span encoder; the head reads `[s ; t1]`.
    Span(Variant),
    /// Head on `t1` alone.
    ClsOnly,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Span(v) => f.write_str(v.name()),
            Architecture::ClsOnly => f.write_str("cls_only"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cls_only" | "cls" => Ok(Architecture::ClsOnly),
            other => other.parse().map(Architecture::Span),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub limits: SpanLimits,
    pub kernel: usize,
    pub lr: f64,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Span(Variant::CnnCnn),
            limits: SpanLimits::default(),
            kernel: DEFAULT_KERNEL,
            lr: 1e-3,
            warmup_ratio: 0.1,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 3,
            seed: 42,
            init_range: INIT_RANGE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::Argument(format!(
                "warmup ratio must be in [0, 1), got {}",
                self.warmup_ratio
            )));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Argument("weight decay must be non-negative".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "kernel width must be odd, got {}",
                self.kernel
            )));
        }
        if self.limits.r == 0 || self.limits.l == 0 {
            return Err(Error::Argument("span limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanModel {
    pub architecture: Architecture,
    pub limits: SpanLimits,
    pub d: usize,
    pub encoder: Option<EncoderParams>,
    pub head: ClassifierHead,
}

impl SpanModel {
    pub fn init(config: &TrainConfig, d: usize, labels: usize) -> Result<Self> {
        config.validate()?;
        if labels < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 labels, got {labels}"
            )));
        }
        let mut rng = SplitMix64::new(config.seed);
        let (encoder, input) = match config.architecture {
            Architecture::Span(_) => (
                Some(EncoderParams::init(
                    d,
                    config.kernel,
                    config.init_range,
                    &mut rng,
                )),
                2 * d,
            ),
            Architecture::ClsOnly => (None, d),
        };
        let head = ClassifierHead::init(input, labels, config.init_range, &mut rng);
        Ok(Self {
            architecture: config.architecture,
            limits: config.limits,
            d,
            encoder,
            head,
        })
    }

    pub fn labels(&self) -> usize {
        self.head.labels
    }

    pub fn logits(&self, ex: &PreparedExample) -> Result<Vec<f64>> {
        let x = self.features(ex)?;
        self.head.logits(&x)
    }

    fn features(&self, ex: &PreparedExample) -> Result<Vec<f64>> {
        self.check_input(ex)?;
        match (self.architecture, &self.encoder) {
            (Architecture::Span(v), Some(p)) => {
                Ok(forward(&ex.embeddings, &ex.boundaries, self.limits, p, v)?
                    .0
                    .into_vec())
            }
            (Architecture::ClsOnly, _) => Ok(ex.embeddings.cls().to_vec()),
            (Architecture::Span(_), None) => Err(Error::Format(
                "span model without encoder parameters".into(),
            )),
        }
    }

    fn check_input(&self, ex: &PreparedExample) -> Result<()> {
        if ex.embeddings.dim() != self.d {
            return Err(Error::Shape(format!(
                "model expects d={}, embeddings have d={}",
                self.d,
                ex.embeddings.dim()
            )));
        }
        Ok(())
    }

    /// Loss and gradients for one example.
    fn example_gradient(
        &self,
        ex: &PreparedExample,
    ) -> Result<(f64, Option<EncoderParams>, ClassifierHead)> {
        self.check_input(ex)?;
        if ex.label >= self.labels() {
            return Err(Error::Argument(format!(
                "label {} out of range for {} labels",
                ex.label,
                self.labels()
            )));
        }
        let mut head_grad = ClassifierHead::zeros(self.head.input, self.head.labels);
        match (self.architecture, &self.encoder) {
            (Architecture::Span(v), Some(p)) => {
                let (rep, cache) = forward(&ex.embeddings, &ex.boundaries, self.limits, p, v)?;
                let logits = self.head.logits(rep.as_slice())?;
                let (loss, g) = cross_entropy(&logits, ex.label)?;
                let gx = self.head.backward(rep.as_slice(), &g, &mut head_grad);
                let grads = backward(&cache, p, &gx)?;
                Ok((loss, Some(grads.params), head_grad))
            }
            _ => {
                let x = self.features(ex)?;
                let logits = self.head.logits(&x)?;
                let (loss, g) = cross_entropy(&logits, ex.label)?;
                self.head.backward(&x, &g, &mut head_grad);
                Ok((loss, None, head_grad))
            }
        }
    }

    fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out: Vec<&Vec<f64>> = Vec::new();
        if let Some(p) = &self.encoder {
            out.extend(p.tensors());
        }
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        if let Some(p) = &mut self.encoder {
            out.extend(p.tensors_mut());
        }
        out.extend(self.head.tensors_mut());
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let write = || -> Result<()> {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer(&mut w, self).map_err(|e| Error::Format(e.to_string()))?;
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| e.in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let read = || -> Result<Self> {
            let text = std::fs::read_to_string(path)?;
            let model: SpanModel =
                serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
            if let Some(p) = &model.encoder {
                p.validate()?;
            }
            Ok(model)
        };
        read().map_err(|e| e.in_file(path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev: Option<ClassificationMetrics>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SpanModel,
    pub history: Vec<EpochMetrics>,
}

impl TrainOutcome {
    pub fn best_dev_accuracy(&self) -> Option<f64> {
        self.history
            .iter()
            .filter_map(|e| e.dev.as_ref().map(|m| m.accuracy))
            .fold(None, |best, a| Some(best.map_or(a, |b: f64| b.max(a))))
    }

    pub fn write_history<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.history {
            let line = serde_json::to_string(e).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Mini-batch AdamW training. Per-example gradients are computed in
/// parallel and summed in example order, so results do not depend on the
/// thread count.
pub fn train(
    train_set: &[PreparedExample],
    dev_set: Option<&[PreparedExample]>,
    labels: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(train_set, dev_set, labels, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    train_set: &[PreparedExample],
    dev_set: Option<&[PreparedExample]>,
    labels: usize,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    let first = train_set
        .first()
        .ok_or_else(|| Error::EmptyInput("training set".into()))?;
    let mut model = SpanModel::init(config, first.embeddings.dim(), labels)?;
    let mut adam = AdamState::new(model.tensors(), AdamConfig::default());
    let batches_per_epoch = train_set.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = SplitMix64::new(config.seed ^ 0x5348_5546_464c_4500);
    let mut step = 0;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| model.example_gradient(&train_set[i]))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads: Vec<Vec<f64>> =
                model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
            for (loss, enc, head) in &results {
                loss_sum += loss;
                let mut parts: Vec<&Vec<f64>> = Vec::new();
                if let Some(e) = enc {
                    parts.extend(e.tensors());
                }
                parts.extend(head.tensors());
                for (acc, g) in grads.iter_mut().zip(parts) {
                    for (a, b) in acc.iter_mut().zip(g) {
                        *a += scale * b;
                    }
                }
            }
            if grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at step {}",
                    step + 1
                )));
            }
            step += 1;
            lr = lr_at_step(step - 1, total_steps, config.lr, config.warmup_ratio);
            adam.step(
                model.tensors_mut(),
                grads.iter().collect(),
                step,
                lr,
                config.weight_decay,
            );
        }
        let dev = match dev_set {
            Some(dev) if !dev.is_empty() => Some(evaluate(&model, dev)?),
            _ => None,
        };
        let metrics = EpochMetrics {
            epoch,
            steps: step,
            train_loss: loss_sum / train_set.len() as f64,
            lr,
            dev,
        };
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(TrainOutcome { model, history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub logits: Vec<f64>,
}

pub fn predict(model: &SpanModel, examples: &[PreparedExample]) -> Result<Vec<Prediction>> {
    examples
        .par_iter()
        .map(|ex| {
            let logits = model.logits(ex)?;
            Ok(Prediction {
                label: argmax(&logits),
                logits,
            })
        })
        .collect()
}

pub fn evaluate(model: &SpanModel, examples: &[PreparedExample]) -> Result<ClassificationMetrics> {
    let preds: Vec<usize> = predict(model, examples)?
        .into_iter()
        .map(|p| p.label)
        .collect();
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    classification_metrics(&preds, &gold)
}
