//! Evaluation metrics and the McNemar paired significance test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

fn check_pair<T>(preds: &[T], labels: &[T]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions".into()));
    }
    if preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn check_binary(values: &[usize], what: &str) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::Argument(format!(
            "{what} must be binary (0/1), found {v}"
        ))),
        None => Ok(()),
    }
}

/// Binary confusion counts with class 1 as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(preds: &[usize], labels: &[usize]) -> Result<Self> {
        check_pair(preds, labels)?;
        check_binary(preds, "predictions")?;
        check_binary(labels, "labels")?;
        let mut c = Confusion::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// `2PR / (P + R)`, and 0 when `P + R = 0`.
    pub fn f1(&self) -> f64 {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (
            self.tp as f64,
            self.tn as f64,
            self.fp as f64,
            self.fn_ as f64,
        );
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / denom.sqrt()
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_pair(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// F1 and MCC for positive class 1; absent with more than two labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcc: Option<f64>,
}

pub fn classification_metrics(preds: &[usize], labels: &[usize]) -> Result<ClassificationMetrics> {
    let accuracy = accuracy(preds, labels)?;
    let binary = preds.iter().chain(labels).all(|&v| v <= 1);
    let confusion = if binary {
        Some(Confusion::from_predictions(preds, labels)?)
    } else {
        None
    };
    Ok(ClassificationMetrics {
        accuracy,
        f1: confusion.map(|c| c.f1()),
        mcc: confusion.map(|c| c.mcc()),
    })
}

pub fn matthews_corr(preds: &[usize], labels: &[usize]) -> Result<f64> {
    Ok(Confusion::from_predictions(preds, labels)?.mcc())
}

/// Sample Pearson correlation.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument(format!(
            "pearson needs two equal-length samples of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Gold labels with the predictions of two systems on the same examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedPredictions {
    pub labels: Vec<usize>,
    pub preds_a: Vec<usize>,
    pub preds_b: Vec<usize>,
}

impl PairedPredictions {
    pub fn new(labels: Vec<usize>, preds_a: Vec<usize>, preds_b: Vec<usize>) -> Result<Self> {
        if labels.len() != preds_a.len() || labels.len() != preds_b.len() {
            return Err(Error::Argument(format!(
                "paired predictions differ in length: {}, {}, {}",
                labels.len(),
                preds_a.len(),
                preds_b.len()
            )));
        }
        Ok(Self {
            labels,
            preds_a,
            preds_b,
        })
    }

    /// `(b, c)`: examples only system A gets right, and only B gets right.
    pub fn discordant(&self) -> (u64, u64) {
        let mut b = 0;
        let mut c = 0;
        for ((y, a), p) in self.labels.iter().zip(&self.preds_a).zip(&self.preds_b) {
            match (a == y, p == y) {
                (true, false) => b += 1,
                (false, true) => c += 1,
                _ => {}
            }
        }
        (b, c)
    }

    pub fn swapped(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            preds_a: self.preds_b.clone(),
            preds_b: self.preds_a.clone(),
        }
    }
}

/// Discordant-pair total below which the exact binomial test is used.
pub const EXACT_THRESHOLD: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    Exact,
    ChiSquare,
    NoDiscordance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McNemarResult {
    pub b: u64,
    pub c: u64,
    pub method: McNemarMethod,
    /// Chi-square statistic; `None` for the exact branch.
    pub statistic: Option<f64>,
    pub p_value: f64,
}

/// Exact two-sided binomial p-value: `min(1, 2 * P[X <= min(b, c)])` with
/// `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    // Running binomial coefficient in floating point; exact for the small n
    // this branch is used for.
    let mut coef = 1.0f64;
    let mut tail = 1.0f64;
    for i in 1..=k {
        coef = coef * (n - i + 1) as f64 / i as f64;
        tail += coef;
    }
    (2.0 * tail * 0.5f64.powi(n as i32)).min(1.0)
}

/// Chi-square statistic with continuity correction, 1 degree of freedom.
pub fn mcnemar_chi_square(b: u64, c: u64) -> (f64, f64) {
    let n = (b + c) as f64;
    if n == 0.0 {
        return (0.0, 1.0);
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n;
    let dist = ChiSquared::new(1.0).expect("1 dof");
    (stat, (1.0 - dist.cdf(stat)).clamp(0.0, 1.0))
}

pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemarResult {
    if b + c == 0 {
        return McNemarResult {
            b,
            c,
            method: McNemarMethod::NoDiscordance,
            statistic: None,
            p_value: 1.0,
        };
    }
    if b + c < EXACT_THRESHOLD {
        McNemarResult {
            b,
            c,
            method: McNemarMethod::Exact,
            statistic: None,
            p_value: mcnemar_exact(b, c),
        }
    } else {
        let (stat, p) = mcnemar_chi_square(b, c);
        McNemarResult {
            b,
            c,
            method: McNemarMethod::ChiSquare,
            statistic: Some(stat),
            p_value: p,
        }
    }
}

pub fn mcnemar_test(paired: &PairedPredictions) -> Result<McNemarResult> {
    check_binary(&paired.labels, "labels")?;
    check_binary(&paired.preds_a, "predictions of system A")?;
    check_binary(&paired.preds_b, "predictions of system B")?;
    let (b, c) = paired.discordant();
    Ok(mcnemar_from_counts(b, c))
}

/// Metric name to value, as emitted in JSON reports.
pub type MetricReport = BTreeMap<String, f64>;

/// Accuracy, F1 and MCC for binary predictions.
pub fn binary_report(preds: &[usize], labels: &[usize]) -> Result<MetricReport> {
    let c = Confusion::from_predictions(preds, labels)?;
    let mut report = MetricReport::new();
    report.insert("accuracy".into(), accuracy(preds, labels)?);
    report.insert("f1".into(), c.f1());
    report.insert("mcc".into(), c.mcc());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        let m = classification_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((m.accuracy, m.f1, m.mcc), (1.0, Some(1.0), Some(1.0)));
        let m = classification_metrics(&[0, 0, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((m.f1, m.mcc), (Some(0.0), Some(0.0)));
        assert_eq!(m.accuracy, 0.5);
        // TP=2, FP=1, FN=1.
        let m = classification_metrics(&[1, 1, 1, 0], &[1, 1, 0, 1]).unwrap();
        assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(classification_metrics(&[], &[]).is_err());
        let m = classification_metrics(&[2, 0, 1], &[2, 1, 1]).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((m.f1, m.mcc), (None, None));
    }

    #[test]
    fn mcc_examples() {
        let y = [1, 0, 1, 1, 0];
        let inv: Vec<usize> = y.iter().map(|v| 1 - v).collect();
        assert_eq!(matthews_corr(&y, &y).unwrap(), 1.0);
        assert_eq!(matthews_corr(&inv, &y).unwrap(), -1.0);
        assert_eq!(matthews_corr(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), 0.0);
        assert_eq!(matthews_corr(&[1, 1, 1], &[1, 0, 1]).unwrap(), 0.0);
        assert!(matthews_corr(&[2], &[1]).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson_corr(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_corr(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson_corr(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            pearson_corr(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(pearson_corr(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mcnemar_examples() {
        assert!((mcnemar_exact(10, 2) - 158.0 / 4096.0).abs() < 1e-15);
        assert_eq!(mcnemar_exact(5, 5), 1.0);
        assert_eq!(mcnemar_from_counts(0, 0).p_value, 1.0);
        let r = mcnemar_from_counts(30, 10);
        assert_eq!(r.method, McNemarMethod::ChiSquare);
        // (|30 - 10| - 1)^2 / 40 = 9.025
        assert!((r.statistic.unwrap() - 9.025).abs() < 1e-12);
        assert!(r.p_value > 0.002 && r.p_value < 0.003);
    }

    #[test]
    fn mcnemar_counts_discordance() {
        let p =
            PairedPredictions::new(vec![1, 0, 1, 0], vec![1, 0, 0, 1], vec![0, 0, 1, 0]).unwrap();
        assert_eq!(p.discordant(), (1, 2));
        assert_eq!(
            mcnemar_test(&p).unwrap().p_value,
            mcnemar_test(&p.swapped()).unwrap().p_value
        );
        let bad = PairedPredictions::new(vec![2], vec![1], vec![0]).unwrap();
        assert!(mcnemar_test(&bad).is_err());
    }
}
