//! Classification and regression metrics.

use crate::error::{Error, Result};

/// Root mean squared error.
pub fn metric_rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "rmse: {} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("rmse of an empty set".into()));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Geometric mean of the two per-class recalls.
pub fn metric_gmean(tp: usize, fn_: usize, tn: usize, fp: usize) -> Result<f64> {
    if tp + fn_ == 0 || tn + fp == 0 {
        return Err(Error::UndefinedMetric("G-Mean needs both classes present".into()));
    }
    let sens = tp as f64 / (tp + fn_) as f64;
    let spec = tn as f64 / (tn + fp) as f64;
    Ok((sens * spec).sqrt())
}

fn check_pm1(labels: &[i64]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidInput(format!("labels must be ±1, found {bad}")));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic; tied scores
/// contribute ½ per positive/negative pair.
pub fn metric_auc(scores: &[f64], labels: &[i64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "auc: {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    check_pm1(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("auc: NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Counts of true/false positives/negatives for ±1 labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn from_labels(pred: &[i64], truth: &[i64]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} labels",
                pred.len(),
                truth.len()
            )));
        }
        check_pm1(pred)?;
        check_pm1(truth)?;
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fn_ += 1,
                (_, -1) => c.tn += 1,
                _ => c.fp += 1,
            }
        }
        Ok(c)
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.fn_ + self.tn + self.fp).max(1) as f64
    }

    pub fn gmean(&self) -> Result<f64> {
        metric_gmean(self.tp, self.fn_, self.tn, self.fp)
    }
}

/// Threshold scores at 0 with `sgn(0) = +1`.
pub fn classify(scores: &[f64]) -> Vec<i64> {
    scores.iter().map(|&s| if s < 0.0 { -1 } else { 1 }).collect()
}
