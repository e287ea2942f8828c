use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary edge-classification metrics with the anomalous class as positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    /// Average precision; `None` when the labels contain a single class.
    pub ap: Option<f64>,
    pub num_edges: usize,
    pub num_anomalous: usize,
}

/// Confusion counts at threshold `score > 0.5`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_scores(scores: &[f64], labels: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s > 0.5, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics of anomalous-class scores against 0/1 labels.
///
/// AP sums `(R_k - R_{k-1}) · P_k` over distinct score thresholds in
/// decreasing order, so tied scores enter together.
pub fn evaluate(scores: &[f64], labels: &[usize]) -> Result<Metrics> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no predictions to evaluate".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let c = Confusion::from_scores(scores, labels);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let ap = if positives == 0 || positives == labels.len() {
        log::warn!("average precision undefined for single-class labels");
        None
    } else {
        Some(average_precision(scores, labels, positives))
    };
    Ok(Metrics {
        f1,
        precision,
        recall,
        accuracy: ratio(c.tp + c.tn, labels.len()),
        ap,
        num_edges: labels.len(),
        num_anomalous: positives,
    })
}

fn average_precision(scores: &[f64], labels: &[usize], positives: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut prev_recall, mut ap) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            tp += labels[order[i]];
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    ap
}

/// Field-wise mean; AP averages the defined values only.
pub fn mean_metrics(items: &[&Metrics]) -> Option<Metrics> {
    let first = items.first()?;
    let n = items.len() as f64;
    let avg = |f: fn(&Metrics) -> f64| items.iter().map(|m| f(m)).sum::<f64>() / n;
    let aps: Vec<f64> = items.iter().filter_map(|m| m.ap).collect();
    Some(Metrics {
        f1: avg(|m| m.f1),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        accuracy: avg(|m| m.accuracy),
        ap: (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64),
        num_edges: first.num_edges,
        num_anomalous: first.num_anomalous,
    })
}
