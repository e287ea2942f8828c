use super::snapshot::SnapshotSeries;
use crate::autodiff::Matrix;
use crate::{Error, Result};

/// Number of raw structural statistics per node.
pub const RAW_FEATURES: usize = 5;

/// Dense `N x d0` node attribute matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    pub matrix: Matrix,
}

impl NodeFeatures {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Per-node structural statistics from the training snapshots' directed
/// ratings: `[in⁺, in⁻, out⁺, out⁻, mean received rating]`.
///
/// Each column is z-score normalized (population standard deviation; constant
/// columns become zero) and the result is zero-padded or truncated to `d0`
/// columns. Only training snapshots are read so that held-out signs do not
/// leak into the inputs.
pub fn build_features(series: &SnapshotSeries, d0: usize) -> Result<NodeFeatures> {
    if d0 < 2 {
        return Err(Error::InvalidArgument(format!("feature dimension {d0} < 2")));
    }
    let n = series.num_nodes();
    let mut raw = Matrix::zeros(n, RAW_FEATURES);
    let mut received = vec![(0i64, 0u64); n];
    for &t in &series.split.train {
        for r in series.snapshots[t].ratings() {
            let (in_col, out_col) = if r.rating > 0 { (0, 2) } else { (1, 3) };
            raw.set(r.target, in_col, raw.get(r.target, in_col) + 1.0);
            raw.set(r.source, out_col, raw.get(r.source, out_col) + 1.0);
            received[r.target].0 += r.rating as i64;
            received[r.target].1 += 1;
        }
    }
    for (v, &(total, count)) in received.iter().enumerate() {
        if count > 0 {
            raw.set(v, 4, total as f64 / count as f64);
        }
    }
    let mut out = Matrix::zeros(n, d0);
    for c in 0..RAW_FEATURES.min(d0) {
        let mean = (0..n).map(|v| raw.get(v, c)).sum::<f64>() / n.max(1) as f64;
        let var = (0..n).map(|v| (raw.get(v, c) - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        let std = var.sqrt();
        for v in 0..n {
            let centered = raw.get(v, c) - mean;
            out.set(v, c, if std > 0.0 { centered / std } else { 0.0 });
        }
    }
    Ok(NodeFeatures { matrix: out })
}
