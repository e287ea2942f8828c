use std::sync::Arc;

use super::layers::{test_time_sign_override, SignedMasks};
use crate::autodiff::Matrix;
use crate::data::{NodeFeatures, SnapshotSeries};
use crate::graphlet::MotifSeries;
use crate::sparse::{CsrMatrix, SparseStack};
use crate::{Error, Result};

/// Precomputed constant operands for one snapshot.
#[derive(Clone, Debug)]
pub struct SnapshotInputs {
    /// True-sign masks, used for the history passed to later snapshots.
    pub masks: SignedMasks,
    /// All-ones masks on the edge support, used when predicting this
    /// snapshot's labels. Both halves are the same normalized adjacency.
    pub override_masks: SignedMasks,
    /// Self-looped normalized adjacency for group assignment.
    pub looped: Arc<CsrMatrix>,
    pub motifs: Option<Arc<SparseStack>>,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub labels: Vec<usize>,
}

impl SnapshotInputs {
    pub fn num_edges(&self) -> usize {
        self.labels.len()
    }
}

/// Everything a forward pass reads, derived once from a series.
#[derive(Clone, Debug)]
pub struct ModelInputs {
    pub features: Matrix,
    pub snapshots: Vec<SnapshotInputs>,
    /// Normalized positive / negative unions of the training snapshots.
    pub union_pos: Arc<CsrMatrix>,
    pub union_neg: Arc<CsrMatrix>,
    /// Self-looped normalized training union, for the static baseline.
    pub union_looped: Arc<CsrMatrix>,
}

impl ModelInputs {
    /// `motifs` is read only when given; pass `None` for variants without
    /// the motif path.
    pub fn new(series: &SnapshotSeries, features: &NodeFeatures, motifs: Option<&MotifSeries>) -> Result<Self> {
        let n = series.num_nodes();
        if features.matrix.rows() != n {
            return Err(Error::shape(
                "model_inputs",
                format!("{} feature rows for {n} nodes", features.matrix.rows()),
            ));
        }
        if let Some(m) = motifs {
            if m.len() != series.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} motif slices for {} snapshots",
                    m.len(),
                    series.len()
                )));
            }
        }
        let mut snapshots = Vec::with_capacity(series.len());
        for (t, snap) in series.snapshots.iter().enumerate() {
            let stack = match motifs {
                Some(m) => {
                    let slice = m.slice(t);
                    let aligned = slice.num_nodes() == n
                        && slice.edges().len() == snap.edges().len()
                        && slice.edges().iter().zip(snap.edges()).all(|(&(u, v), e)| u == e.u && v == e.v);
                    if !aligned {
                        return Err(Error::InvalidArgument(format!(
                            "motif slice {t} does not match snapshot edges"
                        )));
                    }
                    Some(Arc::new(slice.stack()))
                }
                None => None,
            };
            snapshots.push(SnapshotInputs {
                masks: SignedMasks::from_snapshot(snap),
                override_masks: test_time_sign_override(snap),
                looped: Arc::new(snap.adjacency().sym_normalized(true)),
                motifs: stack,
                sources: snap.edges().iter().map(|e| e.u).collect(),
                targets: snap.edges().iter().map(|e| e.v).collect(),
                labels: snap.labels(),
            });
        }
        let (pos, neg) = series.signed_union(&series.split.train);
        let union = series.union_adjacency(&series.split.train);
        Ok(ModelInputs {
            features: features.matrix.clone(),
            snapshots,
            union_pos: Arc::new(pos.sym_normalized(false)),
            union_neg: Arc::new(neg.sym_normalized(false)),
            union_looped: Arc::new(union.sym_normalized(true)),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn has_motifs(&self) -> bool {
        self.snapshots.iter().all(|s| s.motifs.is_some())
    }
}
