use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::data::Snapshot;
use crate::sparse::{CsrMatrix, SparseStack};
use crate::Result;

/// Inverted dropout in training, identity otherwise.
pub struct Dropout<'r> {
    rate: f64,
    rng: Option<&'r mut ChaCha8Rng>,
}

impl<'r> Dropout<'r> {
    pub fn off() -> Self {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn train(rate: f64, rng: &'r mut ChaCha8Rng) -> Self {
        Dropout { rate, rng: Some(rng) }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self.rng.as_deref_mut() {
            Some(rng) => tape.dropout(x, self.rate, true, rng),
            None => Ok(x),
        }
    }
}

/// Normalized positive and negative aggregation matrices of one snapshot.
#[derive(Clone, Debug)]
pub struct SignedMasks {
    pub positive: Arc<CsrMatrix>,
    pub negative: Arc<CsrMatrix>,
}

impl SignedMasks {
    /// `D^{-1/2} (S ⊙ A) D^{-1/2}` for each sign, degrees taken within the
    /// mask; nodes without edges of a sign get an empty row.
    pub fn from_snapshot(snapshot: &Snapshot) -> Self {
        SignedMasks {
            positive: Arc::new(snapshot.sign_pos().sym_normalized(false)),
            negative: Arc::new(snapshot.sign_neg().sym_normalized(false)),
        }
    }
}

/// Masks for the snapshot whose labels are being predicted: both signs are
/// replaced by the whole edge support.
pub fn test_time_sign_override(snapshot: &Snapshot) -> SignedMasks {
    let full = Arc::new(snapshot.adjacency().sym_normalized(false));
    SignedMasks {
        positive: Arc::clone(&full),
        negative: full,
    }
}

/// History embeddings multiplied by both aggregation weights.
#[derive(Clone, Copy, Debug)]
pub struct Projected {
    pub pos_w3: Var,
    pub pos_w4: Var,
    pub neg_w3: Var,
    pub neg_w4: Var,
}

pub fn project_history(tape: &mut Tape, dy_pos: Var, dy_neg: Var, w3: Var, w4: Var) -> Result<Projected> {
    Ok(Projected {
        pos_w3: tape.matmul(dy_pos, w3)?,
        pos_w4: tape.matmul(dy_pos, w4)?,
        neg_w3: tape.matmul(dy_neg, w3)?,
        neg_w4: tape.matmul(dy_neg, w4)?,
    })
}

/// Signed graph embeddings:
///
/// ```text
/// G⁺ = relu(P · Dy⁺ W3 + N · Dy⁻ W4 + b⁺)
/// G⁻ = relu(N · Dy⁻ W3 + P · Dy⁺ W4 + b⁻)
/// ```
pub fn graph_embed(
    tape: &mut Tape,
    masks: &SignedMasks,
    history: &Projected,
    b_pos: Var,
    b_neg: Var,
) -> Result<(Var, Var)> {
    let (p, n) = (&masks.positive, &masks.negative);
    let pos = tape.sparse_affine_relu(
        &[(Arc::clone(p), history.pos_w3), (Arc::clone(n), history.neg_w4)],
        Some(b_pos),
    )?;
    let neg = tape.sparse_affine_relu(
        &[(Arc::clone(n), history.neg_w3), (Arc::clone(p), history.pos_w4)],
        Some(b_neg),
    )?;
    Ok((pos, neg))
}

/// Two-layer GCN over the motif matrix `Σ α_i M_i` with self-loops and
/// symmetric normalization. `xw0` is `X · W0` for the first layer.
pub fn motif_embed(
    tape: &mut Tape,
    alpha: Var,
    stack: &Arc<SparseStack>,
    xw0: Var,
    w1: Var,
    dropout: &mut Dropout<'_>,
) -> Result<Var> {
    let h = tape.stack_aggregate(alpha, stack, xw0)?;
    let h = tape.relu(h)?;
    let h = dropout.apply(tape, h)?;
    let h = tape.matmul(h, w1)?;
    let h = tape.stack_aggregate(alpha, stack, h)?;
    let h = tape.relu(h)?;
    dropout.apply(tape, h)
}

/// `Dy_t = w5 · (graph + β · motif) + (1 − w5) · Dy_{t−1}` for a squashed
/// `1 x 1` weight `w5`.
pub fn dynamic_embed(tape: &mut Tape, w5: Var, graph: Var, motif: Option<(Var, f64)>, previous: Var) -> Result<Var> {
    tape.blend(w5, graph, motif, previous)
}

/// Column concatenation `[Dy⁺ ‖ Dy⁻ ‖ Z]` (any subset, in order).
pub fn final_embed(tape: &mut Tape, parts: &[Var]) -> Result<Var> {
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    tape.concat_cols(parts)
}

/// Logits `[Emb[u] ‖ Emb[v]] · W + b` for each edge.
pub fn predict_edges(
    tape: &mut Tape,
    emb: Var,
    sources: &[usize],
    targets: &[usize],
    weight: Var,
    bias: Var,
) -> Result<Var> {
    let u = tape.gather_rows(emb, sources)?;
    let v = tape.gather_rows(emb, targets)?;
    let link = tape.concat_cols(&[u, v])?;
    let logits = tape.matmul(link, weight)?;
    tape.add_row(logits, bias)
}

/// Row-softmax probabilities of a logit matrix.
pub fn probabilities(logits: &Matrix) -> Matrix {
    crate::autodiff::row_softmax_of(logits)
}

/// Probability of the anomalous class (column 1) per edge.
pub fn anomaly_scores(logits: &Matrix) -> Vec<f64> {
    let p = probabilities(logits);
    (0..p.rows()).map(|r| p.get(r, 1)).collect()
}
