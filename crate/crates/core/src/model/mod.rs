//! Per-snapshot node embeddings and the edge classifier.
//!
//! For each snapshot `t` the model keeps positive and negative dynamic
//! embeddings `Dy⁺_t`, `Dy⁻_t`. Signed aggregation of the previous dynamic
//! embeddings over `t`'s graph, plus a motif-weighted GCN term, is blended
//! into the running average. The final node embedding concatenates both
//! dynamic embeddings with the group-based global embedding `Z_t`, and edges
//! are classified from the concatenated endpoint embeddings.
//!
//! Labels of snapshot `t` are predicted from embeddings whose last
//! aggregation step ignores `t`'s signs (both masks become the edge support);
//! the history handed to `t + 1` uses the true signs.

mod inputs;
mod layers;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use inputs::{ModelInputs, SnapshotInputs};
pub use layers::{
    anomaly_scores, dynamic_embed, final_embed, graph_embed, motif_embed, predict_edges, probabilities,
    project_history, test_time_sign_override, Dropout, Projected, SignedMasks,
};

use crate::autodiff::{Matrix, Tape, Var};
use crate::graphlet::NUM_MOTIFS;
use crate::group::{self, GroupVars};
use crate::params::{glorot, Bound, ParamStore};
use crate::{Error, Result};

pub const INPUT_PROJ: &str = "input_proj";
pub const W3: &str = "w3";
pub const W4: &str = "w4";
pub const B_POS: &str = "b_pos";
pub const B_NEG: &str = "b_neg";
pub const W5: &str = "w5";
pub const ALPHA: &str = "alpha";
pub const MOTIF_W0: &str = "motif.w0";
pub const MOTIF_W1: &str = "motif.w1";
pub const GCN_W0: &str = "gcn.w0";
pub const GCN_W1: &str = "gcn.w1";
pub const CLS_W: &str = "cls.w";
pub const CLS_B: &str = "cls.b";

/// Components switched off for ablation studies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub no_motif: bool,
    pub no_sign: bool,
    pub no_global: bool,
}

impl Ablation {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.no_motif {
            parts.push("-motif");
        }
        if self.no_sign {
            parts.push("-sign");
        }
        if self.no_global {
            parts.push("-global");
        }
        if parts.is_empty() {
            "full".into()
        } else {
            parts.join(" ")
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// The temporal signed model.
    #[default]
    MgsTgcn,
    /// Static two-layer GCN on the training union graph.
    Gcn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::MgsTgcn => "mgs-tgcn",
            ModelKind::Gcn => "gcn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mgs-tgcn" => Ok(ModelKind::MgsTgcn),
            "gcn" => Ok(ModelKind::Gcn),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Node feature width `d0`.
    pub input_dim: usize,
    /// Embedding width `d`.
    pub emb_dim: usize,
    /// Number of latent groups `C`.
    pub groups: usize,
    /// Fixed motif weight in the dynamic update.
    pub beta: f64,
    pub dropout: f64,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::MgsTgcn,
            input_dim: crate::data::RAW_FEATURES,
            emb_dim: 200,
            groups: 10,
            beta: 0.35,
            dropout: 0.2,
            ablation: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.input_dim == 0 || self.emb_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite".into());
        }
        if self.uses_global() && self.groups < 2 {
            return bad(format!("need at least 2 groups, got {}", self.groups));
        }
        Ok(())
    }

    pub fn uses_motifs(&self) -> bool {
        self.kind == ModelKind::MgsTgcn && !self.ablation.no_motif
    }

    pub fn uses_signs(&self) -> bool {
        self.kind == ModelKind::MgsTgcn && !self.ablation.no_sign
    }

    pub fn uses_global(&self) -> bool {
        self.kind == ModelKind::MgsTgcn && !self.ablation.no_global
    }

    /// Width of the node embedding fed to the classifier.
    pub fn embedding_dim(&self) -> usize {
        match self.kind {
            ModelKind::Gcn => self.emb_dim,
            ModelKind::MgsTgcn => {
                let dynamic = if self.uses_signs() { 2 } else { 1 };
                let global = usize::from(self.uses_global());
                (dynamic + global) * self.emb_dim
            }
        }
    }
}

/// Recorded outputs of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Forward {
    /// Edge logits per snapshot (`None` for snapshots without edges or past
    /// the unrolled range).
    pub logits: Vec<Option<Var>>,
    /// Final node embedding per unrolled snapshot.
    pub embeddings: Vec<Var>,
    /// Group assignment matrix per unrolled snapshot (empty without the
    /// global path).
    pub assignments: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    /// Glorot-initialized parameters drawn from `seed`. Biases, raw mixing
    /// scalars and the classifier start at zero (so initial predictions are
    /// uniform), motif weights at `1/8`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d0, d) = (config.input_dim, config.emb_dim);
        let mut p = ParamStore::new();
        match config.kind {
            ModelKind::Gcn => {
                p.insert(GCN_W0, glorot(d0, d, &mut rng))?;
                p.insert(GCN_W1, glorot(d, d, &mut rng))?;
            }
            ModelKind::MgsTgcn => {
                p.insert(INPUT_PROJ, glorot(d0, d, &mut rng))?;
                p.insert(W3, glorot(d, d, &mut rng))?;
                if config.uses_signs() {
                    p.insert(W4, glorot(d, d, &mut rng))?;
                }
                p.insert(B_POS, Matrix::zeros(1, d))?;
                if config.uses_signs() {
                    p.insert(B_NEG, Matrix::zeros(1, d))?;
                }
                p.insert(W5, Matrix::scalar(0.0))?;
                if config.uses_motifs() {
                    p.insert(ALPHA, Matrix::filled(1, NUM_MOTIFS, 1.0 / NUM_MOTIFS as f64))?;
                    p.insert(MOTIF_W0, glorot(d0, d, &mut rng))?;
                    p.insert(MOTIF_W1, glorot(d, d, &mut rng))?;
                }
                if config.uses_global() {
                    group::init_group_params(&mut p, config.groups, d0, d, &mut rng)?;
                }
            }
        }
        let e = config.embedding_dim();
        p.insert(CLS_W, Matrix::zeros(2 * e, 2))?;
        p.insert(CLS_B, Matrix::zeros(1, 2))?;
        Ok(Model { config, params: p })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let template = Model::new(config.clone(), 0)?;
        if template.params.names() != params.names() {
            return Err(Error::InvalidArgument("parameter names do not match the model".into()));
        }
        for ((name, a), b) in params.names().iter().zip(template.params.values()).zip(params.values()) {
            if a.shape() != b.shape() {
                return Err(Error::shape(
                    "from_params",
                    format!("{name}: {:?} vs {:?}", b.shape(), a.shape()),
                ));
            }
        }
        Ok(Model { config, params })
    }

    /// Unrolls snapshots `0..=last` and returns logits for each of them.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        inputs: &ModelInputs,
        last: usize,
        dropout: &mut Dropout<'_>,
    ) -> Result<Forward> {
        if last >= inputs.snapshots.len() {
            return Err(Error::InvalidArgument(format!(
                "snapshot {last} out of range ({} snapshots)",
                inputs.snapshots.len()
            )));
        }
        match self.config.kind {
            ModelKind::Gcn => self.forward_gcn(tape, bound, inputs, last, dropout),
            ModelKind::MgsTgcn => self.forward_temporal(tape, bound, inputs, last, dropout),
        }
    }

    fn forward_temporal(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        inputs: &ModelInputs,
        last: usize,
        dropout: &mut Dropout<'_>,
    ) -> Result<Forward> {
        let cfg = &self.config;
        if cfg.uses_motifs() && !inputs.has_motifs() {
            return Err(Error::InvalidArgument("model needs motif counts".into()));
        }
        let x = tape.leaf(inputs.features.clone())?;
        let w3 = bound.var(W3)?;
        let b_pos = bound.var(B_POS)?;
        let (cls_w, cls_b) = (bound.var(CLS_W)?, bound.var(CLS_B)?);
        let w5_raw = bound.var(W5)?;
        let w5 = tape.sigmoid(w5_raw)?;

        let dy0 = tape.matmul(x, bound.var(INPUT_PROJ)?)?;
        let mut dy_pos = dy0;
        let mut dy_neg = dy0;
        let signed = if cfg.uses_signs() {
            Some((bound.var(W4)?, bound.var(B_NEG)?))
        } else {
            None
        };

        let motif = if cfg.uses_motifs() {
            let xw0 = tape.matmul(x, bound.var(MOTIF_W0)?)?;
            Some((bound.var(ALPHA)?, xw0, bound.var(MOTIF_W1)?))
        } else {
            None
        };

        let global = if cfg.uses_global() {
            let g = GroupVars::from_bound(bound)?;
            let q0 = group::node_group_attention(tape, x, &g)?;
            let qp = group::signed_attention_aggregate(tape, q0, &inputs.union_pos, &inputs.union_neg, &g)?;
            Some((g, qp))
        } else {
            None
        };

        let mut out = Forward::default();
        let mut z_prev = None;
        for snap in &inputs.snapshots[..=last] {
            let motif_term = match motif {
                Some((alpha, xw0, w1m)) => {
                    let stack = snap.motifs.as_ref().expect("checked above");
                    Some((motif_embed(tape, alpha, stack, xw0, w1m, dropout)?, cfg.beta))
                }
                None => None,
            };
            let has_edges = snap.num_edges() > 0;

            let mut parts = Vec::with_capacity(3);
            match signed {
                Some((w4, b_neg)) => {
                    let history = project_history(tape, dy_pos, dy_neg, w3, w4)?;
                    if has_edges {
                        let (gp, gn) = graph_embed(tape, &snap.override_masks, &history, b_pos, b_neg)?;
                        let gp = dropout.apply(tape, gp)?;
                        let gn = dropout.apply(tape, gn)?;
                        parts.push(dynamic_embed(tape, w5, gp, motif_term, dy_pos)?);
                        parts.push(dynamic_embed(tape, w5, gn, motif_term, dy_neg)?);
                    }
                    let (gp, gn) = graph_embed(tape, &snap.masks, &history, b_pos, b_neg)?;
                    let gp = dropout.apply(tape, gp)?;
                    let gn = dropout.apply(tape, gn)?;
                    dy_pos = dynamic_embed(tape, w5, gp, motif_term, dy_pos)?;
                    dy_neg = dynamic_embed(tape, w5, gn, motif_term, dy_neg)?;
                    if !has_edges {
                        parts.extend([dy_pos, dy_neg]);
                    }
                }
                None => {
                    // Sign-free: one aggregation over the whole support.
                    let yw = tape.matmul(dy_pos, w3)?;
                    let full = std::sync::Arc::clone(&snap.override_masks.positive);
                    let g = tape.sparse_affine_relu(&[(full, yw)], Some(b_pos))?;
                    let g = dropout.apply(tape, g)?;
                    dy_pos = dynamic_embed(tape, w5, g, motif_term, dy_pos)?;
                    parts.push(dy_pos);
                }
            }

            if let Some((g, qp)) = &global {
                let apm = group::temporal_assignment(tape, *qp, &snap.looped, g)?;
                let z = group::global_embedding(tape, apm, g, z_prev)?;
                z_prev = Some(z);
                out.assignments.push(apm);
                parts.push(z);
            }

            let emb = final_embed(tape, &parts)?;
            out.embeddings.push(emb);
            out.logits.push(if has_edges {
                Some(predict_edges(tape, emb, &snap.sources, &snap.targets, cls_w, cls_b)?)
            } else {
                None
            });
        }
        Ok(out)
    }

    fn forward_gcn(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        inputs: &ModelInputs,
        last: usize,
        dropout: &mut Dropout<'_>,
    ) -> Result<Forward> {
        let x = tape.leaf(inputs.features.clone())?;
        let xw = tape.matmul(x, bound.var(GCN_W0)?)?;
        let adj = &inputs.union_looped;
        let h = tape.sparse_affine_relu(&[(std::sync::Arc::clone(adj), xw)], None)?;
        let h = dropout.apply(tape, h)?;
        let hw = tape.matmul(h, bound.var(GCN_W1)?)?;
        let emb = tape.spmm(adj, hw)?;
        let (cls_w, cls_b) = (bound.var(CLS_W)?, bound.var(CLS_B)?);
        let mut out = Forward::default();
        for snap in &inputs.snapshots[..=last] {
            out.embeddings.push(emb);
            out.logits.push(if snap.num_edges() > 0 {
                Some(predict_edges(tape, emb, &snap.sources, &snap.targets, cls_w, cls_b)?)
            } else {
                None
            });
        }
        Ok(out)
    }
}
