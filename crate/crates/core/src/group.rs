//! Latent-group global embeddings.
//!
//! Each node attends to `C` learned group embeddings. The raw attentions are
//! smoothed over the cross-time signed graph, mapped to per-snapshot
//! assignment probability matrices (APM, row-stochastic `N x C`), and the
//! global embedding `Z_t` is a sigmoid-weighted running average of
//! `APM_t · Z_ini`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::params::{glorot, Bound, ParamStore};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

pub const Z_INI: &str = "group.z_ini";
pub const MLP_HIDDEN: &str = "group.mlp_hidden";
pub const MLP_BIAS: &str = "group.mlp_bias";
pub const MLP_OUT: &str = "group.mlp_out";
pub const AGG0: &str = "group.agg0";
pub const AGG1: &str = "group.agg1";
pub const W1: &str = "group.w1";
pub const W2: &str = "group.w2";

/// Adds the group parameters to `store`.
///
/// Shapes: `Z_ini` is `C x d`; the MLP maps `d0 -> d -> d` with one ReLU
/// hidden layer; the two aggregation weights are `C x C`; `W1` is `2C x C`;
/// `W2` is a raw `1 x 1` scalar squashed by a sigmoid when used.
pub fn init_group_params(
    store: &mut ParamStore,
    groups: usize,
    input_dim: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if groups < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 groups, got {groups}")));
    }
    if input_dim == 0 || dim == 0 {
        return Err(Error::InvalidArgument("group dimensions must be positive".into()));
    }
    store.insert(Z_INI, glorot(groups, dim, rng))?;
    store.insert(MLP_HIDDEN, glorot(input_dim, dim, rng))?;
    store.insert(MLP_BIAS, Matrix::zeros(1, dim))?;
    store.insert(MLP_OUT, glorot(dim, dim, rng))?;
    store.insert(AGG0, glorot(groups, groups, rng))?;
    store.insert(AGG1, glorot(groups, groups, rng))?;
    store.insert(W1, glorot(2 * groups, groups, rng))?;
    store.insert(W2, Matrix::scalar(0.0))?;
    Ok(())
}

/// Fresh group parameters drawn from `seed`.
pub fn init_group_state(groups: usize, input_dim: usize, dim: usize, seed: u64) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    init_group_params(&mut store, groups, input_dim, dim, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(store)
}

/// Tape handles of the group parameters.
#[derive(Clone, Copy, Debug)]
pub struct GroupVars {
    pub z_ini: Var,
    pub mlp_hidden: Var,
    pub mlp_bias: Var,
    pub mlp_out: Var,
    pub agg0: Var,
    pub agg1: Var,
    pub w1: Var,
    pub w2: Var,
}

impl GroupVars {
    pub fn from_bound(bound: &Bound) -> Result<Self> {
        Ok(GroupVars {
            z_ini: bound.var(Z_INI)?,
            mlp_hidden: bound.var(MLP_HIDDEN)?,
            mlp_bias: bound.var(MLP_BIAS)?,
            mlp_out: bound.var(MLP_OUT)?,
            agg0: bound.var(AGG0)?,
            agg1: bound.var(AGG1)?,
            w1: bound.var(W1)?,
            w2: bound.var(W2)?,
        })
    }
}

/// `Q0 = MLP(X) · Z_iniᵀ`, one attention score per node and group.
pub fn node_group_attention(tape: &mut Tape, x: Var, g: &GroupVars) -> Result<Var> {
    let h = tape.matmul(x, g.mlp_hidden)?;
    let h = tape.add_row(h, g.mlp_bias)?;
    let h = tape.relu(h)?;
    let projected = tape.matmul(h, g.mlp_out)?;
    tape.matmul_nt(projected, g.z_ini)
}

/// Two-layer aggregation of `Q0` over the positive and negative graphs with
/// shared weights, concatenated into `N x 2C`.
pub fn signed_attention_aggregate(
    tape: &mut Tape,
    q0: Var,
    positive: &Arc<CsrMatrix>,
    negative: &Arc<CsrMatrix>,
    g: &GroupVars,
) -> Result<Var> {
    let q0w = tape.matmul(q0, g.agg0)?;
    let mut halves = [q0w; 2];
    for (half, adj) in halves.iter_mut().zip([positive, negative]) {
        let hidden = tape.sparse_affine_relu(&[(Arc::clone(adj), q0w)], None)?;
        let hw = tape.matmul(hidden, g.agg1)?;
        *half = tape.spmm(adj, hw)?;
    }
    tape.concat_cols(&halves)
}

/// `APM_t = row_softmax(Â_t · Qp · W1)` for a normalized snapshot adjacency.
pub fn temporal_assignment(tape: &mut Tape, qp: Var, adjacency: &Arc<CsrMatrix>, g: &GroupVars) -> Result<Var> {
    let projected = tape.matmul(qp, g.w1)?;
    let spread = tape.spmm(adjacency, projected)?;
    tape.row_softmax(spread)
}

/// `Z_t = σ(W2) · APM_t · Z_ini + (1 − σ(W2)) · Z_{t−1}`, where a missing
/// history stands for `APM_t · Z_ini` itself.
pub fn global_embedding(tape: &mut Tape, apm: Var, g: &GroupVars, previous: Option<Var>) -> Result<Var> {
    let fresh = tape.matmul(apm, g.z_ini)?;
    let weight = tape.sigmoid(g.w2)?;
    tape.blend(weight, fresh, None, previous.unwrap_or(fresh))
}

/// Largest deviation of an APM row sum from one, or infinity if any entry is
/// negative.
pub fn row_stochastic_deviation(apm: &Matrix) -> f64 {
    if apm.as_slice().iter().any(|&v| v < 0.0) {
        return f64::INFINITY;
    }
    (0..apm.rows())
        .map(|r| (apm.row(r).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(store: &ParamStore, tape: &mut Tape) -> GroupVars {
        GroupVars::from_bound(&store.record(tape).unwrap()).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_group_state(2, 3, 4, 7).unwrap();
        let b = init_group_state(2, 3, 4, 7).unwrap();
        assert_eq!(a, b);
        let z = a.get(Z_INI).unwrap();
        assert_eq!(z.shape(), (2, 4));
        assert_eq!(a.get(W1).unwrap().shape(), (4, 2));
        assert!(init_group_state(1, 3, 4, 7).is_err());
    }

    #[test]
    fn zero_projection_gives_zero_attention() {
        let mut store = init_group_state(3, 2, 4, 1).unwrap();
        *store.get_mut(MLP_OUT).unwrap() = Matrix::zeros(4, 4);
        let mut tape = Tape::new();
        let g = bind(&store, &mut tape);
        let x = tape.leaf(Matrix::filled(5, 2, 1.0)).unwrap();
        let q0 = node_group_attention(&mut tape, x, &g).unwrap();
        assert!(tape.value(q0).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_graphs_aggregate_to_zero() {
        let store = init_group_state(2, 2, 3, 1).unwrap();
        let mut tape = Tape::new();
        let g = bind(&store, &mut tape);
        let q0 = tape.leaf(Matrix::filled(4, 2, 0.3)).unwrap();
        let empty = Arc::new(CsrMatrix::zeros(4, 4));
        let qp = signed_attention_aggregate(&mut tape, q0, &empty, &empty, &g).unwrap();
        assert_eq!(tape.value(qp).shape(), (4, 4));
        assert!(tape.value(qp).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_scores_give_uniform_assignment() {
        let mut store = init_group_state(4, 2, 3, 1).unwrap();
        *store.get_mut(W1).unwrap() = Matrix::zeros(8, 4);
        let mut tape = Tape::new();
        let g = bind(&store, &mut tape);
        let qp = tape.leaf(Matrix::filled(3, 8, 2.0)).unwrap();
        let adj = Arc::new(CsrMatrix::identity(3));
        let apm = temporal_assignment(&mut tape, qp, &adj, &g).unwrap();
        assert!(tape.value(apm).as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn window_limits() {
        let mut store = init_group_state(2, 2, 3, 5).unwrap();
        let apm_rows = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]);
        for (raw, expect_fresh) in [(60.0, true), (-60.0, false)] {
            *store.get_mut(W2).unwrap() = Matrix::scalar(raw);
            let mut tape = Tape::new();
            let g = bind(&store, &mut tape);
            let apm = tape.leaf(apm_rows.clone()).unwrap();
            let prev = tape.leaf(Matrix::filled(3, 3, 0.7)).unwrap();
            let z = global_embedding(&mut tape, apm, &g, Some(prev)).unwrap();
            let fresh = apm_rows.matmul(store.get(Z_INI).unwrap()).unwrap();
            let target = if expect_fresh { fresh } else { Matrix::filled(3, 3, 0.7) };
            assert!(tape.value(z).max_abs_diff(&target) < 1e-12);
        }
    }

    #[test]
    fn deviation_flags_negative_entries() {
        assert_eq!(row_stochastic_deviation(&Matrix::from_rows(&[[0.5, 0.5]])), 0.0);
        assert!(row_stochastic_deviation(&Matrix::from_rows(&[[1.5, -0.5]])).is_infinite());
    }
}
