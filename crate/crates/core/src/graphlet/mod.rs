//! Per-edge graphlet counts.
//!
//! For every edge `(u, v)` of a snapshot we count the connected *induced*
//! subgraphs on three or four nodes that contain both endpoints, split by
//! isomorphism type. Three-node graphlets are the triangle and the 2-star
//! (induced path on three nodes); four-node graphlets are the 4-clique,
//! chordal cycle (diamond), tailed triangle (paw), 4-cycle, 3-star and
//! 4-path. An edge is credited regardless of which orbit it occupies.
//!
//! [`count_motifs`] is the fast path; [`count_motifs_bruteforce`] enumerates
//! node subsets directly and is the reference it is tested against.

mod bruteforce;
mod bundle;
mod fast;
mod verify;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bruteforce::{count_motifs_bruteforce, BRUTEFORCE_MAX_NODES};
pub use bundle::{
    count_series, read_motif_bundle, read_motif_manifest, write_motif_bundle, MotifManifest, MotifSliceEntry,
    MOTIF_MANIFEST,
};
pub use fast::count_motifs;
pub use verify::{oracle_check, OracleCheck};

use crate::sparse::{CsrMatrix, SparseStack};
use crate::{Error, Result};

pub const NUM_MOTIFS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotifKind {
    Triangle,
    TwoStar,
    FourClique,
    ChordalCycle,
    TailedTriangle,
    FourCycle,
    ThreeStar,
    FourPath,
}

impl MotifKind {
    pub const ALL: [MotifKind; NUM_MOTIFS] = [
        MotifKind::Triangle,
        MotifKind::TwoStar,
        MotifKind::FourClique,
        MotifKind::ChordalCycle,
        MotifKind::TailedTriangle,
        MotifKind::FourCycle,
        MotifKind::ThreeStar,
        MotifKind::FourPath,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MotifKind::Triangle => "triangle",
            MotifKind::TwoStar => "2-star",
            MotifKind::FourClique => "4-clique",
            MotifKind::ChordalCycle => "4-chordal-cycle",
            MotifKind::TailedTriangle => "4-tailed-triangle",
            MotifKind::FourCycle => "4-cycle",
            MotifKind::ThreeStar => "3-star",
            MotifKind::FourPath => "4-path",
        }
    }

    pub fn from_name(name: &str) -> Option<MotifKind> {
        MotifKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Graphlet counts of one edge, indexed by [`MotifKind::index`].
pub type EdgeCounts = [u32; NUM_MOTIFS];

/// Graphlet counts for every edge of one snapshot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotifSlice {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    counts: Vec<EdgeCounts>,
}

impl MotifSlice {
    /// `edges` must be sorted `(u, v)` pairs with `u < v`, aligned with `counts`.
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>, counts: Vec<EdgeCounts>) -> Result<Self> {
        if edges.len() != counts.len() {
            return Err(Error::InvalidArgument(format!(
                "{} edges but {} count rows",
                edges.len(),
                counts.len()
            )));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) || edges.iter().any(|&(u, v)| u >= v || v >= num_nodes) {
            return Err(Error::InvalidArgument("motif edges must be sorted (u < v) pairs".into()));
        }
        Ok(MotifSlice {
            num_nodes,
            edges,
            counts,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn counts(&self) -> &[EdgeCounts] {
        &self.counts
    }

    /// Counts for edge `{u, v}` in either orientation.
    pub fn edge_counts(&self, u: usize, v: usize) -> Option<&EdgeCounts> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok().map(|i| &self.counts[i])
    }

    pub fn count(&self, u: usize, v: usize, kind: MotifKind) -> u32 {
        self.edge_counts(u, v).map_or(0, |c| c[kind.index()])
    }

    /// Symmetric count matrix `M_{t,i}` for one graphlet type.
    pub fn matrix(&self, kind: MotifKind) -> CsrMatrix {
        let i = kind.index();
        let triplets: Vec<_> = self
            .edges
            .iter()
            .zip(&self.counts)
            .filter(|(_, c)| c[i] > 0)
            .flat_map(|(&(u, v), c)| [(u, v, c[i] as f64), (v, u, c[i] as f64)])
            .collect();
        CsrMatrix::from_triplets(self.num_nodes, self.num_nodes, &triplets).expect("edges in range")
    }

    /// All eight count matrices on one shared pattern.
    pub fn stack(&self) -> SparseStack {
        let layers: Vec<CsrMatrix> = MotifKind::ALL.iter().map(|&k| self.matrix(k)).collect();
        SparseStack::new(&layers).expect("eight square layers")
    }

    /// Weighted motif matrix `Σ_i alpha[i] · M_{t,i}`.
    pub fn combine(&self, alpha: &[f64; NUM_MOTIFS]) -> Result<CsrMatrix> {
        if let Some(bad) = alpha.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite motif weight {bad}")));
        }
        let triplets: Vec<_> = self
            .edges
            .iter()
            .zip(&self.counts)
            .flat_map(|(&(u, v), c)| {
                let w: f64 = c.iter().zip(alpha).map(|(&n, a)| n as f64 * a).sum();
                [(u, v, w), (v, u, w)]
            })
            .collect();
        CsrMatrix::from_triplets(self.num_nodes, self.num_nodes, &triplets)
    }
}

/// Motif slices for a whole snapshot series.
///
/// Reads through [`MotifSeries::slice`] and [`MotifSeries::stack`] are
/// counted so callers can check that a code path never touches motif data.
#[derive(Debug)]
pub struct MotifSeries {
    slices: Vec<MotifSlice>,
    reads: AtomicUsize,
}

impl MotifSeries {
    pub fn new(slices: Vec<MotifSlice>) -> Self {
        MotifSeries {
            slices,
            reads: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice(&self, t: usize) -> &MotifSlice {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.slices[t]
    }

    pub fn stack(&self, t: usize) -> Arc<SparseStack> {
        Arc::new(self.slice(t).stack())
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn into_slices(self) -> Vec<MotifSlice> {
        self.slices
    }
}

impl PartialEq for MotifSeries {
    fn eq(&self, other: &Self) -> bool {
        self.slices == other.slices
    }
}

fn checked_count(value: u64, edge: (usize, usize)) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::CountOverflow(edge.0, edge.1))
}
