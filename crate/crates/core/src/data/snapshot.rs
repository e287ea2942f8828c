use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::events::RatingEvent;
use crate::graph::UndirectedGraph;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Edge class. Anomalous edges are those whose summed rating within a
/// snapshot is negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Normal,
    Anomalous,
}

impl EdgeLabel {
    /// Class index used by the classifier; anomalous is the positive class.
    pub fn class_index(self) -> usize {
        match self {
            EdgeLabel::Normal => 0,
            EdgeLabel::Anomalous => 1,
        }
    }
}

/// Undirected edge of one snapshot, `u < v`, carrying the sum of all ratings
/// exchanged between the two nodes in that snapshot (both directions).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledEdge {
    pub u: usize,
    pub v: usize,
    pub rating_sum: i32,
}

impl LabeledEdge {
    /// Positive iff the summed rating is strictly positive; a zero sum counts
    /// as negative.
    pub fn is_positive(&self) -> bool {
        self.rating_sum > 0
    }

    pub fn label(&self) -> EdgeLabel {
        if self.rating_sum < 0 {
            EdgeLabel::Anomalous
        } else {
            EdgeLabel::Normal
        }
    }
}

/// A single directed rating, with node ids already remapped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedRating {
    pub source: usize,
    pub target: usize,
    pub rating: i8,
}

/// Graph of one time bin: unit-weight symmetric adjacency plus disjoint
/// positive / negative masks covering its support.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// First timestamp covered (inclusive).
    pub start: i64,
    /// End of the covered window (exclusive).
    pub end: i64,
    edges: Vec<LabeledEdge>,
    ratings: Vec<DirectedRating>,
    adjacency: CsrMatrix,
    sign_pos: CsrMatrix,
    sign_neg: CsrMatrix,
}

impl Snapshot {
    /// Builds the sparse structures from sorted, deduplicated edges.
    pub fn from_parts(
        num_nodes: usize,
        start: i64,
        end: i64,
        edges: Vec<LabeledEdge>,
        mut ratings: Vec<DirectedRating>,
    ) -> Result<Self> {
        if edges.windows(2).any(|w| (w[0].u, w[0].v) >= (w[1].u, w[1].v))
            || edges.iter().any(|e| e.u >= e.v || e.v >= num_nodes)
        {
            return Err(Error::InvalidArgument(
                "snapshot edges must be sorted, unique (u < v) pairs within range".into(),
            ));
        }
        if ratings.iter().any(|r| r.source >= num_nodes || r.target >= num_nodes) {
            return Err(Error::InvalidArgument("rating references unknown node".into()));
        }
        ratings.sort_unstable();
        let mut all = Vec::with_capacity(edges.len() * 2);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for e in &edges {
            all.extend([(e.u, e.v, 1.0), (e.v, e.u, 1.0)]);
            let mask = if e.is_positive() { &mut pos } else { &mut neg };
            mask.extend([(e.u, e.v, 1.0), (e.v, e.u, 1.0)]);
        }
        Ok(Snapshot {
            start,
            end,
            adjacency: CsrMatrix::from_triplets(num_nodes, num_nodes, &all)?,
            sign_pos: CsrMatrix::from_triplets(num_nodes, num_nodes, &pos)?,
            sign_neg: CsrMatrix::from_triplets(num_nodes, num_nodes, &neg)?,
            edges,
            ratings,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn edges(&self) -> &[LabeledEdge] {
        &self.edges
    }

    pub fn ratings(&self) -> &[DirectedRating] {
        &self.ratings
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// `S⁺ ⊙ A`: unit entries on positive edges.
    pub fn sign_pos(&self) -> &CsrMatrix {
        &self.sign_pos
    }

    /// `S⁻ ⊙ A`: unit (magnitude) entries on negative edges.
    pub fn sign_neg(&self) -> &CsrMatrix {
        &self.sign_neg
    }

    pub fn graph(&self) -> UndirectedGraph {
        let pairs: Vec<_> = self.edges.iter().map(|e| (e.u, e.v)).collect();
        UndirectedGraph::from_edges(self.num_nodes(), &pairs).expect("validated edges")
    }

    /// Class indices aligned with [`Snapshot::edges`].
    pub fn labels(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.label().class_index()).collect()
    }

    pub fn num_anomalous(&self) -> usize {
        self.edges.iter().filter(|e| e.label() == EdgeLabel::Anomalous).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    EqualTime,
    #[default]
    EqualEdges,
}

impl fmt::Display for Binning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binning::EqualTime => "equal-time",
            Binning::EqualEdges => "equal-edges",
        })
    }
}

impl FromStr for Binning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-time" => Ok(Binning::EqualTime),
            "equal-edges" => Ok(Binning::EqualEdges),
            other => Err(Error::InvalidArgument(format!(
                "unknown binning `{other}` (expected equal-time or equal-edges)"
            ))),
        }
    }
}

/// Number of consecutive snapshots in each chronological split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 8,
            valid: 1,
            test: 3,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("split `{s}` is not three integers")))?;
        match parts[..] {
            [train, valid, test] => Ok(SplitSpec { train, valid, test }),
            _ => Err(Error::InvalidArgument(format!("split `{s}` needs exactly three parts"))),
        }
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.valid, self.test)
    }
}

/// Snapshot indices of each split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn from_spec(spec: SplitSpec) -> Self {
        let t = spec.train;
        let v = t + spec.valid;
        Split {
            train: (0..t).collect(),
            valid: (t..v).collect(),
            test: (v..v + spec.test).collect(),
        }
    }
}

/// Snapshots over one fixed node universe.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    /// Dataset id of each contiguous node index.
    pub node_ids: Vec<u64>,
    pub binning: Binning,
    pub snapshots: Vec<Snapshot>,
    pub split: Split,
}

impl SnapshotSeries {
    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn total_edges(&self) -> usize {
        self.snapshots.iter().map(|s| s.edges().len()).sum()
    }

    /// Edges per split, in split order (train, valid, test).
    pub fn split_edge_counts(&self) -> [usize; 3] {
        let count = |ids: &[usize]| ids.iter().map(|&t| self.snapshots[t].edges().len()).sum();
        [count(&self.split.train), count(&self.split.valid), count(&self.split.test)]
    }

    /// Union of the given snapshots' masks: an undirected pair is positive
    /// when its ratings over those snapshots sum to a positive value.
    pub fn signed_union(&self, snapshots: &[usize]) -> (CsrMatrix, CsrMatrix) {
        let mut sums: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for &t in snapshots {
            for e in self.snapshots[t].edges() {
                *sums.entry((e.u, e.v)).or_default() += e.rating_sum as i64;
            }
        }
        let n = self.num_nodes();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (&(u, v), &s) in &sums {
            let mask = if s > 0 { &mut pos } else { &mut neg };
            mask.extend([(u, v, 1.0), (v, u, 1.0)]);
        }
        (
            CsrMatrix::from_triplets(n, n, &pos).expect("in range"),
            CsrMatrix::from_triplets(n, n, &neg).expect("in range"),
        )
    }

    /// Unit-weight undirected union of the given snapshots.
    pub fn union_adjacency(&self, snapshots: &[usize]) -> CsrMatrix {
        let n = self.num_nodes();
        let triplets: Vec<_> = snapshots
            .iter()
            .flat_map(|&t| self.snapshots[t].edges())
            .flat_map(|e| [(e.u, e.v, 1.0), (e.v, e.u, 1.0)])
            .collect();
        CsrMatrix::from_triplets(n, n, &triplets).expect("in range").support()
    }
}

/// Bins events into `num_snapshots` consecutive snapshots.
///
/// Node ids are remapped to `0..N` in increasing dataset-id order, so the
/// result does not depend on input row order beyond the timestamp sort.
/// Events sharing a timestamp never straddle two snapshots.
pub fn build_snapshots(
    events: &[RatingEvent],
    num_snapshots: usize,
    binning: Binning,
    split: SplitSpec,
) -> Result<SnapshotSeries> {
    if num_snapshots < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 snapshots, got {num_snapshots}"
        )));
    }
    if events.is_empty() {
        return Err(Error::InvalidArgument("no rating events".into()));
    }
    if split.total() != num_snapshots || split.train == 0 {
        return Err(Error::InvalidArgument(format!(
            "split {split} does not cover {num_snapshots} snapshots with a non-empty train part"
        )));
    }
    let mut events = events.to_vec();
    events.sort_by_key(|e| e.timestamp);

    let mut node_ids: Vec<u64> = events.iter().flat_map(|e| [e.source, e.target]).collect();
    node_ids.sort_unstable();
    node_ids.dedup();
    let index_of = |id: u64| node_ids.binary_search(&id).expect("known id");

    let starts = match binning {
        Binning::EqualEdges => equal_edge_starts(&events, num_snapshots)?,
        Binning::EqualTime => equal_time_starts(&events, num_snapshots)?,
    };
    let last = events.last().expect("non-empty").timestamp;

    let mut snapshots = Vec::with_capacity(num_snapshots);
    for k in 0..num_snapshots {
        let lo = starts[k];
        let hi = starts.get(k + 1).copied().unwrap_or(last + 1);
        let first = events.partition_point(|e| e.timestamp < lo);
        let end = events.partition_point(|e| e.timestamp < hi);
        let mut sums: BTreeMap<(usize, usize), i32> = BTreeMap::new();
        let mut ratings = Vec::with_capacity(end - first);
        for e in &events[first..end] {
            let (s, t) = (index_of(e.source), index_of(e.target));
            *sums.entry((s.min(t), s.max(t))).or_default() += e.rating as i32;
            ratings.push(DirectedRating {
                source: s,
                target: t,
                rating: e.rating,
            });
        }
        let edges = sums
            .into_iter()
            .map(|((u, v), rating_sum)| LabeledEdge { u, v, rating_sum })
            .collect();
        snapshots.push(Snapshot::from_parts(node_ids.len(), lo, hi, edges, ratings)?);
    }
    Ok(SnapshotSeries {
        node_ids,
        binning,
        snapshots,
        split: Split::from_spec(split),
    })
}

/// First timestamp of each bin so that bins hold about `n / k` events each.
fn equal_edge_starts(events: &[RatingEvent], k: usize) -> Result<Vec<i64>> {
    let n = events.len();
    let mut starts = vec![events[0].timestamp];
    let mut prev = 0;
    for b in 1..k {
        let mut idx = ((b as f64 * n as f64) / k as f64).round() as usize;
        idx = idx.max(prev + 1);
        while idx < n && events[idx].timestamp == events[idx - 1].timestamp {
            idx += 1;
        }
        if idx >= n {
            return Err(Error::InvalidArgument(format!(
                "cannot split {n} events into {k} non-empty equal-edge bins"
            )));
        }
        starts.push(events[idx].timestamp);
        prev = idx;
    }
    Ok(starts)
}

/// Equal-width windows over `[t_min, t_max]`.
fn equal_time_starts(events: &[RatingEvent], k: usize) -> Result<Vec<i64>> {
    let mut distinct = events.iter().map(|e| e.timestamp).collect::<Vec<_>>();
    distinct.dedup();
    if k > distinct.len() {
        return Err(Error::InvalidArgument(format!(
            "{k} equal-time snapshots requested but only {} distinct timestamps",
            distinct.len()
        )));
    }
    let t_min = events[0].timestamp as i128;
    let span = events[events.len() - 1].timestamp as i128 - t_min + 1;
    Ok((0..k)
        .map(|b| {
            let offset = (b as i128 * span + k as i128 - 1) / k as i128;
            (t_min + offset) as i64
        })
        .collect())
}
