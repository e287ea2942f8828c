use super::{checked_count, EdgeCounts, MotifKind, MotifSlice, NUM_MOTIFS};
use crate::graph::UndirectedGraph;
use crate::{Error, Result};

/// Largest number of non-isolated nodes the enumeration accepts.
pub const BRUTEFORCE_MAX_NODES: usize = 64;

/// Reference counter: enumerates every 3- and 4-node subset of the
/// non-isolated nodes, classifies the induced subgraph by edge count and
/// degree sequence, and credits each of its edges.
///
/// Isolated nodes belong to no graphlet, so only the non-isolated nodes are
/// enumerated; more than [`BRUTEFORCE_MAX_NODES`] of them is an error.
pub fn count_motifs_bruteforce(graph: &UndirectedGraph) -> Result<MotifSlice> {
    let active: Vec<usize> = (0..graph.num_nodes()).filter(|&v| graph.degree(v) > 0).collect();
    let n = active.len();
    if n > BRUTEFORCE_MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "brute-force graphlet counting supports at most {BRUTEFORCE_MAX_NODES} non-isolated nodes, got {n}"
        )));
    }
    let mut local = vec![usize::MAX; graph.num_nodes()];
    for (i, &v) in active.iter().enumerate() {
        local[v] = i;
    }
    let mut adj = vec![0u64; n];
    let mut edge_slot = vec![vec![usize::MAX; n]; n];
    for (k, &(u, v)) in graph.edges().iter().enumerate() {
        let (a, b) = (local[u], local[v]);
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
        edge_slot[a][b] = k;
        edge_slot[b][a] = k;
    }
    let linked = |a: usize, b: usize| adj[a] >> b & 1 == 1;
    let mut totals = vec![[0u64; NUM_MOTIFS]; graph.edges().len()];
    let mut credit = |nodes: &[usize], kind: MotifKind| {
        for (i, &a) in nodes.iter().enumerate() {
            for &b in &nodes[i + 1..] {
                if linked(a, b) {
                    totals[edge_slot[a][b]][kind.index()] += 1;
                }
            }
        }
    };

    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if let Some(kind) = classify(&[a, b, c], &linked) {
                    credit(&[a, b, c], kind);
                }
                for d in c + 1..n {
                    if let Some(kind) = classify(&[a, b, c, d], &linked) {
                        credit(&[a, b, c, d], kind);
                    }
                }
            }
        }
    }

    let counts = totals
        .iter()
        .zip(graph.edges())
        .map(|(t, &e)| {
            let mut out = [0u32; NUM_MOTIFS];
            for (o, &v) in out.iter_mut().zip(t) {
                *o = checked_count(v, e)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<EdgeCounts>>>()?;
    MotifSlice::new(graph.num_nodes(), graph.edges().to_vec(), counts)
}

/// Isomorphism class of the subgraph induced on `nodes`, or `None` when it is
/// disconnected.
fn classify(nodes: &[usize], linked: &impl Fn(usize, usize) -> bool) -> Option<MotifKind> {
    let mut degrees = [0usize; 4];
    let mut edges = 0;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if linked(nodes[i], nodes[j]) {
                degrees[i] += 1;
                degrees[j] += 1;
                edges += 1;
            }
        }
    }
    let degrees = &mut degrees[..nodes.len()];
    if degrees.contains(&0) {
        return None;
    }
    degrees.sort_unstable();
    match (nodes.len(), edges, &*degrees) {
        (3, 3, _) => Some(MotifKind::Triangle),
        (3, 2, _) => Some(MotifKind::TwoStar),
        (4, 6, _) => Some(MotifKind::FourClique),
        (4, 5, _) => Some(MotifKind::ChordalCycle),
        (4, 4, [2, 2, 2, 2]) => Some(MotifKind::FourCycle),
        (4, 4, [1, 2, 2, 3]) => Some(MotifKind::TailedTriangle),
        (4, 3, [1, 1, 1, 3]) => Some(MotifKind::ThreeStar),
        (4, 3, [1, 1, 2, 2]) => Some(MotifKind::FourPath),
        _ => None,
    }
}
