use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{count_motifs, count_motifs_bruteforce, BRUTEFORCE_MAX_NODES};
use crate::graph::UndirectedGraph;
use crate::{Error, Result};

/// Result of comparing [`count_motifs`] with the brute-force oracle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCheck {
    /// Non-isolated nodes of the graph that was compared.
    pub nodes_checked: usize,
    pub edges_checked: usize,
    /// Edges (in original labels) whose counts differ.
    pub mismatches: Vec<(usize, usize)>,
    /// True when the graph was larger than the budget and an induced
    /// neighbourhood was compared instead.
    pub sampled: bool,
}

/// Compares the fast counter with the oracle on `graph` when it has at
/// most `max_nodes` non-isolated nodes, and otherwise on the subgraph
/// induced by the first `max_nodes` nodes of a breadth-first search from
/// the highest-degree node.
pub fn oracle_check(graph: &UndirectedGraph, max_nodes: usize) -> Result<OracleCheck> {
    if max_nodes == 0 || max_nodes > BRUTEFORCE_MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "verification budget must be in 1..={BRUTEFORCE_MAX_NODES}, got {max_nodes}"
        )));
    }
    let active = (0..graph.num_nodes()).filter(|&v| graph.degree(v) > 0).count();
    let (target, labels, sampled) = if active <= max_nodes {
        (graph.clone(), (0..graph.num_nodes()).collect(), false)
    } else {
        let (sub, labels) = bfs_induced(graph, max_nodes)?;
        (sub, labels, true)
    };
    let fast = count_motifs(&target)?;
    let oracle = count_motifs_bruteforce(&target)?;
    let mismatches = fast
        .edges()
        .iter()
        .zip(fast.counts().iter().zip(oracle.counts()))
        .filter(|(_, (a, b))| a != b)
        .map(|(&(u, v), _)| (labels[u], labels[v]))
        .collect();
    Ok(OracleCheck {
        nodes_checked: (0..target.num_nodes()).filter(|&v| target.degree(v) > 0).count(),
        edges_checked: target.edges().len(),
        mismatches,
        sampled,
    })
}

fn bfs_induced(graph: &UndirectedGraph, k: usize) -> Result<(UndirectedGraph, Vec<usize>)> {
    let n = graph.num_nodes();
    let root = (0..n).max_by_key(|&v| (graph.degree(v), std::cmp::Reverse(v))).unwrap_or(0);
    let mut local = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(k);
    let mut queue = VecDeque::from([root]);
    local[root] = 0;
    order.push(root);
    while let Some(v) = queue.pop_front() {
        for &w in graph.neighbors(v) {
            if order.len() == k {
                break;
            }
            if local[w] == usize::MAX {
                local[w] = order.len();
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| local[u] != usize::MAX && local[v] != usize::MAX)
        .map(|&(u, v)| (local[u].min(local[v]), local[u].max(local[v])))
        .collect();
    edges.sort_unstable();
    Ok((UndirectedGraph::from_edges(order.len(), &edges)?, order))
}
