use rayon::prelude::*;

use super::{checked_count, EdgeCounts, MotifKind, MotifSlice, NUM_MOTIFS};
use crate::graph::UndirectedGraph;
use crate::Result;

// Neighbor classes relative to the edge being counted.
const NONE: u8 = 0;
const ONLY_U: u8 = 1;
const ONLY_V: u8 = 2;
const BOTH: u8 = 3;
const ENDPOINT: u8 = 4;

/// Per-class adjacency tallies gathered while scanning one edge's
/// neighborhood.
#[derive(Default)]
struct Tally {
    common: u64,
    only_u: u64,
    only_v: u64,
    // Ordered pair counts; pairs within one class are seen twice.
    common_common: u64,
    common_star: u64,
    common_rest: u64,
    u_u: u64,
    u_v: u64,
    u_rest: u64,
    v_v: u64,
    v_rest: u64,
}

/// Counts the eight graphlet types on every edge.
///
/// Per edge `(u, v)` the other nodes split into common neighbors `T`,
/// neighbors of only `u` (`S_u`) or only `v` (`S_v`), and the rest `R`. Each
/// four-node graphlet containing the edge is fixed by the classes of its two
/// extra nodes and whether they are adjacent, so scanning the neighbor lists of
/// `T ∪ S_u ∪ S_v` once is enough:
///
/// | extra pair | not adjacent | adjacent |
/// |---|---|---|
/// | `T, T` | chordal cycle | 4-clique |
/// | `T, S` | tailed triangle | chordal cycle |
/// | `T, R` | - | tailed triangle |
/// | `S_u, S_u` | 3-star | tailed triangle |
/// | `S_u, S_v` | 4-path | 4-cycle |
/// | `S, R` | - | 4-path |
pub fn count_motifs(graph: &UndirectedGraph) -> Result<MotifSlice> {
    let n = graph.num_nodes();
    let counts: Vec<EdgeCounts> = graph
        .edges()
        .par_iter()
        .map_init(
            || vec![NONE; n],
            |marks, &(u, v)| {
                let tally = scan_edge(graph, marks, u, v);
                edge_counts(&tally, (u, v))
            },
        )
        .collect::<Result<_>>()?;
    MotifSlice::new(n, graph.edges().to_vec(), counts)
}

fn scan_edge(graph: &UndirectedGraph, marks: &mut [u8], u: usize, v: usize) -> Tally {
    for &w in graph.neighbors(u) {
        marks[w] |= ONLY_U;
    }
    for &w in graph.neighbors(v) {
        marks[w] |= ONLY_V;
    }
    marks[u] = ENDPOINT;
    marks[v] = ENDPOINT;

    let mut t = Tally::default();
    let visit = |w: usize, class: u8, t: &mut Tally| {
        let (mut in_common, mut in_u, mut in_v) = (0u64, 0u64, 0u64);
        for &x in graph.neighbors(w) {
            match marks[x] {
                BOTH => in_common += 1,
                ONLY_U => in_u += 1,
                ONLY_V => in_v += 1,
                _ => {}
            }
        }
        let endpoints = if class == BOTH { 2 } else { 1 };
        let rest = graph.degree(w) as u64 - endpoints - in_common - in_u - in_v;
        match class {
            BOTH => {
                t.common += 1;
                t.common_common += in_common;
                t.common_star += in_u + in_v;
                t.common_rest += rest;
            }
            ONLY_U => {
                t.only_u += 1;
                t.u_u += in_u;
                t.u_v += in_v;
                t.u_rest += rest;
            }
            _ => {
                t.only_v += 1;
                t.v_v += in_v;
                t.v_rest += rest;
            }
        }
    };
    for &w in graph.neighbors(u) {
        let class = marks[w];
        if class == BOTH || class == ONLY_U {
            visit(w, class, &mut t);
        }
    }
    for &w in graph.neighbors(v) {
        if marks[w] == ONLY_V {
            visit(w, ONLY_V, &mut t);
        }
    }

    for &w in graph.neighbors(u).iter().chain(graph.neighbors(v)) {
        marks[w] = NONE;
    }
    marks[u] = NONE;
    marks[v] = NONE;
    t
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn edge_counts(t: &Tally, edge: (usize, usize)) -> Result<EdgeCounts> {
    let cliques = t.common_common / 2;
    let adj_u_u = t.u_u / 2;
    let adj_v_v = t.v_v / 2;
    let stars = t.only_u + t.only_v;

    let mut raw = [0u64; NUM_MOTIFS];
    raw[MotifKind::Triangle.index()] = t.common;
    raw[MotifKind::TwoStar.index()] = stars;
    raw[MotifKind::FourClique.index()] = cliques;
    raw[MotifKind::ChordalCycle.index()] = choose2(t.common) - cliques + t.common_star;
    raw[MotifKind::TailedTriangle.index()] =
        t.common * stars - t.common_star + t.common_rest + adj_u_u + adj_v_v;
    raw[MotifKind::FourCycle.index()] = t.u_v;
    raw[MotifKind::ThreeStar.index()] = choose2(t.only_u) - adj_u_u + choose2(t.only_v) - adj_v_v;
    raw[MotifKind::FourPath.index()] = t.only_u * t.only_v - t.u_v + t.u_rest + t.v_rest;

    let mut out = [0u32; NUM_MOTIFS];
    for (o, r) in out.iter_mut().zip(raw) {
        *o = checked_count(r, edge)?;
    }
    Ok(out)
}
