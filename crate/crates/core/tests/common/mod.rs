#![allow(dead_code)]

pub mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustgcn::autodiff::Matrix;
use trustgcn::data::{build_snapshots, Binning, RatingEvent, SnapshotSeries, SplitSpec};
use trustgcn::graph::UndirectedGraph;
use trustgcn::trainer::RunConfig;

/// Rating stream over `n` nodes where a tenth of the nodes mostly receive
/// negative ratings.
pub fn trust_events(n: u64, count: usize, seed: u64) -> Vec<RatingEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bad: Vec<bool> = (0..n).map(|i| i % 10 == 3).collect();
    let mut events = Vec::with_capacity(count);
    // Make sure every node appears.
    for i in 0..n {
        events.push(RatingEvent {
            source: i,
            target: (i + 1) % n,
            rating: 1,
            timestamp: events.len() as i64,
        });
    }
    while events.len() < count {
        let source = rng.gen_range(0..n);
        let target = rng.gen_range(0..n);
        if source == target {
            continue;
        }
        let negative = if bad[target as usize] { rng.gen_bool(0.8) } else { rng.gen_bool(0.08) };
        let magnitude = rng.gen_range(1..=10i8);
        events.push(RatingEvent {
            source: source + 1000,
            target: target + 1000,
            rating: if negative { -magnitude } else { magnitude },
            timestamp: events.len() as i64 * 7,
        });
    }
    // Remap the seeding ring into the same id space.
    for e in events.iter_mut().take(n as usize) {
        e.source += 1000;
        e.target += 1000;
    }
    events
}

pub fn trust_series(n: u64, count: usize, snapshots: usize, split: SplitSpec, seed: u64) -> SnapshotSeries {
    build_snapshots(&trust_events(n, count, seed), snapshots, Binning::EqualEdges, split).unwrap()
}

/// Six nodes over three snapshots with triangles, mixed signs and an
/// isolated node in the middle snapshot.
pub fn toy_series() -> SnapshotSeries {
    let raw: [(u64, u64, i8); 15] = [
        (0, 1, 3),
        (1, 2, -2),
        (0, 2, 4),
        (2, 3, 1),
        (3, 4, -5),
        (4, 5, 2),
        (0, 1, 2),
        (1, 3, -4),
        (3, 2, 6),
        (2, 4, 1),
        (0, 5, -1),
        (5, 4, 3),
        (1, 4, 2),
        (4, 3, -3),
        (2, 5, 5),
    ];
    let events: Vec<RatingEvent> = raw
        .iter()
        .enumerate()
        .map(|(i, &(s, t, r))| RatingEvent {
            source: s,
            target: t,
            rating: r,
            timestamp: i as i64,
        })
        .collect();
    build_snapshots(&events, 3, Binning::EqualEdges, SplitSpec { train: 1, valid: 1, test: 1 }).unwrap()
}

pub fn small_config() -> RunConfig {
    RunConfig {
        emb_dim: 6,
        groups: 3,
        warmup_epochs: 3,
        total_epochs: 10,
        repeats: 2,
        seed: 17,
        ..RunConfig::default()
    }
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> UndirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    UndirectedGraph::from_edges(n, &edges).unwrap()
}

pub fn complete(n: usize) -> UndirectedGraph {
    let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    UndirectedGraph::from_edges(n, &edges).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Relative error `‖a − b‖ / max(‖a‖ + ‖b‖, tiny)` over whole tensors.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / (a.norm() + b.norm()).max(1e-12)
}

pub fn dense_sym_normalized(a: &Matrix, self_loops: bool) -> Matrix {
    let n = a.rows();
    let mut m = a.clone();
    if self_loops {
        for i in 0..n {
            m.set(i, i, m.get(i, i) + 1.0);
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| m.row(i).iter().sum()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if deg[i] > 0.0 && deg[j] > 0.0 {
                out.set(i, j, m.get(i, j) / (deg[i] * deg[j]).sqrt());
            }
        }
    }
    out
}

pub fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

pub fn add(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = a.clone();
    out.add_scaled(b, 1.0);
    out
}

pub fn add_row(a: &Matrix, row: &Matrix) -> Matrix {
    let mut out = a.clone();
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(row.row(0)) {
            *o += b;
        }
    }
    out
}

pub fn mm(a: &Matrix, b: &Matrix) -> Matrix {
    // Naive triple loop, independent of the crate's gemm.
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}
