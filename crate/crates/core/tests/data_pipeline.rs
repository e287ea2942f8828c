mod common;

use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trustgcn::data::{
    build_features, build_snapshots, parse_ratings, parse_ratings_from, read_snapshot_bundle, write_snapshot_bundle,
    Binning, EdgeLabel, RatingEvent, SnapshotSeries, SplitSpec,
};

fn csv(events: &[RatingEvent]) -> String {
    events
        .iter()
        .map(|e| format!("{},{},{},{}\n", e.source, e.target, e.rating, e.timestamp))
        .collect()
}

fn split(k: usize) -> SplitSpec {
    SplitSpec {
        train: k - 2,
        valid: 1,
        test: 1,
    }
}

fn edge_view(s: &SnapshotSeries) -> Vec<Vec<(u64, u64, i32)>> {
    s.snapshots
        .iter()
        .map(|snap| {
            snap.edges()
                .iter()
                .map(|e| (s.node_ids[e.u], s.node_ids[e.v], e.rating_sum))
                .collect()
        })
        .collect()
}

#[test]
fn plain_and_gzip_files_parse_identically() {
    let events = common::trust_events(20, 200, 1);
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("r.csv");
    std::fs::write(&plain, csv(&events)).unwrap();
    let gz = dir.path().join("r.csv.gz");
    let mut enc = GzEncoder::new(std::fs::File::create(&gz).unwrap(), Compression::default());
    enc.write_all(csv(&events).as_bytes()).unwrap();
    enc.finish().unwrap();
    let a = parse_ratings(&plain).unwrap();
    let b = parse_ratings(&gz).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows_read, 200);
}

#[test]
fn malformed_rows_report_line_numbers() {
    let text = "1,2,3,100\n1,2,x,101\n";
    let err = parse_ratings_from(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
    assert!(parse_ratings_from("1,2,11,5\n".as_bytes()).is_err());
    assert!(parse_ratings("/nonexistent/ratings.csv").unwrap_err().is_missing_input());
}

#[test]
fn self_loops_are_dropped_and_counted() {
    let log = parse_ratings_from("1,1,5,10\n1,2,5,11\n".as_bytes()).unwrap();
    assert_eq!(log.events.len(), 1);
    assert_eq!(log.self_loops_dropped, 1);
}

#[test]
fn equal_edge_bins_are_balanced() {
    let events = common::trust_events(40, 1200, 3);
    let s = build_snapshots(&events, 12, Binning::EqualEdges, SplitSpec::default()).unwrap();
    for snap in &s.snapshots {
        assert!(snap.ratings().len().abs_diff(100) <= 1, "{}", snap.ratings().len());
    }
    assert_eq!(s.split.train, (0..8).collect::<Vec<_>>());
    assert_eq!(s.split.test, vec![9, 10, 11]);
}

#[test]
fn equal_time_bins_cover_the_range() {
    let events = common::trust_events(30, 600, 4);
    let s = build_snapshots(&events, 6, Binning::EqualTime, split(6)).unwrap();
    let total: usize = s.snapshots.iter().map(|x| x.ratings().len()).sum();
    assert_eq!(total, events.len());
    for w in s.snapshots.windows(2) {
        assert_eq!(w[0].end, w[1].start);
    }
}

#[test]
fn features_use_training_snapshots_only() {
    let events = common::trust_events(20, 300, 5);
    let s = build_snapshots(&events, 5, Binning::EqualEdges, split(5)).unwrap();
    let mut altered = s.clone();
    let last = altered.snapshots.len() - 1;
    altered.snapshots[last] = altered.snapshots[0].clone();
    assert_eq!(build_features(&s, 5).unwrap(), build_features(&altered, 5).unwrap());
    let f = build_features(&s, 8).unwrap();
    assert_eq!(f.dim(), 8);
    for r in 0..f.matrix.rows() {
        assert!(f.matrix.row(r)[5..].iter().all(|&v| v == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn row_order_does_not_matter(n in 5u64..30, count in 60usize..300, seed in any::<u64>(), k in 3usize..7) {
        let events = common::trust_events(n, count, seed);
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let a = build_snapshots(&events, k, Binning::EqualEdges, split(k)).unwrap();
        let b = build_snapshots(&shuffled, k, Binning::EqualEdges, split(k)).unwrap();
        prop_assert_eq!(&a.node_ids, &b.node_ids);
        prop_assert_eq!(edge_view(&a), edge_view(&b));
        let parsed = parse_ratings_from(csv(&shuffled).as_bytes()).unwrap();
        let c = build_snapshots(&parsed.events, k, Binning::EqualEdges, split(k)).unwrap();
        prop_assert_eq!(edge_view(&a), edge_view(&c));
    }

    #[test]
    fn labels_follow_rating_sums(n in 5u64..30, count in 60usize..300, seed in any::<u64>()) {
        let events = common::trust_events(n, count, seed);
        let s = build_snapshots(&events, 4, Binning::EqualEdges, split(4)).unwrap();
        let mut pairs = 0;
        for snap in &s.snapshots {
            let anomalous = snap.edges().iter().filter(|e| e.rating_sum < 0).count();
            prop_assert_eq!(snap.num_anomalous(), anomalous);
            let labels = snap.labels();
            for (e, &l) in snap.edges().iter().zip(&labels) {
                let want = if e.rating_sum < 0 { EdgeLabel::Anomalous } else { EdgeLabel::Normal };
                prop_assert_eq!(e.is_positive(), e.rating_sum > 0);
                prop_assert_eq!(l, want.class_index());
                prop_assert!(e.u < e.v);
            }
            let summed: i32 = snap.ratings().iter().map(|r| r.rating as i32).sum();
            prop_assert_eq!(summed, snap.edges().iter().map(|e| e.rating_sum).sum::<i32>());
            prop_assert_eq!(snap.sign_pos().nnz() + snap.sign_neg().nnz(), 2 * snap.edges().len());
            pairs += snap.edges().len();
        }
        prop_assert_eq!(pairs, s.total_edges());
        let ratings: usize = s.snapshots.iter().map(|x| x.ratings().len()).sum();
        prop_assert_eq!(ratings, events.len());
    }

    #[test]
    fn bundles_round_trip(n in 5u64..25, count in 60usize..200, seed in any::<u64>()) {
        let s = common::trust_series(n, count, 4, split(4), seed);
        let dir = tempfile::tempdir().unwrap();
        let m1 = write_snapshot_bundle(&s, dir.path(), None).unwrap();
        let (back, m2) = read_snapshot_bundle(dir.path()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(m1, m2);
        let before = std::fs::read(dir.path().join("000.edges")).unwrap();
        write_snapshot_bundle(&back, dir.path(), None).unwrap();
        prop_assert_eq!(before, std::fs::read(dir.path().join("000.edges")).unwrap());
    }
}
