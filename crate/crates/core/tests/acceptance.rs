//! Acceptance criteria, one PASS/FAIL line each. Criteria 6 to 9 need the
//! bitcoin rating files in `$MGS_DATA_DIR`.

mod common;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::gradcheck::{check_model, randomized, toy, toy_config};
use trustgcn::autodiff::{Matrix, Tape};
use trustgcn::data::{build_snapshots, parse_ratings, Binning, LabeledEdge, Snapshot, SnapshotSeries, SplitSpec};
use trustgcn::graphlet::{count_motifs, count_motifs_bruteforce, count_series, MotifSeries};
use trustgcn::model::{graph_embed, project_history, Ablation, Model, ModelKind, SignedMasks};
use trustgcn::trainer::{ablation_suite, baseline_gcn, train, MetricsReport, RunConfig};

const DATA_ENV: &str = "MGS_DATA_DIR";
const TOLERANCE: f64 = 0.06;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut graphs = vec![
        common::complete(3),
        common::complete(4),
        trustgcn::graph::UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap(),
        trustgcn::graph::UndirectedGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap(),
        trustgcn::graph::UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..50 {
        graphs.push(common::random_graph(5 + (i * 7) % 36, [0.1, 0.3, 0.6][i % 3], &mut rng));
    }
    let mismatches = graphs
        .iter()
        .filter(|g| count_motifs(g).unwrap() != count_motifs_bruteforce(g).unwrap())
        .count();
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!("{} graphs, {mismatches} mismatches, {elapsed:.2?}", graphs.len()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let variants = [
        (ModelKind::MgsTgcn, Ablation::default()),
        (ModelKind::MgsTgcn, Ablation { no_sign: true, ..Ablation::default() }),
        (ModelKind::Gcn, Ablation::default()),
    ];
    let mut worst = (String::new(), 0.0f64);
    for (kind, ablation) in variants {
        let config = toy_config(kind, ablation);
        let (inputs, _) = toy(&config);
        let model = randomized(config, 3);
        for (name, err) in check_model(&model, &inputs, 1e-5) {
            if err > worst.1 {
                worst = (format!("{kind}/{}/{name}", ablation.label()), err);
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst.1 < 1e-4 && elapsed < Duration::from_secs(60),
        format!("worst relative error {:.2e} ({}), {elapsed:.2?}", worst.1, worst.0),
    )
}

fn criterion_3() -> Outcome {
    let series = common::trust_series(200, 4000, 12, SplitSpec::default(), 3);
    let motifs = MotifSeries::new(count_series(&series).unwrap());
    let config = RunConfig {
        emb_dim: 32,
        warmup_epochs: 20,
        total_epochs: 60,
        repeats: 2,
        ..RunConfig::default()
    };
    let report = train(&config, &series, Some(&motifs)).map_err(|e| e.to_string())?.report;
    let dev = report.max_apm_row_deviation.ok_or("no assignments recorded")?;
    check(dev <= 1e-9, format!("max |row sum - 1| = {dev:.2e} over {} epochs x 2 seeds", config.total_epochs))
}

fn random_snapshot(n: usize, rng: &mut ChaCha8Rng) -> Snapshot {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                let rating_sum = if rng.gen_bool(0.5) { rng.gen_range(1..20) } else { -rng.gen_range(0..20) };
                edges.push(LabeledEdge { u, v, rating_sum });
            }
        }
    }
    Snapshot::from_parts(n, 0, 1, edges, Vec::new()).unwrap()
}

fn sign_swap_holds(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 9;
    let masks = SignedMasks::from_snapshot(&random_snapshot(n, &mut rng));
    let swapped = SignedMasks {
        positive: Arc::clone(&masks.negative),
        negative: Arc::clone(&masks.positive),
    };
    let mut m = |r, c| common::random_matrix(r, c, 1.0, &mut rng);
    let vals = [m(4, 4), m(4, 4), m(1, 4), m(1, 4), m(n, 4), m(n, 4)];
    let run = |masks: &SignedMasks, swap: bool| -> (Matrix, Matrix) {
        let mut tape = Tape::new();
        let v: Vec<_> = vals.iter().map(|x| tape.leaf(x.clone()).unwrap()).collect();
        let (bp, bn, dp, dn) = if swap { (v[3], v[2], v[5], v[4]) } else { (v[2], v[3], v[4], v[5]) };
        let h = project_history(&mut tape, dp, dn, v[0], v[1]).unwrap();
        let (p, q) = graph_embed(&mut tape, masks, &h, bp, bn).unwrap();
        (tape.value(p).clone(), tape.value(q).clone())
    };
    let (gp, gn) = run(&masks, false);
    let (sp, sn) = run(&swapped, true);
    gp == sn && gn == sp
}

fn criterion_4() -> Outcome {
    let swaps = (0..25).filter(|&s| sign_swap_holds(s)).count();
    let series = common::trust_series(40, 1500, 6, SplitSpec { train: 4, valid: 1, test: 1 }, 11);
    let motifs = MotifSeries::new(count_series(&series).unwrap());
    let base = common::small_config();
    let no_motif = RunConfig { no_motif: true, ..base.clone() };
    let with = train(&no_motif, &series, Some(&motifs)).map_err(|e| e.to_string())?.report;
    let without = train(&no_motif, &series, None).map_err(|e| e.to_string())?.report;
    let motif_free = motifs.reads() == 0 && with == without;

    let names = |c: &RunConfig| Model::new(c.model_config(), 0).unwrap().params.names().to_vec();
    let full = names(&base);
    let sign_free = names(&RunConfig { no_sign: true, ..base.clone() });
    let global_free = names(&RunConfig { no_global: true, ..base.clone() });
    let contained = !sign_free.iter().any(|n| n == "w4" || n == "b_neg")
        && !global_free.iter().any(|n| n.starts_with("group."))
        && !names(&no_motif).iter().any(|n| n.starts_with("motif.") || n == "alpha")
        && [&sign_free, &global_free].iter().all(|v| v.iter().all(|n| full.contains(n) || n.starts_with("cls.")));
    check(
        swaps == 25 && motif_free && contained,
        format!("sign swap exact {swaps}/25, motif-free ablation {motif_free}, parameter containment {contained}"),
    )
}

fn criterion_5() -> Outcome {
    let series = common::trust_series(60, 2000, 6, SplitSpec { train: 4, valid: 1, test: 1 }, 5);
    let motifs = MotifSeries::new(count_series(&series).unwrap());
    let config = common::small_config();
    let json = || -> Result<String, String> {
        let r = train(&config, &series, Some(&motifs)).map_err(|e| e.to_string())?;
        serde_json::to_string_pretty(&r.report).map_err(|e| e.to_string())
    };
    let (a, b) = (json()?, json()?);
    check(a == b, format!("{} bytes of metrics JSON, identical: {}", a.len(), a == b))
}

/// Lazily trained reports on the real datasets, shared by criteria 6 to 9.
struct Datasets {
    dir: Option<PathBuf>,
    series: HashMap<&'static str, Result<(SnapshotSeries, MotifSeries), String>>,
    reports: HashMap<(&'static str, String), Result<MetricsReport, String>>,
}

impl Datasets {
    fn new() -> Self {
        Datasets {
            dir: std::env::var_os(DATA_ENV).map(PathBuf::from),
            series: HashMap::new(),
            reports: HashMap::new(),
        }
    }

    fn file(&self, name: &str) -> Result<PathBuf, String> {
        let dir = self
            .dir
            .as_ref()
            .ok_or_else(|| format!("{DATA_ENV} is not set; the bitcoin rating files are required"))?;
        let stem = format!("soc-sign-bitcoin{name}.csv");
        [stem.clone(), format!("{stem}.gz")]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.exists())
            .ok_or_else(|| format!("{stem}[.gz] not found in {}", dir.display()))
    }

    fn load(&mut self, name: &'static str) -> Result<&(SnapshotSeries, MotifSeries), String> {
        if !self.series.contains_key(name) {
            let loaded = self.file(name).and_then(|path| {
                let log = parse_ratings(&path).map_err(|e| e.to_string())?;
                let series = build_snapshots(&log.events, 12, Binning::EqualEdges, SplitSpec::default())
                    .map_err(|e| e.to_string())?;
                let motifs = MotifSeries::new(count_series(&series).map_err(|e| e.to_string())?);
                Ok((series, motifs))
            });
            self.series.insert(name, loaded);
        }
        self.series[name].as_ref().map_err(Clone::clone)
    }

    fn report(&mut self, name: &'static str, config: &RunConfig) -> Result<MetricsReport, String> {
        let key = (name, config.label());
        if !self.reports.contains_key(&key) {
            let result = self.load(name).and_then(|(series, motifs)| {
                let start = Instant::now();
                let out = match config.model {
                    ModelKind::Gcn => baseline_gcn(config, series),
                    ModelKind::MgsTgcn => train(config, series, Some(motifs)),
                };
                println!("  {name} {}: {:.0?}", config.label(), start.elapsed());
                out.map(|o| o.report).map_err(|e| e.to_string())
            });
            self.reports.insert(key.clone(), result);
        }
        self.reports[&key].clone()
    }
}

fn reproduce(data: &mut Datasets, name: &'static str, target: f64) -> Outcome {
    let r = data.report(name, &RunConfig::default())?;
    let f1 = r.test.f1;
    check(
        (f1 - target).abs() <= TOLERANCE,
        format!("{name} seed-averaged F1 {f1:.3}, target {target:.3} +/- {TOLERANCE}"),
    )
}

fn criterion_8(data: &mut Datasets) -> Outcome {
    let mut f1 = Vec::new();
    // Order required: -motif < -sign < -global < full.
    let suite = ablation_suite(&RunConfig::default());
    for config in [&suite[1], &suite[2], &suite[3], &suite[0]] {
        f1.push((config.label(), data.report("alpha", config)?.test.f1));
    }
    let ordered = f1.windows(2).all(|w| w[0].1 < w[1].1);
    let detail = f1.iter().map(|(l, v)| format!("{l} {v:.3}")).collect::<Vec<_>>().join(" < ");
    check(ordered, format!("alpha {detail}"))
}

fn criterion_9(data: &mut Datasets) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["alpha", "otc"] {
        let full = data.report(name, &RunConfig::default())?.test.f1;
        let gcn = data
            .report(name, &RunConfig { model: ModelKind::Gcn, ..RunConfig::default() })?
            .test
            .f1;
        ok &= full > gcn;
        parts.push(format!("{name} {full:.3} vs GCN {gcn:.3}"));
    }
    check(ok, parts.join(", "))
}

type Criterion = Box<dyn FnMut(&mut Datasets) -> Outcome>;

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut data = Datasets::new();
    let criteria: Vec<(usize, Criterion)> = vec![
        (1, Box::new(|_| criterion_1())),
        (2, Box::new(|_| criterion_2())),
        (3, Box::new(|_| criterion_3())),
        (4, Box::new(|_| criterion_4())),
        (5, Box::new(|_| criterion_5())),
        (6, Box::new(|d| reproduce(d, "alpha", 0.433))),
        (7, Box::new(|d| reproduce(d, "otc", 0.342))),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, mut f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        match f(&mut data) {
            Ok(detail) => println!("criterion {n}: PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
