use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use trustgcn::data::{
    build_features, build_snapshots, parse_ratings, read_snapshot_bundle, write_snapshot_bundle, Binning,
    SnapshotSeries, SourceInfo, SplitSpec,
};
use trustgcn::graphlet::{count_series, oracle_check, read_motif_bundle, read_motif_manifest, write_motif_bundle, MotifSeries};
use trustgcn::model::{Model, ModelConfig, ModelInputs};
use trustgcn::trainer::{
    ablation_suite, epochs_csv, evaluate_model, format_table, node_embeddings, read_checkpoint, train as run_training,
    write_checkpoint, MetricsReport, RunConfig,
};
use trustgcn::{sha256_dir, sha256_file};

use crate::config::RunArgs;
use crate::CliError;

pub const RUN_MANIFEST: &str = "run.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

#[derive(Serialize)]
struct InputHash {
    role: &'static str,
    path: String,
    sha256: String,
}

/// Everything needed to rerun a command: its arguments, the resolved
/// configuration, the seeds and content hashes of the inputs.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    version: &'static str,
    arguments: serde_json::Value,
    config: Option<RunConfig>,
    config_hash: Option<String>,
    seeds: Vec<u64>,
    inputs: Vec<InputHash>,
    outputs: Vec<String>,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn input(role: &'static str, path: &Path) -> Result<InputHash, CliError> {
    let sha256 = if path.is_dir() { sha256_dir(path) } else { sha256_file(path) }?;
    Ok(InputHash {
        role,
        path: path.display().to_string(),
        sha256,
    })
}

fn seeds(config: &RunConfig) -> Vec<u64> {
    (0..config.repeats as u64).map(|r| config.seed.wrapping_add(r)).collect()
}

fn write_manifest(out: &Path, manifest: RunManifest) -> Result<(), CliError> {
    write_json(&out.join(RUN_MANIFEST), &manifest)
}

pub fn ingest(input_path: &Path, out: &Path, snapshots: usize, binning: Binning, split: SplitSpec) -> Result<(), CliError> {
    let log = parse_ratings(input_path)?;
    let series = build_snapshots(&log.events, snapshots, binning, split)?;
    let source = input("ratings", input_path)?;
    let info = SourceInfo {
        path: source.path.clone(),
        sha256: source.sha256.clone(),
        rows_read: log.rows_read,
        self_loops_dropped: log.self_loops_dropped,
    };
    let manifest = write_snapshot_bundle(&series, out, Some(info))?;
    let [train, valid, test] = series.split_edge_counts();
    let total = series.total_edges().max(1) as f64;
    println!(
        "{} ratings -> {} nodes, {} snapshot edges; split edges {train}/{valid}/{test} ({:.1}%/{:.1}%/{:.1}%)",
        log.events.len(),
        series.num_nodes(),
        series.total_edges(),
        100.0 * train as f64 / total,
        100.0 * valid as f64 / total,
        100.0 * test as f64 / total,
    );
    let mut outputs = vec![trustgcn::data::SNAPSHOT_MANIFEST.to_string(), "nodes.txt".to_string()];
    for s in &manifest.snapshots {
        outputs.push(s.edges_file.clone());
        outputs.push(s.ratings_file.clone());
    }
    write_manifest(
        out,
        RunManifest {
            command: "ingest",
            version: env!("CARGO_PKG_VERSION"),
            arguments: json!({ "snapshots": snapshots, "binning": binning, "split": split }),
            config: None,
            config_hash: None,
            seeds: Vec::new(),
            inputs: vec![source],
            outputs,
        },
    )
}

pub fn motifs(snaps: &Path, out: &Path, verify: Option<usize>) -> Result<(), CliError> {
    let (series, _) = read_snapshot_bundle(snaps)?;
    let snaps_input = input("snapshots", snaps)?;
    let slices = count_series(&series)?;
    let manifest = write_motif_bundle(&slices, out, Some(snaps_input.sha256.clone()))?;
    let mut outputs = vec![trustgcn::graphlet::MOTIF_MANIFEST.to_string()];
    outputs.extend(manifest.slices.iter().flat_map(|s| s.files.iter().cloned()));

    let mut failure = None;
    if let Some(budget) = verify {
        let mut checks = Vec::with_capacity(series.len());
        let mut mismatches = 0;
        for (t, snap) in series.snapshots.iter().enumerate() {
            let check = oracle_check(&snap.graph(), budget)?;
            mismatches += check.mismatches.len();
            println!(
                "snapshot {t:3}: {} nodes, {} edges{}, {} mismatches",
                check.nodes_checked,
                check.edges_checked,
                if check.sampled { " (induced neighbourhood)" } else { "" },
                check.mismatches.len()
            );
            checks.push(json!({ "snapshot": t, "check": check }));
        }
        write_json(&out.join("verify.json"), &json!({ "budget": budget, "mismatches": mismatches, "snapshots": checks }))?;
        outputs.push("verify.json".into());
        println!("oracle check: {mismatches} mismatching edges");
        if mismatches > 0 {
            failure = Some(CliError::Validation(format!("{mismatches} edges disagree with the oracle")));
        }
    }
    let total: usize = slices.iter().map(|s| s.edges().len()).sum();
    println!("counted graphlets on {total} edges over {} snapshots", slices.len());
    write_manifest(
        out,
        RunManifest {
            command: "motifs",
            version: env!("CARGO_PKG_VERSION"),
            arguments: json!({ "verify": verify }),
            config: None,
            config_hash: None,
            seeds: Vec::new(),
            inputs: vec![snaps_input],
            outputs,
        },
    )?;
    failure.map_or(Ok(()), Err)
}

struct Data {
    series: SnapshotSeries,
    motifs: Option<MotifSeries>,
    inputs: Vec<InputHash>,
}

/// Loads the snapshot bundle and, only when `needs_motifs`, the motif
/// bundle, which must have been counted from the same snapshots.
fn load_data(snaps: &Path, motifs: Option<&Path>, needs_motifs: bool) -> Result<Data, CliError> {
    let (series, _) = read_snapshot_bundle(snaps)?;
    let snaps_input = input("snapshots", snaps)?;
    let mut inputs = Vec::new();
    let motif_series = if needs_motifs {
        let dir = motifs.ok_or_else(|| CliError::Validation("this model variant needs --motifs".into()))?;
        let manifest = read_motif_manifest(dir)?;
        if let Some(hash) = &manifest.snapshots_sha256 {
            if *hash != snaps_input.sha256 {
                return Err(CliError::Validation(format!(
                    "motif bundle {} was counted from different snapshots",
                    dir.display()
                )));
            }
        }
        let m = read_motif_bundle(dir, &series)?;
        inputs.push(input("motifs", dir)?);
        Some(m)
    } else {
        None
    };
    inputs.insert(0, snaps_input);
    Ok(Data {
        series,
        motifs: motif_series,
        inputs,
    })
}

fn any_uses_motifs(configs: &[RunConfig]) -> bool {
    configs.iter().any(|c| c.model_config().uses_motifs())
}

fn table_row(report: &MetricsReport) -> (String, trustgcn::trainer::Metrics) {
    (report.label.clone(), report.test.clone())
}

pub fn train(snaps: &Path, motifs: Option<&Path>, run: &RunArgs, out: &Path) -> Result<(), CliError> {
    let config = run.resolve()?;
    let data = load_data(snaps, motifs, any_uses_motifs(std::slice::from_ref(&config)))?;
    create_dir(out)?;
    let outcome = run_training(&config, &data.series, data.motifs.as_ref())?;
    let report = &outcome.report;
    write_json(&out.join("metrics.json"), report)?;
    write_text(&out.join("epochs.csv"), &epochs_csv(report))?;
    let table = format_table(&[table_row(report)]);
    write_text(&out.join("table.txt"), &table)?;
    let mut outputs = vec!["metrics.json".to_string(), "epochs.csv".into(), "table.txt".into()];
    for m in &outcome.models {
        let dir = format!("checkpoints/seed-{}", m.seed);
        write_checkpoint(&m.best_model, &report.config_hash, m.seed, m.best_epoch, out.join(&dir))?;
        outputs.push(dir);
    }
    print!("{table}");
    write_manifest(
        out,
        RunManifest {
            command: "train",
            version: env!("CARGO_PKG_VERSION"),
            arguments: json!({}),
            seeds: seeds(&config),
            config_hash: Some(config.hash()),
            config: Some(config),
            inputs: data.inputs,
            outputs,
        },
    )
}

pub fn ablate(snaps: &Path, motifs: Option<&Path>, run: &RunArgs, baseline: bool, out: &Path) -> Result<(), CliError> {
    let config = run.resolve()?;
    let mut configs = ablation_suite(&config);
    if baseline {
        configs.push(RunConfig {
            model: trustgcn::model::ModelKind::Gcn,
            ..configs[0].clone()
        });
    }
    let data = load_data(snaps, motifs, any_uses_motifs(&configs))?;
    create_dir(out)?;
    let mut reports = Vec::with_capacity(configs.len());
    let mut outputs = vec!["ablation.json".to_string(), "table.txt".into()];
    for c in &configs {
        let motifs = if c.model_config().uses_motifs() { data.motifs.as_ref() } else { None };
        let report = run_training(c, &data.series, motifs)?.report;
        let name = format!("epochs-{}.csv", slug(&report.label));
        write_text(&out.join(&name), &epochs_csv(&report))?;
        outputs.push(name);
        reports.push(report);
    }
    write_json(&out.join("ablation.json"), &reports)?;
    let table = format_table(&reports.iter().map(table_row).collect::<Vec<_>>());
    write_text(&out.join("table.txt"), &table)?;
    print!("{table}");
    write_manifest(
        out,
        RunManifest {
            command: "ablate",
            version: env!("CARGO_PKG_VERSION"),
            arguments: json!({ "baseline": baseline }),
            seeds: seeds(&config),
            config_hash: Some(config.hash()),
            config: Some(config),
            inputs: data.inputs,
            outputs,
        },
    )
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    s.trim_matches('-').to_string()
}

fn model_inputs(config: &ModelConfig, data: &Data) -> Result<ModelInputs, CliError> {
    let features = build_features(&data.series, config.input_dim)?;
    Ok(ModelInputs::new(&data.series, &features, data.motifs.as_ref())?)
}

fn load_model(
    snaps: &Path,
    motifs: Option<&Path>,
    checkpoint: &Path,
) -> Result<(Model, trustgcn::trainer::CheckpointManifest, Data, ModelInputs), CliError> {
    let (model, manifest) = read_checkpoint(checkpoint)?;
    let mut data = load_data(snaps, motifs, model.config.uses_motifs())?;
    data.inputs.push(input("checkpoint", checkpoint)?);
    let inputs = model_inputs(&model.config, &data)?;
    Ok((model, manifest, data, inputs))
}

pub fn eval(snaps: &Path, motifs: Option<&Path>, checkpoint: &Path, split: SplitName, out: &Path) -> Result<(), CliError> {
    let (model, manifest, data, inputs) = load_model(snaps, motifs, checkpoint)?;
    let ids = match split {
        SplitName::Train => &data.series.split.train,
        SplitName::Valid => &data.series.split.valid,
        SplitName::Test => &data.series.split.test,
    };
    let metrics = evaluate_model(&model, &inputs, ids)?;
    create_dir(out)?;
    write_json(
        &out.join("eval.json"),
        &json!({ "split": split, "snapshots": ids, "checkpoint_epoch": manifest.epoch, "metrics": metrics }),
    )?;
    print!("{}", format_table(&[(format!("{split:?}"), metrics)]));
    write_manifest(
        out,
        RunManifest {
            command: "eval",
            version: env!("CARGO_PKG_VERSION"),
            arguments: json!({ "split": split }),
            config: None,
            config_hash: Some(manifest.config_hash),
            seeds: vec![manifest.seed],
            inputs: data.inputs,
            outputs: vec!["eval.json".into()],
        },
    )
}

pub fn export_embeddings(
    snaps: &Path,
    motifs: Option<&Path>,
    checkpoint: &Path,
    snapshot: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let (model, manifest, data, inputs) = load_model(snaps, motifs, checkpoint)?;
    let series = &data.series;
    let wanted: Vec<usize> = match snapshot {
        Some(t) if t >= series.len() => {
            return Err(CliError::Validation(format!(
                "snapshot {t} out of range (series has {})",
                series.len()
            )))
        }
        Some(t) => vec![t],
        None => (0..series.len()).collect(),
    };
    let embeddings = node_embeddings(&model, &inputs)?;
    create_dir(out)?;
    let mut outputs = Vec::new();
    for &t in &wanted {
        let emb = &embeddings[t];
        let mut anomalous = vec![None; series.num_nodes()];
        for e in series.snapshots[t].edges() {
            for v in [e.u, e.v] {
                let flag = anomalous[v].get_or_insert(false);
                *flag |= e.rating_sum < 0;
            }
        }
        let mut text = String::from("node_id\tlabel");
        for k in 0..emb.cols() {
            write!(text, "\te{k}").expect("string write");
        }
        text.push('\n');
        for (v, state) in anomalous.iter().enumerate().take(emb.rows()) {
            let label = match state {
                None => "inactive",
                Some(true) => "anomalous",
                Some(false) => "normal",
            };
            write!(text, "{}\t{label}", series.node_ids[v]).expect("string write");
            for x in emb.row(v) {
                write!(text, "\t{x}").expect("string write");
            }
            text.push('\n');
        }
        let name = format!("emb_{t:03}.tsv");
        write_text(&out.join(&name), &text)?;
        outputs.push(name);
    }
    println!("wrote {} embedding files of width {}", outputs.len(), model.config.embedding_dim());
    write_manifest(
        out,
        RunManifest {
            command: "export-emb",
            version: env!("CARGO_PKG_VERSION"),
            arguments: json!({ "snapshot": snapshot }),
            config: None,
            config_hash: Some(manifest.config_hash),
            seeds: vec![manifest.seed],
            inputs: data.inputs,
            outputs,
        },
    )
}
