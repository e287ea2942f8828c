use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SMALL: &[&str] = &[
    "--emb-dim", "6", "--groups", "3", "--warmup-epochs", "2", "--total-epochs", "7", "--repeats", "1", "--seed", "5",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trustgcn"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Ratings over 30 nodes where node ids ending in 3 are mostly distrusted.
fn ratings_csv(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut text = String::from("source,target,rating,time\n");
    for i in 0..600u64 {
        let s = rng.gen_range(0..30u64);
        let mut t = rng.gen_range(0..30u64);
        if t == s {
            t = (t + 1) % 30;
        }
        let neg = if t % 10 == 3 { rng.gen_bool(0.8) } else { rng.gen_bool(0.1) };
        let r: i8 = rng.gen_range(1..=10);
        text.push_str(&format!("{},{},{},{}\n", s + 100, t + 100, if neg { -r } else { r }, 1_300_000_000 + i * 60));
    }
    let path = dir.join("ratings.csv");
    fs::write(&path, text).unwrap();
    path
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    snaps: PathBuf,
    motifs: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let csv = ratings_csv(&root);
    let snaps = root.join("snaps");
    let motifs = root.join("motifs");
    ok(&["ingest", "--in", p(&csv), "--out", p(&snaps), "--snapshots", "6", "--split", "4,1,1"]);
    ok(&["motifs", "--in", p(&snaps), "--out", p(&motifs)]);
    Fixture {
        _tmp: tmp,
        root,
        snaps,
        motifs,
    }
}

#[test]
fn pipeline_end_to_end() {
    let f = fixture();
    let manifest = json(&f.snaps.join("run.json"));
    assert_eq!(manifest["command"], "ingest");
    assert_eq!(manifest["inputs"][0]["role"], "ratings");
    assert_eq!(manifest["arguments"]["split"]["train"], 4);

    let verified = f.root.join("verified");
    let stdout = ok(&["motifs", "--in", p(&f.snaps), "--out", p(&verified), "--verify", "40"]);
    assert!(stdout.contains("oracle check: 0 mismatching edges"), "{stdout}");
    assert_eq!(json(&verified.join("verify.json"))["mismatches"], 0);

    let train = f.root.join("train");
    let mut args = vec!["train", "--snaps", p(&f.snaps), "--motifs", p(&f.motifs), "--out", p(&train)];
    args.extend_from_slice(SMALL);
    let table = ok(&args);
    assert!(table.contains("MGS-TGCN") && table.contains("F1"), "{table}");
    let metrics = json(&train.join("metrics.json"));
    assert_eq!(metrics["seeds"][0]["seed"], 5);
    assert_eq!(metrics["config"]["emb_dim"], 6);
    let run = json(&train.join("run.json"));
    assert_eq!(run["seeds"], serde_json::json!([5]));
    assert_eq!(run["config_hash"], metrics["config_hash"]);
    let roles: Vec<_> = run["inputs"].as_array().unwrap().iter().map(|i| i["role"].clone()).collect();
    assert_eq!(roles, ["snapshots", "motifs"]);
    let csv = fs::read_to_string(train.join("epochs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7);
    let ckpt = train.join("checkpoints/seed-5");
    assert!(ckpt.join("checkpoint.json").exists());

    let eval = f.root.join("eval");
    ok(&["eval", "--snaps", p(&f.snaps), "--motifs", p(&f.motifs), "--checkpoint", p(&ckpt), "--out", p(&eval)]);
    let e = json(&eval.join("eval.json"));
    assert_eq!(e["split"], "test");
    let f1 = e["metrics"]["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let emb = f.root.join("emb");
    ok(&["export-emb", "--snaps", p(&f.snaps), "--motifs", p(&f.motifs), "--checkpoint", p(&ckpt), "--out", p(&emb)]);
    let tsv = fs::read_to_string(emb.join("emb_005.tsv")).unwrap();
    let header: Vec<&str> = tsv.lines().next().unwrap().split('\t').collect();
    assert_eq!(header.len(), 2 + 18);
    assert_eq!(tsv.lines().count(), 1 + 30);
    let row: Vec<&str> = tsv.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "100");
    assert!(["normal", "anomalous", "inactive"].contains(&row[1]));
    let one = f.root.join("emb1");
    ok(&["export-emb", "--snaps", p(&f.snaps), "--motifs", p(&f.motifs), "--checkpoint", p(&ckpt), "--snapshot", "2", "--out", p(&one)]);
    assert!(one.join("emb_002.tsv").exists() && !one.join("emb_001.tsv").exists());
}

#[test]
fn ablate_writes_one_column_per_variant() {
    let f = fixture();
    let out = f.root.join("ablate");
    let mut args = vec!["ablate", "--snaps", p(&f.snaps), "--motifs", p(&f.motifs), "--baseline", "--out", p(&out)];
    args.extend_from_slice(SMALL);
    let table = ok(&args);
    for label in ["MGS-TGCN", "-motif", "-sign", "-global", "GCN"] {
        assert!(table.contains(label), "{table}");
    }
    let reports = json(&out.join("ablation.json"));
    assert_eq!(reports.as_array().unwrap().len(), 5);
    assert!(out.join("epochs-motif.csv").exists());
}

#[test]
fn bundles_are_byte_identical_on_rerun() {
    let f = fixture();
    let csv = f.root.join("ratings.csv");
    let before = dir_contents(&f.snaps);
    ok(&["ingest", "--in", p(&csv), "--out", p(&f.snaps), "--snapshots", "6", "--split", "4,1,1"]);
    assert_eq!(before, dir_contents(&f.snaps));
    let before = dir_contents(&f.motifs);
    ok(&["motifs", "--in", p(&f.snaps), "--out", p(&f.motifs)]);
    assert_eq!(before, dir_contents(&f.motifs));
}

#[test]
fn flags_override_config_file() {
    let f = fixture();
    let cfg = f.root.join("run.toml");
    fs::write(&cfg, "[run]\nemb_dim = 4\ntotal_epochs = 6\nwarmup_epochs = 2\nrepeats = 1\ngroups = 2\nno_motif = true\n").unwrap();
    let out = f.root.join("cfg");
    ok(&["train", "--snaps", p(&f.snaps), "--config", p(&cfg), "--emb-dim", "5", "--out", p(&out)]);
    let config = &json(&out.join("run.json"))["config"];
    assert_eq!(config["emb_dim"], 5);
    assert_eq!(config["total_epochs"], 6);
    assert_eq!(config["no_motif"], true);
    // Motifs were not needed, so none were read or recorded.
    assert_eq!(json(&out.join("run.json"))["inputs"].as_array().unwrap().len(), 1);

    let off = f.root.join("off");
    let out_code = code(&run(&["train", "--snaps", p(&f.snaps), "--config", p(&cfg), "--no-motif", "false", "--out", p(&off)]));
    assert_eq!(out_code, 3, "full model without --motifs is a validation failure");
}

#[test]
fn exit_codes() {
    let f = fixture();
    let missing = f.root.join("nope");
    assert_eq!(code(&run(&["ingest", "--in", p(&missing), "--out", p(&f.root.join("x"))])), 2);
    assert_eq!(code(&run(&["train", "--snaps", p(&missing), "--out", p(&f.root.join("x"))])), 2);
    assert_eq!(
        code(&run(&["train", "--snaps", p(&f.snaps), "--config", p(&missing.join("c.toml")), "--out", p(&f.root.join("x"))])),
        2
    );

    let csv = f.root.join("ratings.csv");
    assert_eq!(code(&run(&["ingest", "--in", p(&csv), "--out", p(&f.root.join("x")), "--split", "8,1"])), 3);
    assert_eq!(code(&run(&["ingest", "--in", p(&csv), "--out", p(&f.root.join("x")), "--snapshots", "6"])), 3);
    assert_eq!(code(&run(&["ingest", "--in", p(&csv), "--out", p(&f.root.join("x")), "--bogus"])), 3);
    assert_eq!(code(&run(&["frobnicate"])), 3);
    let bad_cfg = f.root.join("bad.toml");
    fs::write(&bad_cfg, "[run]\nlearning_rate = 0.1\n").unwrap();
    assert_eq!(
        code(&run(&["train", "--snaps", p(&f.snaps), "--config", p(&bad_cfg), "--out", p(&f.root.join("x"))])),
        3
    );
    assert_eq!(
        code(&run(&["train", "--snaps", p(&f.snaps), "--no-motif", "--warmup-epochs", "9", "--total-epochs", "3", "--out", p(&f.root.join("x"))])),
        3
    );
    let err = run(&["train", "--snaps", p(&f.snaps), "--no-motif", "--gcn-layers", "3", "--out", p(&f.root.join("x"))]);
    assert_eq!(code(&err), 3);
    assert!(String::from_utf8_lossy(&err.stderr).starts_with("error:"));

    let help = run(&["train", "--help"]);
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--lr", "--weight-decay", "--emb-dim", "--gcn-layers", "--dropout", "--warmup-epochs", "--total-epochs", "--repeats", "--beta", "--groups", "--feature-dim", "--seed", "--no-motif", "--no-sign", "--no-global", "--model", "--config"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn foreign_motif_bundle_is_rejected() {
    let f = fixture();
    let other = f.root.join("other");
    let csv = f.root.join("ratings.csv");
    ok(&["ingest", "--in", p(&csv), "--out", p(&other), "--snapshots", "6", "--split", "3,2,1"]);
    let x = f.root.join("x");
    let mut args = vec!["train", "--snaps", p(&other), "--motifs", p(&f.motifs), "--out", p(&x)];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&run(&args)), 3);
}
