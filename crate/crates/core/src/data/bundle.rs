//! Snapshot bundle: a directory holding `manifest.json`, `nodes.txt` and, per
//! snapshot, an `NNN.edges` file (`u v weight sign label`, one undirected edge
//! per line, `weight` = summed rating) and an `NNN.ratings` file
//! (`source target rating`, one directed rating per line).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::snapshot::{Binning, DirectedRating, LabeledEdge, Snapshot, SnapshotSeries, Split};
use crate::{Error, Result};

pub const SNAPSHOT_MANIFEST: &str = "manifest.json";
const FORMAT: &str = "trustgcn-snapshots/1";
const NODES_FILE: &str = "nodes.txt";

/// Where a bundle's events came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub path: String,
    pub sha256: String,
    pub rows_read: usize,
    pub self_loops_dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub start: i64,
    pub end: i64,
    pub edges_file: String,
    pub ratings_file: String,
    pub num_edges: usize,
    pub num_ratings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub format: String,
    pub num_nodes: usize,
    pub binning: Binning,
    pub split: Split,
    pub snapshots: Vec<SnapshotEntry>,
    pub source: Option<SourceInfo>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `series` under `dir` (created if needed). Output is a pure function
/// of the inputs, so rewriting an unchanged series is byte-identical.
pub fn write_snapshot_bundle(
    series: &SnapshotSeries,
    dir: impl AsRef<Path>,
    source: Option<SourceInfo>,
) -> Result<SnapshotManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut nodes = String::new();
    for id in &series.node_ids {
        writeln!(nodes, "{id}").expect("string write");
    }
    write_file(&dir.join(NODES_FILE), &nodes)?;

    let mut entries = Vec::with_capacity(series.len());
    for (t, snap) in series.snapshots.iter().enumerate() {
        let edges_file = format!("{t:03}.edges");
        let ratings_file = format!("{t:03}.ratings");
        let mut text = String::new();
        for e in snap.edges() {
            let sign = if e.is_positive() { 1 } else { -1 };
            let label = e.label().class_index();
            writeln!(text, "{} {} {} {} {}", e.u, e.v, e.rating_sum, sign, label).expect("string write");
        }
        write_file(&dir.join(&edges_file), &text)?;
        let mut text = String::new();
        for r in snap.ratings() {
            writeln!(text, "{} {} {}", r.source, r.target, r.rating).expect("string write");
        }
        write_file(&dir.join(&ratings_file), &text)?;
        entries.push(SnapshotEntry {
            start: snap.start,
            end: snap.end,
            edges_file,
            ratings_file,
            num_edges: snap.edges().len(),
            num_ratings: snap.ratings().len(),
        });
    }

    let manifest = SnapshotManifest {
        format: FORMAT.to_string(),
        num_nodes: series.num_nodes(),
        binning: series.binning,
        split: series.split.clone(),
        snapshots: entries,
        source,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_file(&dir.join(SNAPSHOT_MANIFEST), &json)?;
    Ok(manifest)
}

fn fields<'a>(line: &'a str, n: usize, file: &str, line_no: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != n {
        return Err(Error::Bundle(format!(
            "{file}:{line_no}: expected {n} fields, found {}",
            parts.len()
        )));
    }
    Ok(parts)
}

fn number<T: std::str::FromStr>(s: &str, file: &str, line_no: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Bundle(format!("{file}:{line_no}: bad number `{s}`")))
}

pub fn read_snapshot_bundle(dir: impl AsRef<Path>) -> Result<(SnapshotSeries, SnapshotManifest)> {
    let dir = dir.as_ref();
    let manifest: SnapshotManifest = serde_json::from_str(&read_file(&dir.join(SNAPSHOT_MANIFEST))?)?;
    if manifest.format != FORMAT {
        return Err(Error::Bundle(format!("unsupported format `{}`", manifest.format)));
    }
    let node_ids = read_file(&dir.join(NODES_FILE))?
        .lines()
        .enumerate()
        .map(|(i, l)| number::<u64>(l.trim(), NODES_FILE, i + 1))
        .collect::<Result<Vec<_>>>()?;
    if node_ids.len() != manifest.num_nodes {
        return Err(Error::Bundle(format!(
            "{} node ids for {} nodes",
            node_ids.len(),
            manifest.num_nodes
        )));
    }
    let n = manifest.num_nodes;
    let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
    for entry in &manifest.snapshots {
        let mut edges = Vec::with_capacity(entry.num_edges);
        let file = &entry.edges_file;
        for (i, line) in read_file(&dir.join(file))?.lines().enumerate() {
            let f = fields(line, 5, file, i + 1)?;
            let edge = LabeledEdge {
                u: number(f[0], file, i + 1)?,
                v: number(f[1], file, i + 1)?,
                rating_sum: number(f[2], file, i + 1)?,
            };
            let sign: i32 = number(f[3], file, i + 1)?;
            let label: usize = number(f[4], file, i + 1)?;
            let expect_sign = if edge.is_positive() { 1 } else { -1 };
            let expect_label = edge.label().class_index();
            if sign != expect_sign || label != expect_label {
                return Err(Error::Bundle(format!(
                    "{file}:{}: sign/label inconsistent with weight {}",
                    i + 1,
                    edge.rating_sum
                )));
            }
            edges.push(edge);
        }
        let mut ratings = Vec::with_capacity(entry.num_ratings);
        let file = &entry.ratings_file;
        for (i, line) in read_file(&dir.join(file))?.lines().enumerate() {
            let f = fields(line, 3, file, i + 1)?;
            ratings.push(DirectedRating {
                source: number(f[0], file, i + 1)?,
                target: number(f[1], file, i + 1)?,
                rating: number(f[2], file, i + 1)?,
            });
        }
        if edges.len() != entry.num_edges || ratings.len() != entry.num_ratings {
            return Err(Error::Bundle(format!("{} does not match manifest counts", entry.edges_file)));
        }
        let snap = Snapshot::from_parts(n, entry.start, entry.end, edges, ratings)
            .map_err(|e| Error::Bundle(format!("{}: {e}", entry.edges_file)))?;
        snapshots.push(snap);
    }
    if snapshots.windows(2).any(|w| w[0].start >= w[1].start) {
        return Err(Error::Bundle("snapshot windows are not strictly increasing".into()));
    }
    let series = SnapshotSeries {
        node_ids,
        binning: manifest.binning,
        snapshots,
        split: manifest.split.clone(),
    };
    Ok((series, manifest))
}
