//! Motif bundle: `manifest.json` plus, per snapshot and graphlet type, a text
//! file of `u v count` lines (only edges with a nonzero count).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{count_motifs, EdgeCounts, MotifKind, MotifSeries, MotifSlice, NUM_MOTIFS};
use crate::data::SnapshotSeries;
use crate::{Error, Result};

pub const MOTIF_MANIFEST: &str = "manifest.json";
const FORMAT: &str = "trustgcn-motifs/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifSliceEntry {
    pub num_edges: usize,
    /// One file per type, in [`MotifKind::ALL`] order.
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifManifest {
    pub format: String,
    pub num_nodes: usize,
    pub types: Vec<String>,
    /// Content hash of the snapshot bundle the counts were taken from.
    pub snapshots_sha256: Option<String>,
    pub slices: Vec<MotifSliceEntry>,
}

/// Counts every snapshot of a series.
pub fn count_series(series: &SnapshotSeries) -> Result<Vec<MotifSlice>> {
    series.snapshots.iter().map(|s| count_motifs(&s.graph())).collect()
}

pub fn write_motif_bundle(
    slices: &[MotifSlice],
    dir: impl AsRef<Path>,
    snapshots_sha256: Option<String>,
) -> Result<MotifManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let num_nodes = slices.first().map_or(0, MotifSlice::num_nodes);
    let mut entries = Vec::with_capacity(slices.len());
    for (t, slice) in slices.iter().enumerate() {
        let mut files = Vec::with_capacity(NUM_MOTIFS);
        for kind in MotifKind::ALL {
            let name = format!("{t:03}.{}.txt", kind.name());
            let mut text = String::new();
            for (&(u, v), c) in slice.edges().iter().zip(slice.counts()) {
                let n = c[kind.index()];
                if n > 0 {
                    writeln!(text, "{u} {v} {n}").expect("string write");
                }
            }
            let path = dir.join(&name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            files.push(name);
        }
        entries.push(MotifSliceEntry {
            num_edges: slice.edges().len(),
            files,
        });
    }
    let manifest = MotifManifest {
        format: FORMAT.into(),
        num_nodes,
        types: MotifKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        snapshots_sha256,
        slices: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    let path = dir.join(MOTIF_MANIFEST);
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_motif_manifest(dir: impl AsRef<Path>) -> Result<MotifManifest> {
    let path = dir.as_ref().join(MOTIF_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: MotifManifest = serde_json::from_str(&text)?;
    if manifest.format != FORMAT {
        return Err(Error::Bundle(format!("unsupported format `{}`", manifest.format)));
    }
    Ok(manifest)
}

/// Reads counts back onto the edges of `series`; every listed edge must be a
/// snapshot edge.
pub fn read_motif_bundle(dir: impl AsRef<Path>, series: &SnapshotSeries) -> Result<MotifSeries> {
    let dir = dir.as_ref();
    let manifest = read_motif_manifest(dir)?;
    if manifest.slices.len() != series.len() || manifest.num_nodes != series.num_nodes() {
        return Err(Error::Bundle(format!(
            "motif bundle has {} slices over {} nodes, series has {} over {}",
            manifest.slices.len(),
            manifest.num_nodes,
            series.len(),
            series.num_nodes()
        )));
    }
    let mut slices = Vec::with_capacity(series.len());
    for (entry, snap) in manifest.slices.iter().zip(&series.snapshots) {
        let edges: Vec<(usize, usize)> = snap.edges().iter().map(|e| (e.u, e.v)).collect();
        if entry.num_edges != edges.len() || entry.files.len() != NUM_MOTIFS {
            return Err(Error::Bundle("motif slice does not match its snapshot".into()));
        }
        let mut counts: Vec<EdgeCounts> = vec![[0; NUM_MOTIFS]; edges.len()];
        for (k, file) in entry.files.iter().enumerate() {
            let path = dir.join(file);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in text.lines().enumerate() {
                let bad = || Error::Bundle(format!("{file}:{}: malformed line", i + 1));
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad());
                }
                let u: usize = f[0].parse().map_err(|_| bad())?;
                let v: usize = f[1].parse().map_err(|_| bad())?;
                let n: u32 = f[2].parse().map_err(|_| bad())?;
                let pos = edges
                    .binary_search(&(u, v))
                    .map_err(|_| Error::Bundle(format!("{file}:{}: ({u}, {v}) is not a snapshot edge", i + 1)))?;
                counts[pos][k] = n;
            }
        }
        slices.push(MotifSlice::new(series.num_nodes(), edges, counts)?);
    }
    Ok(MotifSeries::new(slices))
}
