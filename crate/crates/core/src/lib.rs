//! Motif-aware, group-signed temporal graph convolution for edge
//! classification on signed trust networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: rating CSV ingestion, snapshot construction, node features and
//!   the on-disk snapshot bundle.
//! - [`graphlet`]: per-edge counts of the eight connected graphlets on three
//!   and four nodes, with a brute-force oracle.
//! - [`autodiff`]: a small dense-matrix engine with reverse-mode
//!   differentiation and an Adam optimizer.
//! - [`group`]: latent-group attentions, assignment matrices and windowed
//!   global embeddings.
//! - [`model`]: signed aggregation, motif embedding, dynamic embeddings and the
//!   edge classifier.
//! - [`trainer`]: training loop, metrics, the top-5 protocol, ablations and
//!   the static GCN baseline.
//!
//! The `book/` directory at the repository root walks through each stage; its
//! code listings are compiled and run as doc-tests of this crate.

pub mod autodiff;
pub mod data;
mod digest;
mod error;
pub mod graph;
pub mod graphlet;
pub mod group;
pub mod model;
pub mod params;
pub mod sparse;
pub mod trainer;

pub use digest::{sha256_dir, sha256_file, sha256_hex};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/snapshots.md")]
    mod snapshots {}
    #[doc = include_str!("../../../book/src/graphlets.md")]
    mod graphlets {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
