//! Rating ingestion, snapshot construction, node features and the snapshot
//! bundle format.

mod bundle;
mod events;
mod features;
mod snapshot;

pub use bundle::{read_snapshot_bundle, write_snapshot_bundle, SnapshotManifest, SourceInfo, SNAPSHOT_MANIFEST};
pub use events::{parse_ratings, parse_ratings_from, RatingEvent, RatingLog, MAX_RATING};
pub use features::{build_features, NodeFeatures, RAW_FEATURES};
pub use snapshot::{
    build_snapshots, Binning, DirectedRating, EdgeLabel, LabeledEdge, Snapshot, SnapshotSeries, Split,
    SplitSpec,
};
