//! Core engine for scalable scatterplot visualizations.
//!
//! The pipeline is split in two phases. Offline, a declarative JSON spec is
//! compiled into a [`LayoutPlan`](grammar::LayoutPlan), objects are clustered
//! bottom-up into zoom levels (sequentially or over KD-tree partitions), and
//! the resulting levels are persisted as per-partition tables. Online, a
//! [`Store`](store::Store) answers viewport rectangle queries against those
//! tables through in-memory R-trees.

mod codec;
pub mod data;
pub mod grammar;
pub mod layout;
pub mod partition;
pub mod pipeline;
pub mod store;
pub mod verify;

pub use data::{ColumnDef, ColumnType, DataStats, Dataset, PointObject, Value};
pub use grammar::{compile_plan, parse_spec, LayoutPlan, SsvSpec};
pub use layout::{cluster_levels, ClusterRecord, LevelLayout};
pub use partition::{distributed_cluster, KdPartitionTree};
pub use store::{build_indexes, Store, StoredCluster, Viewport};
