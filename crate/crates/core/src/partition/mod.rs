//! Distributed layout over KD-tree partitions.

mod distributed;
mod kdtree;
mod split_merge;

pub use distributed::{
    distributed_cluster, plan_extent, DistOptions, DistributedLayout, PhaseTimings, SplitStats, DEFAULT_CAPACITY,
};
pub use kdtree::{build_kd_tree, Axis, KdManifestNode, KdNode, KdPartitionTree, NodeKind, PartitionInfo, Rect};
pub use split_merge::{merge_along_split, BandCluster, MergeOutcome, SplitLine};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("partition capacity must be at least 1")]
    InvalidCapacity,
    #[error("worker count must be at least 1")]
    InvalidWorkers,
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
    #[error("worker for partition {partition_id} failed on level {level}: {message}")]
    Worker { partition_id: u32, level: u32, message: String },
    #[error("bad partition manifest: {0}")]
    BadManifest(String),
}
