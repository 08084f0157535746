//! Layout core: distance, density bound, aggregation and clustering.

mod agg;
mod boundary;
mod cluster;
mod geometry;
mod nn;

pub use agg::{merge_agg, AggSchema, AggState, MeasureStats};
pub use boundary::{convex_hull, Boundary};
pub use cluster::{cluster_levels, cluster_levels_with, ClusterRecord, LayoutContext, LevelLayout};
pub use geometry::{ncd, pack_bound, solve_theta, LayoutError, ThetaSolution, THETA_MIN, THETA_TOLERANCE};
pub use nn::{nearest_neighbor_ncd, NcdGrid, Neighbor};
