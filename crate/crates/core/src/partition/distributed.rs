//! Partitioned layout: per-partition clustering in parallel, then merging
//! across KD splits from the deepest level of the tree up to the root.

use super::kdtree::{build_kd_tree, KdPartitionTree, NodeKind, Rect};
use super::split_merge::{merge_along_split, BandCluster, SplitLine};
use super::PartitionError;
use crate::data::PointObject;
use crate::grammar::LayoutPlan;
use crate::layout::{AggSchema, ClusterRecord, LayoutContext, LevelLayout};
use rayon::prelude::*;
use serde::Serialize;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistOptions {
    /// Maximum objects per partition.
    pub capacity: u64,
    pub workers: usize,
}

impl Default for DistOptions {
    fn default() -> Self {
        Self { capacity: DEFAULT_CAPACITY, workers: rayon::current_num_threads() }
    }
}

pub const DEFAULT_CAPACITY: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    #[serde(serialize_with = "as_ms")]
    pub kd_build: Duration,
    #[serde(serialize_with = "as_ms")]
    pub redistribute: Duration,
    #[serde(serialize_with = "as_ms")]
    pub parallel_cluster: Duration,
    #[serde(serialize_with = "as_ms")]
    pub split_merge: Duration,
}

fn as_ms<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitStats {
    pub tasks: usize,
    pub band_candidates: usize,
    pub merges: usize,
    pub repair_merges: usize,
}

impl SplitStats {
    fn add(&mut self, o: SplitStats) {
        self.tasks += o.tasks;
        self.band_candidates += o.band_candidates;
        self.merges += o.merges;
        self.repair_merges += o.repair_merges;
    }
}

#[derive(Debug, Clone)]
pub struct DistributedLayout {
    /// Top level first, as in the sequential build.
    pub levels: Vec<LevelLayout>,
    pub tree: KdPartitionTree,
    pub timings: PhaseTimings,
    pub split_stats: SplitStats,
}

/// Root extent for the KD tree: the plan's raw extent.
pub fn plan_extent(plan: &LayoutPlan) -> Rect {
    Rect::new(plan.x_extent[0], plan.y_extent[0], plan.x_extent[1], plan.y_extent[1])
}

pub fn distributed_cluster(
    objects: &[PointObject],
    plan: &LayoutPlan,
    schema: &AggSchema,
    opts: DistOptions,
) -> Result<DistributedLayout, PartitionError> {
    if opts.workers == 0 {
        return Err(PartitionError::InvalidWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| PartitionError::ThreadPool(e.to_string()))?;
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let tree = build_kd_tree(objects, opts.capacity, plan_extent(plan))?;
    timings.kd_build = t.elapsed();

    let t = Instant::now();
    let ctx = LayoutContext::new(plan, objects, schema);
    let mut seeds: Vec<Vec<u32>> = vec![Vec::new(); tree.partition_count()];
    for i in ctx.importance_sorted() {
        seeds[tree.assignment[i as usize] as usize].push(i);
    }
    timings.redistribute = t.elapsed();

    let mut split_stats = SplitStats::default();
    let mut levels = Vec::with_capacity(plan.num_levels as usize);
    let mut parts: Vec<Vec<ClusterRecord>> = Vec::new();
    for level in (1..=plan.num_levels).rev() {
        let t = Instant::now();
        let done = if level == plan.num_levels {
            // Singletons of the fake bottom level are built by the workers.
            run_partitions(&pool, std::mem::take(&mut seeds), level, |idx, m| {
                let v = idx.into_iter().map(|i| ctx.singleton(i)).collect();
                ctx.cluster_pass(v, level, m)
            })?
        } else {
            run_partitions(&pool, parts, level, |v, m| ctx.cluster_pass(v, level, m))?
        };
        let mut merges = Vec::new();
        parts = done
            .into_iter()
            .map(|(v, m)| {
                merges.extend(m);
                v
            })
            .collect();
        timings.parallel_cluster += t.elapsed();

        let t = Instant::now();
        for depth in (0..tree.split_depths()).rev() {
            split_stats.add(merge_depth(&pool, &ctx, &tree, depth, level, &mut parts, &mut merges)?);
        }
        timings.split_merge += t.elapsed();

        let mut all: Vec<ClusterRecord> = parts.iter().flatten().cloned().collect();
        ctx.sort_clusters(&mut all);
        levels.push(LevelLayout { level, clusters: all, merges });
    }
    levels.reverse();
    Ok(DistributedLayout { levels, tree, timings, split_stats })
}

/// Clusters of one partition and the merges that made them.
type PartitionOutput = (Vec<ClusterRecord>, Vec<[u32; 2]>);

/// One task per partition, at most `workers` at a time.
fn run_partitions<T: Send>(
    pool: &rayon::ThreadPool,
    inputs: Vec<T>,
    level: u32,
    f: impl Fn(T, &mut Vec<[u32; 2]>) -> Vec<ClusterRecord> + Sync,
) -> Result<Vec<PartitionOutput>, PartitionError> {
    pool.install(|| {
        inputs
            .into_par_iter()
            .enumerate()
            .map(|(pid, v)| {
                catch_unwind(AssertUnwindSafe(|| {
                    let mut m = Vec::new();
                    let out = f(v, &mut m);
                    (out, m)
                }))
                .map_err(|e| PartitionError::Worker {
                    partition_id: pid as u32,
                    level,
                    message: panic_message(&e),
                })
            })
            .collect()
    })
}

/// Runs every split at `depth` concurrently. Splits at one depth cover
/// disjoint leaf ranges, so each task gets its own slice of partitions.
fn merge_depth(
    pool: &rayon::ThreadPool,
    ctx: &LayoutContext<'_>,
    tree: &KdPartitionTree,
    depth: u32,
    level: u32,
    parts: &mut [Vec<ClusterRecord>],
    merges: &mut Vec<[u32; 2]>,
) -> Result<SplitStats, PartitionError> {
    let mut tasks = Vec::new();
    let mut rest = parts;
    let mut offset = 0u32;
    for s in tree.splits_at_depth(depth) {
        let node = &tree.nodes[s as usize];
        let NodeKind::Split { axis, split_value, .. } = node.kind else { unreachable!() };
        let (_, tail) = std::mem::take(&mut rest).split_at_mut((node.first_leaf - offset) as usize);
        let (mine, tail) = tail.split_at_mut((node.end_leaf - node.first_leaf) as usize);
        rest = tail;
        offset = node.end_leaf;
        tasks.push((node.first_leaf, SplitLine::new(ctx, axis, split_value, level), mine));
    }
    let results: Vec<(SplitStats, Vec<[u32; 2]>)> = pool.install(|| {
        tasks
            .into_par_iter()
            .map(|(first, line, leaves)| {
                catch_unwind(AssertUnwindSafe(|| merge_split(ctx, &line, first, leaves))).map_err(|e| {
                    PartitionError::Worker { partition_id: first, level, message: panic_message(&e) }
                })
            })
            .collect::<Result<_, _>>()
    })?;
    let mut stats = SplitStats::default();
    for (s, m) in results {
        stats.add(s);
        merges.extend(m);
    }
    Ok(stats)
}

fn merge_split(
    ctx: &LayoutContext<'_>,
    line: &SplitLine,
    first: u32,
    leaves: &mut [Vec<ClusterRecord>],
) -> (SplitStats, Vec<[u32; 2]>) {
    let mut band = Vec::new();
    for (k, leaf) in leaves.iter_mut().enumerate() {
        let (inside, outside): (Vec<_>, Vec<_>) = std::mem::take(leaf).into_iter().partition(|c| line.in_band(c));
        *leaf = outside;
        band.extend(inside.into_iter().map(|cluster| BandCluster { partition: first + k as u32, cluster }));
    }
    if band.is_empty() {
        return (SplitStats { tasks: 1, ..Default::default() }, vec![]);
    }
    let candidates = band.len();
    let out = merge_along_split(ctx, line, band);
    let mut touched = vec![false; leaves.len()];
    for s in out.survivors {
        let k = (s.partition - first) as usize;
        leaves[k].push(s.cluster);
        touched[k] = true;
    }
    for (leaf, t) in leaves.iter_mut().zip(touched) {
        if t {
            ctx.sort_clusters(leaf);
        }
    }
    let stats =
        SplitStats { tasks: 1, band_candidates: candidates, merges: out.merges.len(), repair_merges: out.repair_merges };
    (stats, out.merges.into_iter().map(|(a, b)| [a, b]).collect())
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".to_string()
    }
}
