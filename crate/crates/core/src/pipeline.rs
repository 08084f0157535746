//! Spec + dataset → plan → layout, shared by the CLI and tests.

use crate::data::{Dataset, PointObject};
use crate::grammar::{compile_plan, LayoutPlan, PlanError, SsvSpec};
use crate::layout::{cluster_levels, AggSchema, LevelLayout};
use crate::partition::{
    distributed_cluster, plan_extent, DistOptions, KdPartitionTree, PartitionError, PhaseTimings, SplitStats,
};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("no rows inside the layout extent")]
    NoObjects,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub plan: LayoutPlan,
    pub objects: Vec<PointObject>,
    pub schema: AggSchema,
    /// Rows dropped for missing coordinates or lying outside the extent.
    pub dropped: usize,
}

pub fn prepare(spec: &SsvSpec, ds: &Dataset) -> Result<Prepared, PipelineError> {
    let stats = ds
        .stats(&spec.layout.x.field, &spec.layout.y.field)
        .ok_or_else(|| PlanError::UnknownColumn(format!("{} or {}", spec.layout.x.field, spec.layout.y.field)))?;
    let plan = compile_plan(spec, &stats)?;
    let (objects, dropped) = plan.objects(ds)?;
    if objects.is_empty() {
        return Err(PipelineError::NoObjects);
    }
    let schema = AggSchema::resolve(&plan, &ds.columns)?;
    Ok(Prepared { plan, objects, schema, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutMode {
    Sequential,
    Distributed(DistOptions),
}

#[derive(Debug, Clone)]
pub struct LayoutOutput {
    pub levels: Vec<LevelLayout>,
    /// A single partition for sequential builds.
    pub tree: KdPartitionTree,
    /// Sequential builds report all clustering time as `parallel_cluster`.
    pub timings: PhaseTimings,
    /// All zero for sequential builds.
    pub split_stats: SplitStats,
}

pub fn run_layout(p: &Prepared, mode: LayoutMode) -> Result<LayoutOutput, PipelineError> {
    match mode {
        LayoutMode::Sequential => {
            let t = Instant::now();
            let levels = cluster_levels(&p.objects, &p.plan, &p.schema);
            let timings = PhaseTimings { parallel_cluster: t.elapsed(), ..Default::default() };
            let tree = KdPartitionTree::single(p.objects.len(), plan_extent(&p.plan));
            Ok(LayoutOutput { levels, tree, timings, split_stats: SplitStats::default() })
        }
        LayoutMode::Distributed(opts) => {
            let d = distributed_cluster(&p.objects, &p.plan, &p.schema, opts)?;
            Ok(LayoutOutput { levels: d.levels, tree: d.tree, timings: d.timings, split_stats: d.split_stats })
        }
    }
}
