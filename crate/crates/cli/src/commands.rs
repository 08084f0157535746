use crate::{CmdResult, Failure};
use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::json;
use ssv_core::data::synth::{self, Distribution};
use ssv_core::data::{ingest_file, read_dataset, write_dataset, DataStats, Dataset, RejectedRow};
use ssv_core::grammar::{parse_spec, RuleViolation, SpecError, SsvSpec};
use ssv_core::partition::{PartitionError, SplitStats};
use ssv_core::pipeline::{prepare, run_layout, LayoutMode, PipelineError};
use ssv_core::store::{build_indexes, BuildInput, StoreError};
use ssv_core::verify::{verify_layout, VerifyReport};
use std::fs;
use std::path::Path;
use std::time::Instant;

/// Circle marks over the synthetic `x`/`y`/`z` columns.
pub fn synthetic_spec_json(density_budget: u64) -> serde_json::Value {
    json!({
        "marks": {
            "cluster": {
                "mode": "circle",
                "aggregate": [
                    { "function": "count" },
                    { "function": "avg", "field": "z" },
                    { "function": "max", "field": "z" }
                ]
            },
            "hover": { "ranklist": { "topk": 3 }, "boundary": "convexhull" }
        },
        "layout": {
            "x": { "field": "x" },
            "y": { "field": "y" },
            "z": { "field": "z", "order": "descending" }
        },
        "data": { "source": "synthetic", "columns": [
            { "name": "x", "type": "float" },
            { "name": "y", "type": "float" },
            { "name": "z", "type": "float" }
        ] },
        "config": { "densityBudget": density_budget }
    })
}

/// K = 400: the default budget of 200 cannot be met by 80 px circles in a
/// 1600x900 viewport.
pub fn synthetic_spec() -> SsvSpec {
    parse_spec(&synthetic_spec_json(400).to_string()).expect("built-in spec is valid")
}

fn spec_failure(path: &Path, e: SpecError) -> Failure {
    Failure::user(anyhow!("{}: {e}", path.display()))
}

pub fn load_spec(path: &Path) -> CmdResult<SsvSpec> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::user)?;
    parse_spec(&raw).map_err(|e| spec_failure(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpecCheck {
    pub valid: bool,
    pub violations: Vec<RuleViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn validate_spec(path: &Path) -> CmdResult<SpecCheck> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::user)?;
    Ok(match parse_spec(&raw) {
        Ok(_) => SpecCheck { valid: true, violations: vec![], error: None },
        Err(e) => SpecCheck { valid: false, violations: e.violations().to_vec(), error: Some(e.to_string()) },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestSummary {
    pub stats: DataStats,
    pub rejected: Vec<RejectedRow>,
}

/// Reads the spec's declared columns from a CSV or NDJSON file.
pub fn ingest(input: &Path, spec: &SsvSpec) -> CmdResult<(Dataset, IngestSummary)> {
    let report = ingest_file(input, spec.data.format, &spec.data.columns).map_err(Failure::user)?;
    let stats = report
        .dataset
        .stats(&spec.layout.x.field, &spec.layout.y.field)
        .ok_or_else(|| Failure::user(anyhow!("x/y fields are not declared data columns")))?;
    Ok((report.dataset, IngestSummary { stats, rejected: report.rejected }))
}

pub fn is_dataset_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "ssvd")
}

/// Loads `.ssvd` files directly and ingests anything else per the spec.
pub fn load_dataset(path: &Path, spec: &SsvSpec) -> CmdResult<(Dataset, usize)> {
    if is_dataset_file(path) {
        let ds = read_dataset(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::user)?;
        Ok((ds, 0))
    } else {
        let (ds, summary) = ingest(path, spec)?;
        Ok((ds, summary.rejected.len()))
    }
}

pub fn write_output_dataset(path: &Path, ds: &Dataset) -> CmdResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::user)?;
    }
    let res = if path.extension().is_some_and(|e| e == "csv") {
        write_csv(path, ds)
    } else {
        write_dataset(path, ds).map_err(anyhow::Error::from)
    };
    res.with_context(|| format!("writing {}", path.display())).map_err(Failure::user)
}

fn write_csv(path: &Path, ds: &Dataset) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ds.columns.iter().map(|c| c.name.as_str()))?;
    for row in &ds.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn generate(dist: Distribution, n: usize, seed: u64) -> (Dataset, DataStats) {
    let ds = synth::generate(dist, n, seed);
    let stats = ds.stats("x", "y").expect("synthetic columns");
    (ds, stats)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    pub mode: LayoutMode,
    /// Overrides the spec's top-level merge count.
    pub merged_levels: Option<u32>,
    pub verify: bool,
}

/// Milliseconds per offline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Phases {
    pub kd_build: f64,
    pub redistribute: f64,
    pub parallel_cluster: f64,
    pub split_merge: f64,
    pub index_build: f64,
}

impl Phases {
    pub fn sum(&self) -> f64 {
        self.kd_build + self.redistribute + self.parallel_cluster + self.split_merge + self.index_build
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexReport {
    pub n: usize,
    pub dropped: usize,
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u64>,
    pub num_levels: u32,
    pub theta: f64,
    pub budget_feasible: bool,
    pub partitions: usize,
    pub clusters_per_level: Vec<usize>,
    pub phases: Phases,
    /// Wall time from plan compilation to the last table written.
    pub total_ms: f64,
    pub bytes_written: u64,
    pub split_stats: SplitStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Partition(PartitionError::Worker { .. } | PartitionError::ThreadPool(_)) => Failure::internal(e),
        other => Failure::user(other),
    }
}

fn store_failure(e: StoreError) -> Failure {
    match e {
        StoreError::Io { .. } => Failure::user(e),
        other => Failure::internal(other),
    }
}

/// Compile, lay out and index. Writes the tables under `out`.
pub fn index(spec: &SsvSpec, ds: &Dataset, out: &Path, opts: IndexOptions) -> CmdResult<IndexReport> {
    let start = Instant::now();
    let p = prepare(spec, ds).map_err(pipeline_failure)?;
    let layout = run_layout(&p, opts.mode).map_err(pipeline_failure)?;
    let t = Instant::now();
    let summary = build_indexes(
        BuildInput {
            levels: &layout.levels,
            tree: &layout.tree,
            plan: &p.plan,
            objects: &p.objects,
            columns: &ds.columns,
            merged_levels: opts.merged_levels.unwrap_or(p.plan.top_level_merge_count),
        },
        out,
    )
    .map_err(store_failure)?;
    let index_build = t.elapsed();
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    let lt = &layout.timings;
    let verify = opts.verify.then(|| verify_layout(&layout.levels, &p.objects, &p.plan, &p.schema));
    let (mode, workers, capacity) = match opts.mode {
        LayoutMode::Sequential => ("seq", None, None),
        LayoutMode::Distributed(d) => ("dist", Some(d.workers), Some(d.capacity)),
    };
    Ok(IndexReport {
        n: p.objects.len(),
        dropped: p.dropped,
        mode,
        workers,
        capacity,
        num_levels: p.plan.num_levels,
        theta: p.plan.theta,
        budget_feasible: p.plan.budget_feasible,
        partitions: layout.tree.partition_count(),
        clusters_per_level: layout.levels.iter().map(|l| l.clusters.len()).collect(),
        phases: Phases {
            kd_build: ms(lt.kd_build),
            redistribute: ms(lt.redistribute),
            parallel_cluster: ms(lt.parallel_cluster),
            split_merge: ms(lt.split_merge),
            index_build: ms(index_build),
        },
        total_ms,
        bytes_written: summary.bytes_written,
        split_stats: layout.split_stats,
        verify,
    })
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> CmdResult<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(Failure::internal)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display())).map_err(Failure::user)
}
