//! Index-time and fetch-latency measurements over a pan/zoom trace.
//!
//! The trace starts centred on level 1. On each level it pans to the
//! densest viewport-sized window, then zooms in about the viewport centre;
//! after the bottom level it zooms back out to level 1.
//!
//! Unless the spec sets it, the level count is held fixed across sizes.

use crate::commands::{generate, index, write_json, IndexOptions, IndexReport, Phases};
use crate::{CmdResult, Failure};
use anyhow::Context;
use serde::Serialize;
use ssv_core::data::synth::{Distribution, PLANE};
use ssv_core::data::DataStats;
use ssv_core::grammar::{compile_plan, SsvSpec};
use ssv_core::pipeline::LayoutMode;
use ssv_core::{Store, Viewport};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub dist: Distribution,
    pub seed: u64,
    pub mode: LayoutMode,
    pub spec: SsvSpec,
    /// Builds go to `<work_dir>/n_<n>`.
    pub work_dir: PathBuf,
    /// Trace replays per size.
    pub repeats: usize,
    /// Build rounds; each size reports its fastest build, since
    /// interference from other load only ever adds time.
    pub index_repeats: usize,
    /// Fetches per pan.
    pub pan_steps: usize,
    pub keep_builds: bool,
}

/// The spec with `numLevels` pinned to what the largest size would get, so
/// every size in the series builds the same number of levels. Specs that
/// set `numLevels` are left alone.
pub fn fixed_level_spec(spec: &SsvSpec, sizes: &[usize]) -> CmdResult<SsvSpec> {
    let mut spec = spec.clone();
    let Some(&n) = sizes.iter().max() else {
        return Ok(spec);
    };
    if spec.config.num_levels.is_none() {
        let stats = DataStats { n, x_min: 0.0, x_max: PLANE, y_min: 0.0, y_max: PLANE };
        let plan = compile_plan(&spec, &stats).map_err(Failure::user)?;
        spec.config.num_levels = Some(plan.num_levels);
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyStats {
    pub requests: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub n: usize,
    pub num_levels: u32,
    pub partitions: usize,
    pub phases: Phases,
    pub index_ms: f64,
    pub fetch: LatencyStats,
    pub max_rows_per_fetch: usize,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn latency_stats(samples: &[f64]) -> LatencyStats {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    LatencyStats {
        requests: s.len(),
        p50_ms: percentile(&s, 0.50),
        p95_ms: percentile(&s, 0.95),
        max_ms: s.last().copied().unwrap_or(0.0),
        mean_ms: if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 },
    }
}

fn clamp_to_canvas(store: &Store, level: u32, x: f64, y: f64) -> Viewport {
    let plan = store.plan();
    let (cw, ch) = plan.level_canvas(level);
    let (w, h) = (plan.viewport_width, plan.viewport_height);
    let x = x.clamp(0.0, (cw - w).max(0.0));
    let y = y.clamp(0.0, (ch - h).max(0.0));
    Viewport::new(level, x, y, x + w, y + h)
}

fn centred(store: &Store, level: u32, cx: f64, cy: f64) -> Viewport {
    let plan = store.plan();
    clamp_to_canvas(store, level, cx - plan.viewport_width / 2.0, cy - plan.viewport_height / 2.0)
}

/// The viewport-sized window holding the most cluster centroids, on a grid
/// of half-viewport cells.
pub fn densest_window(store: &Store, level: u32) -> Viewport {
    let plan = store.plan();
    let (cw, ch) = plan.level_canvas(level);
    let (sw, sh) = (plan.viewport_width / 2.0, plan.viewport_height / 2.0);
    let nx = (cw / sw).ceil().max(1.0) as usize;
    let ny = (ch / sh).ceil().max(1.0) as usize;
    let mut grid = vec![0usize; nx * ny];
    for r in store.level_rows(level).expect("level exists") {
        let i = ((r.cx / sw) as usize).min(nx - 1);
        let j = ((r.cy / sh) as usize).min(ny - 1);
        grid[j * nx + i] += 1;
    }
    let cell = |i: usize, j: usize| if i < nx && j < ny { grid[j * nx + i] } else { 0 };
    let mut best = (0, 0, 0);
    for j in 0..ny {
        for i in 0..nx {
            let c = cell(i, j) + cell(i + 1, j) + cell(i, j + 1) + cell(i + 1, j + 1);
            if c > best.0 {
                best = (c, i, j);
            }
        }
    }
    clamp_to_canvas(store, level, best.1 as f64 * sw, best.2 as f64 * sh)
}

pub fn trace(store: &Store, pan_steps: usize) -> Vec<Viewport> {
    let plan = store.plan();
    let zf = plan.zoom_factor;
    let (cw, ch) = plan.level_canvas(1);
    let mut cur = centred(store, 1, cw / 2.0, ch / 2.0);
    let mut out = vec![cur];
    let centre = |v: &Viewport| ((v.x_min + v.x_max) / 2.0, (v.y_min + v.y_max) / 2.0);
    for level in 1..=store.num_levels() {
        if level > 1 {
            let (x, y) = centre(&cur);
            cur = centred(store, level, x * zf, y * zf);
            out.push(cur);
        }
        let target = densest_window(store, level);
        for s in 1..=pan_steps {
            let t = s as f64 / pan_steps as f64;
            let x = cur.x_min + (target.x_min - cur.x_min) * t;
            let y = cur.y_min + (target.y_min - cur.y_min) * t;
            out.push(clamp_to_canvas(store, level, x, y));
        }
        cur = target;
    }
    for level in (1..store.num_levels()).rev() {
        let (x, y) = centre(&cur);
        cur = centred(store, level, x / zf, y / zf);
        out.push(cur);
    }
    out
}

/// Times the server's fetch handler body, JSON encoding included.
/// Returns per-request milliseconds and the largest result size.
pub fn replay(store: &Store, viewports: &[Viewport], repeats: usize) -> CmdResult<(Vec<f64>, usize)> {
    let columns: Vec<String> = store.manifest().columns.iter().map(|c| c.name.clone()).collect();
    let mut samples = Vec::with_capacity(viewports.len() * repeats);
    let mut max_rows = 0;
    for _ in 0..repeats {
        for v in viewports {
            let t = Instant::now();
            let resp = ssv_server::fetch(store, &columns, v).map_err(|e| Failure::internal(anyhow::anyhow!("{e}")))?;
            let body = serde_json::to_vec(&resp).map_err(Failure::internal)?;
            samples.push(t.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(body);
            max_rows = max_rows.max(resp.clusters.len());
        }
    }
    Ok((samples, max_rows))
}

fn build_once(opts: &BenchOptions, n: usize, dir: &Path) -> CmdResult<IndexReport> {
    let (ds, _) = generate(opts.dist, n, opts.seed);
    if dir.exists() {
        fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display())).map_err(Failure::user)?;
    }
    index(&opts.spec, &ds, dir, IndexOptions { mode: opts.mode, merged_levels: None, verify: false })
}

fn finish(opts: &BenchOptions, n: usize, dir: &Path, build: IndexReport) -> CmdResult<BenchReport> {
    let store = Store::open(dir).map_err(Failure::internal)?;
    let viewports = trace(&store, opts.pan_steps);
    let (samples, max_rows) = replay(&store, &viewports, opts.repeats)?;
    drop(store);
    if !opts.keep_builds {
        fs::remove_dir_all(dir).with_context(|| format!("removing {}", dir.display())).map_err(Failure::user)?;
    }
    Ok(BenchReport {
        n,
        num_levels: build.num_levels,
        partitions: build.partitions,
        phases: build.phases,
        index_ms: build.total_ms,
        fetch: latency_stats(&samples),
        max_rows_per_fetch: max_rows,
    })
}

/// Builds every size once per round, keeping each size's fastest build,
/// then replays the trace on the final build of each size. Interleaving
/// the rounds spreads slow periods of a shared machine over all sizes.
pub fn run_bench(opts: &BenchOptions) -> CmdResult<Vec<BenchReport>> {
    let opts = BenchOptions { spec: fixed_level_spec(&opts.spec, &opts.sizes)?, ..opts.clone() };
    let rounds = opts.index_repeats.max(1);
    let mut best: Vec<Option<IndexReport>> = vec![None; opts.sizes.len()];
    let mut out = Vec::with_capacity(opts.sizes.len());
    for round in 0..rounds {
        for (i, &n) in opts.sizes.iter().enumerate() {
            let dir = opts.work_dir.join(format!("n_{n}"));
            let r = build_once(&opts, n, &dir)?;
            if best[i].as_ref().is_none_or(|b| r.total_ms < b.total_ms) {
                best[i] = Some(r);
            }
            if round + 1 == rounds {
                out.push(finish(&opts, n, &dir, best[i].take().expect("at least one round"))?);
            }
        }
    }
    Ok(out)
}

pub fn to_csv(reports: &[BenchReport]) -> String {
    let mut s = String::from(
        "n,num_levels,partitions,kd_build_ms,redistribute_ms,parallel_cluster_ms,split_merge_ms,index_build_ms,index_ms,requests,p50_ms,p95_ms,max_ms\n",
    );
    for r in reports {
        let p = &r.phases;
        s.push_str(&format!(
            "{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{},{:.4},{:.4},{:.4}\n",
            r.n,
            r.num_levels,
            r.partitions,
            p.kd_build,
            p.redistribute,
            p.parallel_cluster,
            p.split_merge,
            p.index_build,
            r.index_ms,
            r.fetch.requests,
            r.fetch.p50_ms,
            r.fetch.p95_ms,
            r.fetch.max_ms
        ));
    }
    s
}

/// Writes `bench.json` and `bench.csv` into `dir`.
pub fn write_reports(dir: &Path, reports: &[BenchReport]) -> CmdResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::user)?;
    write_json(&dir.join("bench.json"), &reports)?;
    let csv = dir.join("bench.csv");
    fs::write(&csv, to_csv(reports)).with_context(|| format!("writing {}", csv.display())).map_err(Failure::user)
}
