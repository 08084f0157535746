//! Brute-force checks of the layout invariants.
//!
//! These are oracles: they avoid the spatial index and the aggregate merge
//! code, and are quadratic where that keeps them obviously correct.

use crate::data::{importance_order, PointObject};
use crate::grammar::LayoutPlan;
use crate::layout::{ncd, AggSchema, AggState, LevelLayout};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use std::collections::BTreeMap;

/// Slack on the θ lower bound.
pub const OVERLAP_TOLERANCE: f64 = 1e-9;
/// Relative tolerance for float sums.
pub const SUM_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, failures: Vec<String>, ok_detail: String) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            ok_detail
        } else {
            let more = if failures.len() > 5 { format!(" (+{} more)", failures.len() - 5) } else { String::new() };
            format!("{}{more}", failures[..failures.len().min(5)].join("; "))
        };
        Self { name, passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every check.
pub fn verify_layout(
    levels: &[LevelLayout],
    objects: &[PointObject],
    plan: &LayoutPlan,
    schema: &AggSchema,
) -> VerifyReport {
    VerifyReport {
        checks: vec![
            check_overlap(levels, plan),
            check_density(levels, plan),
            check_zoom_consistency(levels),
            check_conservation(levels, objects, schema),
            check_representatives(levels, objects, plan),
        ],
    }
}

/// Smallest ncd over all pairs, `None` with fewer than two centroids.
pub fn min_pairwise_ncd(centroids: &[[f64; 2]], wb: f64, hb: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let d = ncd(centroids[i], centroids[j], wb, hb);
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

pub fn check_overlap(levels: &[LevelLayout], plan: &LayoutPlan) -> CheckOutcome {
    let mut failures = Vec::new();
    let mut global = f64::INFINITY;
    for l in levels {
        let pts: Vec<[f64; 2]> = l.clusters.iter().map(|c| c.centroid()).collect();
        if let Some(d) = min_pairwise_ncd(&pts, plan.mark_width, plan.mark_height) {
            global = global.min(d);
            if d < plan.theta - OVERLAP_TOLERANCE {
                failures.push(format!("level {}: min ncd {d} < θ {}", l.level, plan.theta));
            }
        }
    }
    CheckOutcome::new("overlap", failures, format!("min ncd {global:.6} ≥ θ {:.6}", plan.theta))
}

/// Largest number of points in any half-open `w × h` window.
///
/// Any window can be slid right and down until its left and top edges
/// touch a contained point without losing one, so anchoring at every
/// point's x and every point's y covers every window.
pub fn max_window_count(points: &[[f64; 2]], w: f64, h: f64) -> usize {
    let mut by_x: Vec<[f64; 2]> = points.to_vec();
    by_x.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut best = 0;
    let mut hi = 0;
    let mut ys: Vec<f64> = Vec::new();
    for lo in 0..by_x.len() {
        if lo > 0 && by_x[lo][0] == by_x[lo - 1][0] {
            continue;
        }
        let a = by_x[lo][0];
        hi = hi.max(lo);
        while hi < by_x.len() && by_x[hi][0] < a + w {
            hi += 1;
        }
        if hi - lo <= best {
            continue;
        }
        ys.clear();
        ys.extend(by_x[lo..hi].iter().map(|p| p[1]));
        ys.sort_by(f64::total_cmp);
        let mut top = 0;
        for (k, &b) in ys.iter().enumerate() {
            while top < ys.len() && ys[top] < b + h {
                top += 1;
            }
            best = best.max(top - k);
        }
    }
    best
}

pub fn check_density(levels: &[LevelLayout], plan: &LayoutPlan) -> CheckOutcome {
    let mut failures = Vec::new();
    let mut worst = 0;
    for l in levels {
        let pts: Vec<[f64; 2]> = l.clusters.iter().map(|c| c.centroid()).collect();
        let m = max_window_count(&pts, plan.viewport_width, plan.viewport_height);
        worst = worst.max(m);
        if plan.budget_feasible && m as u64 > plan.density_budget {
            failures.push(format!("level {}: {m} centroids in one viewport > K {}", l.level, plan.density_budget));
        }
    }
    let note = if plan.budget_feasible { "" } else { " (budget infeasible, bound not enforced)" };
    CheckOutcome::new("density", failures, format!("max {worst} per viewport, K {}{note}", plan.density_budget))
}

pub fn check_zoom_consistency(levels: &[LevelLayout]) -> CheckOutcome {
    let mut failures = Vec::new();
    for w in levels.windows(2) {
        let lower: FxHashSet<u32> = w[1].clusters.iter().map(|c| c.rep).collect();
        let missing = w[0].clusters.iter().filter(|c| !lower.contains(&c.rep)).count();
        if missing > 0 {
            failures.push(format!("{missing} representatives of level {} absent from level {}", w[0].level, w[1].level));
        }
    }
    CheckOutcome::new("zoom_consistency", failures, format!("{} levels nested", levels.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Direct {
    count: u64,
    sum: f64,
    min: f64,
    max: f64,
    sqrsum: f64,
}

/// Aggregates every object directly, grouped by dimension values.
fn direct_aggregate(objects: &[PointObject], schema: &AggSchema) -> BTreeMap<Vec<String>, Vec<Direct>> {
    let mut out: BTreeMap<Vec<String>, Vec<Direct>> = BTreeMap::new();
    for o in objects {
        let key: Vec<String> = schema.dims.iter().map(|&i| o.payload[i].key_string()).collect();
        let slot = out.entry(key).or_insert_with(|| {
            vec![Direct { count: 0, sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY, sqrsum: 0.0 }; schema.measure_cols.len()]
        });
        for (d, col) in slot.iter_mut().zip(&schema.measure_cols) {
            match col {
                None => d.count += 1,
                Some(i) => {
                    if let Some(v) = o.payload[*i].as_f64() {
                        d.count += 1;
                        d.sum += v;
                        d.min = d.min.min(v);
                        d.max = d.max.max(v);
                        d.sqrsum += v * v;
                    }
                }
            }
        }
    }
    out
}

fn close(a: f64, b: f64, exact: bool) -> bool {
    if exact {
        a == b
    } else {
        a == b || (a - b).abs() <= SUM_RTOL * a.abs().max(b.abs())
    }
}

pub fn check_conservation(levels: &[LevelLayout], objects: &[PointObject], schema: &AggSchema) -> CheckOutcome {
    let n = objects.len() as u64;
    let direct = direct_aggregate(objects, schema);
    // Integer-valued inputs sum exactly in f64 at these sizes.
    let integral = objects.iter().all(|o| {
        schema.measure_cols.iter().flatten().all(|&i| o.payload[i].as_f64().is_none_or(|v| v.fract() == 0.0))
    });
    let mut failures = Vec::new();
    for l in levels {
        let total: u64 = l.clusters.iter().map(|c| c.member_count()).sum();
        if total != n {
            failures.push(format!("level {}: member counts sum to {total}, expected {n}", l.level));
            continue;
        }
        if l.clusters.iter().any(|c| c.member_count() == 0) {
            failures.push(format!("level {}: empty cluster", l.level));
        }
        let mut folded = AggState::empty(schema.dims.len(), schema.measure_cols.len());
        for c in &l.clusters {
            if let Err(e) = folded.merge(&c.agg) {
                failures.push(format!("level {}: {e}", l.level));
            }
        }
        let groups: Vec<(&[String], &[crate::layout::MeasureStats])> = folded.groups().collect();
        if groups.len() != direct.len() {
            failures.push(format!("level {}: {} groups, expected {}", l.level, groups.len(), direct.len()));
            continue;
        }
        for ((key, stats), (dkey, dstats)) in groups.into_iter().zip(&direct) {
            if key != dkey.as_slice() {
                failures.push(format!("level {}: group {key:?} != {dkey:?}", l.level));
                continue;
            }
            for (s, d) in stats.iter().zip(dstats) {
                let ok = s.count == d.count
                    && s.min == d.min
                    && s.max == d.max
                    && close(s.sum, d.sum, integral)
                    && close(s.sqrsum, d.sqrsum, integral);
                if !ok {
                    failures.push(format!("level {}: group {key:?}: {s:?} vs direct {d:?}", l.level));
                }
            }
        }
    }
    CheckOutcome::new("conservation", failures, format!("{} levels conserve n = {n}", levels.len()))
}

/// Replays the recorded merges to recover each cluster's members, then
/// checks placement, member count, representative and ranklist.
pub fn check_representatives(levels: &[LevelLayout], objects: &[PointObject], plan: &LayoutPlan) -> CheckOutcome {
    let mut failures = Vec::new();
    // owner[o]: representative of the cluster holding object o, one level down.
    let mut owner: Vec<u32> = (0..objects.len() as u32).collect();
    for l in levels.iter().rev() {
        let into: FxHashMap<u32, u32> = l.merges.iter().map(|m| (m[0], m[1])).collect();
        let reps: FxHashSet<u32> = l.clusters.iter().map(|c| c.rep).collect();
        let mut memo: FxHashMap<u32, u32> = FxHashMap::default();
        for o in owner.iter_mut() {
            let start = *o;
            let mut r = start;
            if let Some(&m) = memo.get(&start) {
                *o = m;
                continue;
            }
            let mut hops = 0;
            while let Some(&next) = into.get(&r) {
                r = next;
                hops += 1;
                if hops > into.len() {
                    break;
                }
            }
            memo.insert(start, r);
            *o = r;
        }
        let mut members: FxHashMap<u32, Vec<u32>> = FxHashMap::default();
        for (i, &r) in owner.iter().enumerate() {
            if !reps.contains(&r) {
                failures.push(format!("level {}: object {} ends in unknown cluster {r}", l.level, objects[i].id));
                break;
            }
            members.entry(r).or_default().push(i as u32);
        }
        for c in &l.clusters {
            let rep = &objects[c.rep as usize];
            if c.centroid() != plan.project(rep.x, rep.y, l.level) {
                failures.push(format!("level {}: cluster {} not at its representative", l.level, rep.id));
            }
            let mut ms = members.remove(&c.rep).unwrap_or_default();
            if ms.len() as u64 != c.member_count() {
                failures.push(format!(
                    "level {}: cluster {} has {} members, count says {}",
                    l.level,
                    rep.id,
                    ms.len(),
                    c.member_count()
                ));
                continue;
            }
            ms.sort_by(|&a, &b| {
                let (oa, ob) = (&objects[a as usize], &objects[b as usize]);
                importance_order(oa.importance, oa.id, ob.importance, ob.id)
            });
            if ms.first() != Some(&c.rep) {
                failures.push(format!("level {}: representative {} is not the most important member", l.level, rep.id));
            }
            let k = (plan.topk as usize).min(ms.len());
            if c.ranklist != ms[..k] {
                failures.push(format!("level {}: ranklist of {} is not its top-{k}", l.level, rep.id));
            }
        }
    }
    CheckOutcome::new("representatives", failures, "placement, membership, maximality and ranklists hold".into())
}
