//! Bottom-up hierarchical clustering over zoom levels.

use super::agg::{AggSchema, AggState};
use super::boundary::Boundary;
use super::nn::NcdGrid;
use crate::data::{importance_order, PointObject};
use crate::grammar::LayoutPlan;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// One mark on one zoom level.
///
/// Objects are referenced by their index in the object slice the layout was
/// built from (`rep`, `ranklist`), not by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub level: u32,
    /// Centroid in this level's pixel space; always the representative's
    /// projected position.
    pub cx: f64,
    pub cy: f64,
    pub rep: u32,
    pub agg: AggState,
    /// Top-k members, most important first.
    pub ranklist: Vec<u32>,
    pub boundary: Boundary,
}

impl ClusterRecord {
    #[inline]
    pub fn member_count(&self) -> u64 {
        self.agg.count
    }

    #[inline]
    pub fn centroid(&self) -> [f64; 2] {
        [self.cx, self.cy]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLayout {
    pub level: u32,
    pub clusters: Vec<ClusterRecord>,
    /// `[absorbed, into]` representative indices of every merge that built
    /// this level from the one below, in the order they happened.
    pub merges: Vec<[u32; 2]>,
}

/// Read-only inputs shared by every clustering pass of one build.
pub struct LayoutContext<'a> {
    pub plan: &'a LayoutPlan,
    pub objects: &'a [PointObject],
    pub schema: &'a AggSchema,
    top_px: Vec<[f64; 2]>,
}

impl<'a> LayoutContext<'a> {
    pub fn new(plan: &'a LayoutPlan, objects: &'a [PointObject], schema: &'a AggSchema) -> Self {
        assert!(objects.len() <= u32::MAX as usize, "too many objects for u32 indices");
        let top_px = objects.iter().map(|o| [plan.top_px_x(o.x), plan.top_px_y(o.y)]).collect();
        Self { plan, objects, schema, top_px }
    }

    /// Representative-derived centroid of object `idx` on `level`.
    #[inline]
    pub fn position(&self, idx: u32, level: u32) -> [f64; 2] {
        let s = self.plan.level_scale(level);
        let p = self.top_px[idx as usize];
        [p[0] * s, p[1] * s]
    }

    #[inline]
    pub fn cmp_objects(&self, a: u32, b: u32) -> Ordering {
        let (oa, ob) = (&self.objects[a as usize], &self.objects[b as usize]);
        importance_order(oa.importance, oa.id, ob.importance, ob.id)
    }

    #[inline]
    pub fn rep_id(&self, c: &ClusterRecord) -> u64 {
        self.objects[c.rep as usize].id
    }

    /// Object indices sorted most important first.
    pub fn importance_sorted(&self) -> Vec<u32> {
        let mut idx: Vec<u32> = (0..self.objects.len() as u32).collect();
        idx.sort_unstable_by(|&a, &b| self.cmp_objects(a, b));
        idx
    }

    /// Singleton cluster on the fake bottom level.
    pub fn singleton(&self, idx: u32) -> ClusterRecord {
        let o = &self.objects[idx as usize];
        let level = self.plan.num_levels + 1;
        let [cx, cy] = self.position(idx, level);
        ClusterRecord {
            level,
            cx,
            cy,
            rep: idx,
            agg: AggState::singleton(o, self.schema),
            ranklist: if self.plan.topk > 0 { vec![idx] } else { vec![] },
            boundary: Boundary::singleton(self.plan.boundary, o.x, o.y),
        }
    }

    /// Merges `absorbed` into `into`. The survivor keeps its centroid and
    /// representative.
    pub fn absorb(&self, into: &mut ClusterRecord, absorbed: &ClusterRecord) {
        into.agg
            .merge(&absorbed.agg)
            .expect("clusters of one build share an aggregate schema");
        into.boundary.merge(&absorbed.boundary);
        let k = self.plan.topk as usize;
        if k > 0 {
            let (a, b) = (&into.ranklist, &absorbed.ranklist);
            let mut merged = Vec::with_capacity(k.min(a.len() + b.len()));
            let (mut i, mut j) = (0, 0);
            while merged.len() < k && (i < a.len() || j < b.len()) {
                let take_a = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) => self.cmp_objects(x, y).is_le(),
                    (Some(_), None) => true,
                    _ => false,
                };
                if take_a {
                    merged.push(a[i]);
                    i += 1;
                } else {
                    merged.push(b[j]);
                    j += 1;
                }
            }
            into.ranklist = merged;
        }
    }

    /// Orders clusters by their representatives, most important first.
    pub fn sort_clusters(&self, clusters: &mut [ClusterRecord]) {
        clusters.sort_unstable_by(|a, b| self.cmp_objects(a.rep, b.rep));
    }

    /// Builds level `level` from the clusters of level `level + 1`.
    ///
    /// `inputs` must be sorted most important first. Each cluster is merged
    /// into its nearest already-placed cluster when their ncd is below θ and
    /// placed as a new cluster otherwise.
    /// Merges are appended to `merges`.
    pub fn cluster_pass(&self, inputs: Vec<ClusterRecord>, level: u32, merges: &mut Vec<[u32; 2]>) -> Vec<ClusterRecord> {
        let plan = self.plan;
        let theta = plan.theta;
        let mut grid = NcdGrid::new(plan.mark_width, plan.mark_height, theta);
        let mut out: Vec<ClusterRecord> = Vec::new();
        for mut c in inputs {
            let p = self.position(c.rep, level);
            if let Some(nb) = grid.nearest_within(p, theta) {
                merges.push([c.rep, out[nb.slot].rep]);
                self.absorb(&mut out[nb.slot], &c);
                continue;
            }
            grid.insert(p, self.objects[c.rep as usize].id);
            c.level = level;
            c.cx = p[0];
            c.cy = p[1];
            out.push(c);
        }
        out
    }
}

/// Sequential layout of levels `1..=η`, returned top level first.
pub fn cluster_levels(objects: &[PointObject], plan: &LayoutPlan, schema: &AggSchema) -> Vec<LevelLayout> {
    let ctx = LayoutContext::new(plan, objects, schema);
    cluster_levels_with(&ctx)
}

pub fn cluster_levels_with(ctx: &LayoutContext<'_>) -> Vec<LevelLayout> {
    let mut current: Vec<ClusterRecord> =
        ctx.importance_sorted().into_iter().map(|i| ctx.singleton(i)).collect();
    let mut levels = Vec::with_capacity(ctx.plan.num_levels as usize);
    for level in (1..=ctx.plan.num_levels).rev() {
        let mut merges = Vec::new();
        let next = ctx.cluster_pass(current, level, &mut merges);
        current = next.clone();
        levels.push(LevelLayout { level, clusters: next, merges });
    }
    levels.reverse();
    levels
}
