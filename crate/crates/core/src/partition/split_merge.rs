//! Greedy merging of clusters across one KD split.

use super::kdtree::Axis;
use crate::layout::{ncd, ClusterRecord, LayoutContext, NcdGrid};
use std::cmp::Ordering;

/// A band candidate and the partition it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCluster {
    pub partition: u32,
    pub cluster: ClusterRecord,
}

/// Geometry of one split on one level, in level pixel space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitLine {
    pub axis: Axis,
    /// Pixel coordinate of the line (x for an X split, y otherwise).
    pub at: f64,
    /// Band half-width: θ·WB for an X split, θ·HB for a Y split.
    pub half_width: f64,
}

impl SplitLine {
    pub fn new(ctx: &LayoutContext<'_>, axis: Axis, split_value: f64, level: u32) -> Self {
        let plan = ctx.plan;
        let s = plan.level_scale(level);
        match axis {
            Axis::X => Self { axis, at: plan.top_px_x(split_value) * s, half_width: plan.theta * plan.mark_width },
            Axis::Y => Self { axis, at: plan.top_px_y(split_value) * s, half_width: plan.theta * plan.mark_height },
        }
    }

    /// Distance from a centroid to the line, orthogonal to it.
    #[inline]
    pub fn distance(&self, c: &ClusterRecord) -> f64 {
        match self.axis {
            Axis::X => (c.cx - self.at).abs(),
            Axis::Y => (c.cy - self.at).abs(),
        }
    }

    /// Two clusters on opposite sides with ncd < θ are both strictly closer
    /// than the half-width, so this is all that needs to be looked at.
    #[inline]
    pub fn in_band(&self, c: &ClusterRecord) -> bool {
        self.distance(c) < self.half_width
    }

    /// Coordinate along the line, used as the scan order.
    #[inline]
    fn along(&self, c: &ClusterRecord) -> f64 {
        match self.axis {
            Axis::X => c.cy,
            Axis::Y => c.cx,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeOutcome {
    pub survivors: Vec<BandCluster>,
    /// `(absorbed, into)` representative object indices, in merge order.
    pub merges: Vec<(u32, u32)>,
    /// Merges made by the fixed-point pass after the sorted scan.
    pub repair_merges: usize,
}

/// Merges band clusters across a split.
///
/// Candidates are scanned in order of their coordinate along the line, ties
/// by representative id, tracking the last kept cluster α. A candidate β
/// closer than θ to α is merged with it and the less important of the two
/// representatives is absorbed; α becomes the survivor. A second,
/// importance-ordered pass then merges any pair still closer than θ so the
/// result is a fixed point even if the scan missed a pair.
pub fn merge_along_split(ctx: &LayoutContext<'_>, line: &SplitLine, band: Vec<BandCluster>) -> MergeOutcome {
    let mut out = scan(ctx, band, |a, b| {
        line.along(a).total_cmp(&line.along(b)).then(ctx.rep_id(a).cmp(&ctx.rep_id(b)))
    });
    repair(ctx, &mut out);
    out
}

fn scan(
    ctx: &LayoutContext<'_>,
    band: Vec<BandCluster>,
    order: impl Fn(&ClusterRecord, &ClusterRecord) -> Ordering,
) -> MergeOutcome {
    let plan = ctx.plan;
    let mut slots: Vec<Option<BandCluster>> = band.into_iter().map(Some).collect();
    let mut seq: Vec<usize> = (0..slots.len()).collect();
    seq.sort_by(|&a, &b| order(&slots[a].as_ref().unwrap().cluster, &slots[b].as_ref().unwrap().cluster));
    let mut merges = Vec::new();
    let mut alpha: Option<usize> = None;
    for b in seq {
        let Some(a) = alpha else {
            alpha = Some(b);
            continue;
        };
        let (ca, cb) = (&slots[a].as_ref().unwrap().cluster, &slots[b].as_ref().unwrap().cluster);
        if ncd(ca.centroid(), cb.centroid(), plan.mark_width, plan.mark_height) >= plan.theta {
            alpha = Some(b);
            continue;
        }
        let (keep, gone) = if ctx.cmp_objects(ca.rep, cb.rep).is_lt() { (a, b) } else { (b, a) };
        let absorbed = slots[gone].take().unwrap().cluster;
        let into = &mut slots[keep].as_mut().unwrap().cluster;
        merges.push((absorbed.rep, into.rep));
        ctx.absorb(into, &absorbed);
        alpha = Some(keep);
    }
    MergeOutcome { survivors: slots.into_iter().flatten().collect(), merges, repair_merges: 0 }
}

fn repair(ctx: &LayoutContext<'_>, out: &mut MergeOutcome) {
    let plan = ctx.plan;
    let mut survivors = std::mem::take(&mut out.survivors);
    survivors.sort_by(|a, b| ctx.cmp_objects(a.cluster.rep, b.cluster.rep));
    let mut grid = NcdGrid::with_capacity(plan.mark_width, plan.mark_height, plan.theta, survivors.len());
    let mut kept: Vec<BandCluster> = Vec::with_capacity(survivors.len());
    for c in survivors {
        let p = c.cluster.centroid();
        if let Some(nb) = grid.nearest_within(p, plan.theta) {
            let into = &mut kept[nb.slot].cluster;
            out.merges.push((c.cluster.rep, into.rep));
            out.repair_merges += 1;
            ctx.absorb(into, &c.cluster);
            continue;
        }
        grid.insert(p, ctx.rep_id(&c.cluster));
        kept.push(c);
    }
    out.survivors = kept;
}
