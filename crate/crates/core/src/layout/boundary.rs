//! Cluster boundaries in raw data units.

use crate::grammar::BoundaryMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coords", rename_all = "lowercase")]
pub enum Boundary {
    None,
    /// `[x_min, y_min, x_max, y_max]`
    Bbox([f64; 4]),
    /// Counter-clockwise hull vertices, no collinear points.
    Hull(Vec<[f64; 2]>),
}

impl Boundary {
    pub fn singleton(mode: Option<BoundaryMode>, x: f64, y: f64) -> Self {
        match mode {
            None => Boundary::None,
            Some(BoundaryMode::Bbox) => Boundary::Bbox([x, y, x, y]),
            Some(BoundaryMode::Convexhull) => Boundary::Hull(vec![[x, y]]),
        }
    }

    pub fn merge(&mut self, other: &Boundary) {
        match (self, other) {
            (Boundary::Bbox(a), Boundary::Bbox(b)) => {
                a[0] = a[0].min(b[0]);
                a[1] = a[1].min(b[1]);
                a[2] = a[2].max(b[2]);
                a[3] = a[3].max(b[3]);
            }
            (Boundary::Hull(a), Boundary::Hull(b)) => {
                let mut pts = std::mem::take(a);
                pts.extend_from_slice(b);
                *a = convex_hull(pts);
            }
            _ => {}
        }
    }

    /// Whether `(x, y)` is inside or on the boundary.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Boundary::None => true,
            Boundary::Bbox(b) => x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3],
            Boundary::Hull(h) => hull_contains(h, x, y),
        }
    }
}

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn hull_contains(h: &[[f64; 2]], x: f64, y: f64) -> bool {
    let p = [x, y];
    match h.len() {
        0 => false,
        1 => h[0] == p,
        2 => {
            let (a, b) = (h[0], h[1]);
            cross(a, b, p).abs() <= 1e-9 * (1.0 + (b[0] - a[0]).abs() + (b[1] - a[1]).abs())
                && x >= a[0].min(b[0])
                && x <= a[0].max(b[0])
                && y >= a[1].min(b[1])
                && y <= a[1].max(b[1])
        }
        n => (0..n).all(|i| cross(h[i], h[(i + 1) % n], p) >= -1e-9),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_hull() {
        let h = convex_hull(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]);
        assert_eq!(h, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    }

    #[test]
    fn degenerate_hulls() {
        assert_eq!(convex_hull(vec![[2.0, 2.0], [2.0, 2.0]]), vec![[2.0, 2.0]]);
        assert_eq!(convex_hull(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), vec![[0.0, 0.0], [2.0, 2.0]]);
    }

    #[test]
    fn bbox_merge() {
        let mut a = Boundary::singleton(Some(BoundaryMode::Bbox), 1.0, 5.0);
        a.merge(&Boundary::singleton(Some(BoundaryMode::Bbox), -2.0, 7.0));
        assert_eq!(a, Boundary::Bbox([-2.0, 5.0, 1.0, 7.0]));
    }

    proptest! {
        /// Merging hulls one point at a time yields a hull containing every
        /// input point.
        #[test]
        fn incremental_hull_contains_all(pts in prop::collection::vec((-100i32..100, -100i32..100), 1..40)) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x as f64, y as f64]).collect();
            let mut b = Boundary::singleton(Some(BoundaryMode::Convexhull), pts[0][0], pts[0][1]);
            for p in &pts[1..] {
                b.merge(&Boundary::singleton(Some(BoundaryMode::Convexhull), p[0], p[1]));
            }
            for p in &pts {
                prop_assert!(b.contains(p[0], p[1]));
            }
            if let Boundary::Hull(h) = &b {
                prop_assert_eq!(h.clone(), convex_hull(pts.clone()));
            }
        }
    }
}
