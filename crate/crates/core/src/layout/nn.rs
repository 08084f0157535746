//! Dynamic nearest-neighbor index under ncd.
//!
//! Centroids are bucketed on a hash grid in normalized space `(x/WB, y/HB)`,
//! where ncd is the L∞ distance. Distances are always evaluated with
//! [`ncd`] on the stored pixel coordinates, so decisions made through the
//! index agree bit-for-bit with a direct pairwise check.

use super::geometry::{ncd, LayoutError};
use rustc_hash::FxHashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    p: [f64; 2],
    id: u64,
}

#[derive(Debug, Clone)]
pub struct NcdGrid {
    wb: f64,
    hb: f64,
    /// Cell side in normalized units.
    cell: f64,
    cells: FxHashMap<(i64, i64), Vec<u32>>,
    entries: Vec<Entry>,
    lo: (i64, i64),
    hi: (i64, i64),
}

/// Result of a nearest-neighbor query: insertion slot, id and ncd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub slot: usize,
    pub id: u64,
    pub ncd: f64,
}

impl NcdGrid {
    pub fn new(wb: f64, hb: f64, cell: f64) -> Self {
        assert!(wb > 0.0 && hb > 0.0 && cell > 0.0);
        Self {
            wb,
            hb,
            cell,
            cells: FxHashMap::default(),
            entries: Vec::new(),
            lo: (i64::MAX, i64::MAX),
            hi: (i64::MIN, i64::MIN),
        }
    }

    pub fn with_capacity(wb: f64, hb: f64, cell: f64, cap: usize) -> Self {
        let mut g = Self::new(wb, hb, cell);
        g.entries.reserve(cap);
        g.cells.reserve(cap);
        g
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    fn key(&self, p: [f64; 2]) -> (i64, i64) {
        (
            (p[0] / self.wb / self.cell).floor() as i64,
            (p[1] / self.hb / self.cell).floor() as i64,
        )
    }

    /// Adds a centroid; returns its slot (insertion index).
    pub fn insert(&mut self, p: [f64; 2], id: u64) -> usize {
        let slot = self.entries.len();
        let k = self.key(p);
        self.entries.push(Entry { p, id });
        self.cells.entry(k).or_default().push(slot as u32);
        self.lo = (self.lo.0.min(k.0), self.lo.1.min(k.1));
        self.hi = (self.hi.0.max(k.0), self.hi.1.max(k.1));
        slot
    }

    #[inline]
    fn consider(&self, slots: &[u32], q: [f64; 2], best: &mut Option<Neighbor>) {
        for &s in slots {
            let e = &self.entries[s as usize];
            let d = ncd(q, e.p, self.wb, self.hb);
            let better = match best {
                None => true,
                Some(b) => d < b.ncd || (d == b.ncd && e.id < b.id),
            };
            if better {
                *best = Some(Neighbor { slot: s as usize, id: e.id, ncd: d });
            }
        }
    }

    /// Nearest centroid with ncd strictly below `radius`, ties by smaller id.
    pub fn nearest_within(&self, q: [f64; 2], radius: f64) -> Option<Neighbor> {
        let (kx, ky) = self.key(q);
        let span = (radius / self.cell).ceil().max(1.0) as i64;
        let mut best = None;
        for dx in -span..=span {
            for dy in -span..=span {
                if let Some(v) = self.cells.get(&(kx + dx, ky + dy)) {
                    self.consider(v, q, &mut best);
                }
            }
        }
        best.filter(|b| b.ncd < radius)
    }

    /// Exact nearest centroid, ties by smaller id.
    pub fn nearest(&self, q: [f64; 2]) -> Result<Neighbor, LayoutError> {
        if self.entries.is_empty() {
            return Err(LayoutError::EmptyIndex);
        }
        let (kx, ky) = self.key(q);
        let max_ring = [self.hi.0 - kx, kx - self.lo.0, self.hi.1 - ky, ky - self.lo.1]
            .into_iter()
            .max()
            .unwrap()
            .max(0);
        let mut best: Option<Neighbor> = None;
        for ring in 0..=max_ring {
            self.scan_ring(kx, ky, ring, q, &mut best);
            // Everything outside rings 0..=ring is at least `ring` cells away.
            if let Some(b) = best {
                if b.ncd < ring as f64 * self.cell {
                    break;
                }
            }
        }
        Ok(best.expect("non-empty index"))
    }

    fn scan_ring(&self, kx: i64, ky: i64, r: i64, q: [f64; 2], best: &mut Option<Neighbor>) {
        if r == 0 {
            if let Some(v) = self.cells.get(&(kx, ky)) {
                self.consider(v, q, best);
            }
            return;
        }
        // Sparse rings: iterate occupied cells if that is cheaper.
        if (8 * r) as usize > self.cells.len() {
            for (&(cx, cy), v) in &self.cells {
                if (cx - kx).abs().max((cy - ky).abs()) == r {
                    self.consider(v, q, best);
                }
            }
            return;
        }
        for d in -r..=r {
            for k in [(kx + d, ky - r), (kx + d, ky + r)] {
                if let Some(v) = self.cells.get(&k) {
                    self.consider(v, q, best);
                }
            }
        }
        for d in (-r + 1)..r {
            for k in [(kx - r, ky + d), (kx + r, ky + d)] {
                if let Some(v) = self.cells.get(&k) {
                    self.consider(v, q, best);
                }
            }
        }
    }
}

/// Nearest-neighbor query entry point: the centroid in `index` minimizing
/// ncd to `q`.
pub fn nearest_neighbor_ncd(index: &NcdGrid, q: [f64; 2]) -> Result<Neighbor, LayoutError> {
    index.nearest(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(pts: &[([f64; 2], u64)], q: [f64; 2], wb: f64, hb: f64) -> (u64, f64) {
        pts.iter()
            .map(|(p, id)| (*id, ncd(q, *p, wb, hb)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap()
    }

    #[test]
    fn empty_index() {
        assert_eq!(NcdGrid::new(1.0, 1.0, 1.0).nearest([0.0, 0.0]), Err(LayoutError::EmptyIndex));
    }

    #[test]
    fn single_and_coincident() {
        let mut g = NcdGrid::new(20.0, 10.0, 0.5);
        g.insert([100.0, 50.0], 7);
        let n = g.nearest([0.0, 0.0]).unwrap();
        assert_eq!((n.id, n.ncd), (7, ncd([0.0, 0.0], [100.0, 50.0], 20.0, 10.0)));
        g.insert([10.0, 10.0], 3);
        let n = nearest_neighbor_ncd(&g, [10.0, 10.0]).unwrap();
        assert_eq!((n.id, n.ncd), (3, 0.0));
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (wb, hb) = (80.0, 40.0);
        for cell in [0.05, 0.7, 3.0] {
            let mut g = NcdGrid::new(wb, hb, cell);
            let mut pts = Vec::new();
            for id in 0..500u64 {
                // Coarse coordinates to force distance ties.
                let p = [rng.random_range(0..400) as f64 * 5.0, rng.random_range(0..200) as f64 * 5.0];
                g.insert(p, id);
                pts.push((p, id));
            }
            for _ in 0..100 {
                let q = [rng.random_range(-500.0..2500.0), rng.random_range(-500.0..1500.0)];
                let n = g.nearest(q).unwrap();
                assert_eq!((n.id, n.ncd), linear_scan(&pts, q, wb, hb), "cell {cell} q {q:?}");
                for r in [0.1, 0.5, 1.0] {
                    let within = g.nearest_within(q, r);
                    let (id, d) = linear_scan(&pts, q, wb, hb);
                    if d < r {
                        let w = within.unwrap();
                        assert_eq!((w.id, w.ncd), (id, d));
                    } else {
                        assert!(within.is_none());
                    }
                }
            }
        }
    }
}
