use thiserror::Error;

/// Smallest θ the density solver will return.
pub const THETA_MIN: f64 = 1e-6;
/// Absolute tolerance of the θ binary search.
pub const THETA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("density budget must be at least 1, got {0}")]
    InvalidBudget(u64),
    #[error("nearest-neighbor query on an empty index")]
    EmptyIndex,
    #[error("aggregate schemas differ")]
    SchemaMismatch,
}

/// Normalized chessboard distance between two mark centroids.
#[inline]
pub fn ncd(p: [f64; 2], q: [f64; 2], wb: f64, hb: f64) -> f64 {
    ((p[0] - q[0]).abs() / wb).max((p[1] - q[1]).abs() / hb)
}

/// Maximum number of marks with pairwise ncd ≥ θ that fit in one viewport.
pub fn pack_bound(theta: f64, vw: f64, vh: f64, wb: f64, hb: f64) -> u64 {
    let nx = (vw / (wb * theta)).ceil();
    let ny = (vh / (hb * theta)).ceil();
    let prod = nx * ny;
    if prod >= u64::MAX as f64 {
        u64::MAX
    } else {
        prod as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSolution {
    pub theta: f64,
    /// False when `pack_bound(1) > K`; θ is then clamped to 1.
    pub feasible: bool,
}

/// Smallest θ in `[THETA_MIN, 1]` whose packing bound respects the budget.
pub fn solve_theta(k: u64, vw: f64, vh: f64, wb: f64, hb: f64) -> Result<ThetaSolution, LayoutError> {
    if k < 1 {
        return Err(LayoutError::InvalidBudget(k));
    }
    let fits = |t: f64| pack_bound(t, vw, vh, wb, hb) <= k;
    if !fits(1.0) {
        return Ok(ThetaSolution { theta: 1.0, feasible: false });
    }
    if fits(THETA_MIN) {
        return Ok(ThetaSolution { theta: THETA_MIN, feasible: true });
    }
    // Invariant: lo infeasible, hi feasible.
    let (mut lo, mut hi) = (THETA_MIN, 1.0);
    while hi - lo > THETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThetaSolution { theta: hi, feasible: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ncd_cases() {
        assert_eq!(ncd([3.0, 4.0], [3.0, 4.0], 20.0, 10.0), 0.0);
        assert_eq!(ncd([0.0, 0.0], [10.0, 5.0], 20.0, 10.0), 0.5);
        // Boxes of width 20 centred 20 apart touch on one side.
        assert_eq!(ncd([0.0, 0.0], [20.0, 0.0], 20.0, 10.0), 1.0);
        assert_eq!(ncd([1.0, 7.0], [-3.0, 2.0], 4.0, 5.0), ncd([-3.0, 2.0], [1.0, 7.0], 4.0, 5.0));
    }

    #[test]
    fn pack_bound_cases() {
        assert_eq!(pack_bound(1.0, 1000.0, 500.0, 100.0, 50.0), 100);
        assert_eq!(pack_bound(0.5, 1000.0, 500.0, 100.0, 50.0), 400);
        assert_eq!(pack_bound(0.34, 10.0, 10.0, 10.0, 10.0), 9);
        assert_eq!(pack_bound(1e-300, 1.0, 1.0, 1.0, 1.0), u64::MAX);
    }

    /// In a unit viewport at θ = 0.34, a 3x3 lattice with spacing 0.34 is a
    /// valid packing, and no fourth lattice position fits along an axis.
    #[test]
    fn pack_bound_matches_lattice_enumeration() {
        let theta = 0.34;
        let per_axis = (0..).take_while(|&k| k as f64 * theta < 1.0).count();
        assert_eq!(per_axis, 3);
        let pts: Vec<[f64; 2]> = (0..per_axis)
            .flat_map(|i| (0..per_axis).map(move |j| [i as f64 * theta, j as f64 * theta]))
            .collect();
        for (a, p) in pts.iter().enumerate() {
            for q in &pts[a + 1..] {
                assert!(ncd(*p, *q, 1.0, 1.0) >= theta - 1e-12);
            }
        }
        assert_eq!(pts.len() as u64, pack_bound(theta, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn solve_theta_exact_boundary() {
        let s = solve_theta(100, 1000.0, 500.0, 100.0, 50.0).unwrap();
        assert!(s.feasible);
        assert!((s.theta - 1.0).abs() <= 1e-6);
        assert!(pack_bound(s.theta, 1000.0, 500.0, 100.0, 50.0) <= 100);
        // Just below the ceil boundary the bound jumps to 11*11.
        assert_eq!(pack_bound(1.0 - 1e-3, 1000.0, 500.0, 100.0, 50.0), 121);
    }

    #[test]
    fn solve_theta_infeasible() {
        let s = solve_theta(25, 1000.0, 500.0, 100.0, 50.0).unwrap();
        assert_eq!(s, ThetaSolution { theta: 1.0, feasible: false });
    }

    #[test]
    fn solve_theta_huge_budget_is_monotone() {
        let s = solve_theta(1_000_000_000, 1000.0, 500.0, 100.0, 50.0).unwrap();
        assert!(s.feasible);
        assert!(pack_bound(s.theta, 1000.0, 500.0, 100.0, 50.0) <= 1_000_000_000);
        assert!(s.theta < 0.001);
        let s2 = solve_theta(10_000_000, 1000.0, 500.0, 100.0, 50.0).unwrap();
        assert!(s2.theta >= s.theta);
    }

    #[test]
    fn solve_theta_rejects_zero_budget() {
        assert_eq!(solve_theta(0, 1.0, 1.0, 1.0, 1.0), Err(LayoutError::InvalidBudget(0)));
    }
}
