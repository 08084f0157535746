//! Seeded synthetic datasets.
//!
//! All generators emit three float columns `x`, `y`, `z` over the square
//! `[0, PLANE] x [0, PLANE]`, with `z` uniform in `[0, 1)`.

use super::{ColumnDef, ColumnType, Dataset, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub const PLANE: f64 = 10_000.0;

/// Share of objects placed in the hot region.
pub const HOT_FRACTION: f64 = 0.8;
/// Area share of the hot region.
pub const HOT_AREA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    /// 80% of objects uniform inside a random axis-aligned rectangle covering
    /// 20% of the plane, the rest uniform over the whole plane.
    Skew,
    /// Every object at the same position.
    Coincident,
    /// Objects on the diagonal `y = x`.
    Collinear,
}

impl FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "skew" => Ok(Self::Skew),
            "coincident" => Ok(Self::Coincident),
            "collinear" => Ok(Self::Collinear),
            _ => Err(format!("unknown distribution '{s}'")),
        }
    }
}

/// Parses `<dist>:<n>`, e.g. `skew:100000`.
pub fn parse_gen_arg(s: &str) -> Result<(Distribution, usize), String> {
    let (d, n) = s.split_once(':').ok_or_else(|| format!("expected <dist>:<n>, got '{s}'"))?;
    let n = n.parse::<usize>().map_err(|e| format!("bad size '{n}': {e}"))?;
    Ok((d.parse()?, n))
}

/// The hot rectangle `[x0, x1] x [y0, y1]` for a given seed.
pub fn hot_region(seed: u64) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5ce3);
    let w = rng.random_range(HOT_AREA..=1.0);
    let h = HOT_AREA / w;
    let x0 = rng.random_range(0.0..=(1.0 - w));
    let y0 = rng.random_range(0.0..=(1.0 - h));
    [x0 * PLANE, (x0 + w) * PLANE, y0 * PLANE, (y0 + h) * PLANE]
}

pub fn columns() -> Vec<ColumnDef> {
    vec![
        ColumnDef::new("x", ColumnType::Float),
        ColumnDef::new("y", ColumnType::Float),
        ColumnDef::new("z", ColumnType::Float),
    ]
}

pub fn generate(dist: Distribution, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hot = hot_region(seed);
    let n_hot = (n as f64 * HOT_FRACTION).round() as usize;
    let mut ds = Dataset::new(columns());
    ds.rows.reserve(n);
    for i in 0..n {
        let (x, y) = match dist {
            Distribution::Uniform => (rng.random_range(0.0..PLANE), rng.random_range(0.0..PLANE)),
            Distribution::Skew if i < n_hot => {
                (rng.random_range(hot[0]..hot[1]), rng.random_range(hot[2]..hot[3]))
            }
            Distribution::Skew => (rng.random_range(0.0..PLANE), rng.random_range(0.0..PLANE)),
            Distribution::Coincident => (PLANE / 2.0, PLANE / 2.0),
            Distribution::Collinear => {
                let t = rng.random_range(0.0..PLANE);
                (t, t)
            }
        };
        let z: f64 = rng.random();
        ds.rows.push(vec![Value::Num(x), Value::Num(y), Value::Num(z)]);
    }
    ds
}
