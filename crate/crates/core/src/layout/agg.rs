//! Mergeable aggregate state for cluster marks.
//!
//! Each measure keeps count/sum/min/max/sqrsum; `avg` is derived on read.
//! With dimensions declared, the stats are kept per dimension-value tuple.

use super::geometry::LayoutError;
use crate::data::{ColumnDef, PointObject};
use crate::grammar::{AggFunction, LayoutPlan, MeasureSpec, PlanError};
use serde::{Deserialize, Serialize};

/// Column bindings for the plan's dimensions and measures.
#[derive(Debug, Clone, PartialEq)]
pub struct AggSchema {
    pub dims: Vec<usize>,
    /// `None` for `count` without a field.
    pub measure_cols: Vec<Option<usize>>,
    pub measures: Vec<MeasureSpec>,
    pub dim_names: Vec<String>,
}

impl AggSchema {
    pub fn resolve(plan: &LayoutPlan, columns: &[ColumnDef]) -> Result<Self, PlanError> {
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| PlanError::UnknownColumn(name.to_string()))
        };
        let dims = plan.dimensions.iter().map(|d| find(&d.field)).collect::<Result<_, _>>()?;
        let measure_cols = plan
            .measures
            .iter()
            .map(|m| m.field.as_deref().map(find).transpose())
            .collect::<Result<_, _>>()?;
        Ok(Self {
            dims,
            measure_cols,
            measures: plan.measures.clone(),
            dim_names: plan.dimensions.iter().map(|d| d.field.clone()).collect(),
        })
    }

    /// A count-only schema, handy for tests and synthetic builds.
    pub fn count_only() -> Self {
        Self {
            dims: vec![],
            measure_cols: vec![None],
            measures: vec![MeasureSpec { field: None, function: AggFunction::Count, extent: None }],
            dim_names: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
    pub sqrsum: f64,
}

impl MeasureStats {
    pub const EMPTY: MeasureStats = MeasureStats {
        count: 0,
        sum: 0.0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        sqrsum: 0.0,
    };

    pub fn of(v: f64) -> Self {
        Self { count: 1, sum: v, min: v, max: v, sqrsum: v * v }
    }

    #[inline]
    pub fn merge(&mut self, o: &MeasureStats) {
        self.count += o.count;
        self.sum += o.sum;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        self.sqrsum += o.sqrsum;
    }

    pub fn value(&self, f: AggFunction) -> Option<f64> {
        match f {
            AggFunction::Count => Some(self.count as f64),
            AggFunction::Sum => Some(self.sum),
            AggFunction::Sqrsum => Some(self.sqrsum),
            _ if self.count == 0 => None,
            AggFunction::Avg => Some(self.sum / self.count as f64),
            AggFunction::Min => Some(self.min),
            AggFunction::Max => Some(self.max),
        }
    }
}

/// Aggregates of a set of objects.
///
/// Without dimensions, `keys` is empty and `stats` holds one entry per
/// measure. With dimensions, `keys` is sorted and `stats` is laid out
/// group-major: `stats[g * n_measures + m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggState {
    pub count: u64,
    pub n_measures: u32,
    pub n_dims: u32,
    pub keys: Vec<Vec<String>>,
    pub stats: Vec<MeasureStats>,
}

impl AggState {
    pub fn empty(n_dims: usize, n_measures: usize) -> Self {
        Self {
            count: 0,
            n_measures: n_measures as u32,
            n_dims: n_dims as u32,
            keys: vec![],
            stats: if n_dims == 0 { vec![MeasureStats::EMPTY; n_measures] } else { vec![] },
        }
    }

    pub fn singleton(obj: &PointObject, schema: &AggSchema) -> Self {
        let stats = schema
            .measure_cols
            .iter()
            .map(|c| match c {
                None => MeasureStats { count: 1, ..MeasureStats::EMPTY },
                Some(i) => obj.payload[*i].as_f64().map_or(MeasureStats::EMPTY, MeasureStats::of),
            })
            .collect();
        let keys = if schema.dims.is_empty() {
            vec![]
        } else {
            vec![schema.dims.iter().map(|&i| obj.payload[i].key_string()).collect()]
        };
        Self {
            count: 1,
            n_measures: schema.measure_cols.len() as u32,
            n_dims: schema.dims.len() as u32,
            keys,
            stats,
        }
    }

    pub fn groups(&self) -> impl Iterator<Item = (&[String], &[MeasureStats])> {
        let m = self.n_measures as usize;
        let n = if self.n_dims == 0 { 1 } else { self.keys.len() };
        (0..n).map(move |g| {
            let key: &[String] = if self.n_dims == 0 { &[] } else { &self.keys[g] };
            (key, &self.stats[g * m..(g + 1) * m])
        })
    }

    /// Folds `other` into `self`.
    pub fn merge(&mut self, other: &AggState) -> Result<(), LayoutError> {
        if self.n_measures != other.n_measures || self.n_dims != other.n_dims {
            return Err(LayoutError::SchemaMismatch);
        }
        self.count += other.count;
        let m = self.n_measures as usize;
        if self.n_dims == 0 {
            for (a, b) in self.stats.iter_mut().zip(&other.stats) {
                a.merge(b);
            }
            return Ok(());
        }
        let mut keys = Vec::with_capacity(self.keys.len() + other.keys.len());
        let mut stats = Vec::with_capacity(self.stats.len() + other.stats.len());
        let (mut i, mut j) = (0, 0);
        let old_keys = std::mem::take(&mut self.keys);
        while i < old_keys.len() || j < other.keys.len() {
            let ord = match (old_keys.get(i), other.keys.get(j)) {
                (Some(a), Some(b)) => a.cmp(b),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match ord {
                std::cmp::Ordering::Less => {
                    keys.push(old_keys[i].clone());
                    stats.extend_from_slice(&self.stats[i * m..(i + 1) * m]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    keys.push(other.keys[j].clone());
                    stats.extend_from_slice(&other.stats[j * m..(j + 1) * m]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    keys.push(old_keys[i].clone());
                    let base = stats.len();
                    stats.extend_from_slice(&self.stats[i * m..(i + 1) * m]);
                    for (a, b) in stats[base..].iter_mut().zip(&other.stats[j * m..(j + 1) * m]) {
                        a.merge(b);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        self.keys = keys;
        self.stats = stats;
        Ok(())
    }
}

/// Functional form of [`AggState::merge`].
pub fn merge_agg(a: &AggState, b: &AggState) -> Result<AggState, LayoutError> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Value;
    use rand::{Rng, SeedableRng};
    use rand::seq::SliceRandom;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> AggSchema {
        let m = |f, c: Option<usize>| MeasureSpec { field: c.map(|_| "v".into()), function: f, extent: None };
        AggSchema {
            dims: vec![1],
            measure_cols: vec![None, Some(0), Some(0)],
            measures: vec![m(AggFunction::Count, None), m(AggFunction::Sum, Some(0)), m(AggFunction::Max, Some(0))],
            dim_names: vec!["day".into()],
        }
    }

    fn obj(id: u64, v: f64, day: &str) -> PointObject {
        PointObject { id, x: 0.0, y: 0.0, importance: 0.0, payload: vec![Value::Num(v), Value::Str(day.into())] }
    }

    #[test]
    fn identity_element() {
        let s = schema();
        let a = AggState::singleton(&obj(1, 2.0, "mon"), &s);
        assert_eq!(merge_agg(&a, &AggState::empty(1, 3)).unwrap(), a);
        assert_eq!(merge_agg(&AggState::empty(1, 3), &a).unwrap(), a);
    }

    #[test]
    fn componentwise_addition() {
        let mut a = AggState::empty(0, 1);
        a.count = 2;
        a.stats[0] = MeasureStats { count: 2, sum: 10.0, min: 4.0, max: 6.0, sqrsum: 52.0 };
        let mut b = AggState::empty(0, 1);
        b.count = 3;
        b.stats[0] = MeasureStats { count: 3, sum: 5.0, min: 1.0, max: 2.0, sqrsum: 9.0 };
        let c = merge_agg(&a, &b).unwrap();
        assert_eq!(c.count, 5);
        assert_eq!(c.stats[0].count, 5);
        assert_eq!(c.stats[0].sum, 15.0);
        assert_eq!(c.stats[0].min, 1.0);
        assert_eq!(c.stats[0].max, 6.0);
    }

    #[test]
    fn schema_mismatch() {
        assert_eq!(
            merge_agg(&AggState::empty(0, 1), &AggState::empty(0, 2)),
            Err(LayoutError::SchemaMismatch)
        );
        assert_eq!(
            merge_agg(&AggState::empty(1, 1), &AggState::empty(0, 1)),
            Err(LayoutError::SchemaMismatch)
        );
    }

    /// Folding 100 singletons in any order equals aggregating all members
    /// directly.
    #[test]
    fn fold_order_independent() {
        let s = schema();
        let days = ["mon", "tue", "wed"];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let objs: Vec<PointObject> = (0..100)
            .map(|i| obj(i, rng.random_range(-50..50) as f64, days[rng.random_range(0..3)]))
            .collect();

        // Direct oracle: group by day, then count/sum/max by brute force.
        let mut expect: Vec<(String, u64, f64, f64)> = days
            .iter()
            .map(|d| {
                let vs: Vec<f64> = objs
                    .iter()
                    .filter(|o| o.payload[1] == Value::Str(d.to_string()))
                    .map(|o| o.payload[0].as_f64().unwrap())
                    .collect();
                (d.to_string(), vs.len() as u64, vs.iter().sum(), vs.iter().cloned().fold(f64::MIN, f64::max))
            })
            .filter(|e| e.1 > 0)
            .collect();
        expect.sort_by(|a, b| a.0.cmp(&b.0));

        for trial in 0..5 {
            let mut order: Vec<&PointObject> = objs.iter().collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(trial));
            let mut acc = AggState::empty(1, 3);
            for o in order {
                acc.merge(&AggState::singleton(o, &s)).unwrap();
            }
            assert_eq!(acc.count, 100);
            let got: Vec<(String, u64, f64, f64)> = acc
                .groups()
                .map(|(k, st)| (k[0].clone(), st[0].count, st[1].sum, st[2].max))
                .collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn derived_values() {
        let st = MeasureStats { count: 4, sum: 10.0, min: 1.0, max: 4.0, sqrsum: 30.0 };
        assert_eq!(st.value(AggFunction::Avg), Some(2.5));
        assert_eq!(MeasureStats::EMPTY.value(AggFunction::Min), None);
        assert_eq!(MeasureStats::EMPTY.value(AggFunction::Count), Some(0.0));
    }
}
