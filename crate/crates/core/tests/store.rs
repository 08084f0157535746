mod common;

use common::{prepared, spec_json};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssv_core::data::synth::Distribution;
use ssv_core::partition::{build_kd_tree, plan_extent, DistOptions};
use ssv_core::pipeline::{run_layout, LayoutMode, Prepared};
use ssv_core::store::{build_indexes, BuildInput, Store, StoreError, StoredCluster, Viewport};
use std::path::Path;

fn build(p: &Prepared, mode: LayoutMode, dir: &Path, merged: u32) -> Store {
    let out = run_layout(p, mode).unwrap();
    build_indexes(input(p, &out.levels, &out.tree, merged), dir).unwrap();
    Store::open(dir).unwrap()
}

fn input<'a>(
    p: &'a Prepared,
    levels: &'a [ssv_core::LevelLayout],
    tree: &'a ssv_core::KdPartitionTree,
    merged_levels: u32,
) -> BuildInput<'a> {
    BuildInput { levels, tree, plan: &p.plan, objects: &p.objects, columns: &COLUMNS, merged_levels }
}

static COLUMNS: std::sync::LazyLock<Vec<ssv_core::ColumnDef>> =
    std::sync::LazyLock::new(ssv_core::data::synth::columns);

fn ids(rows: &[&StoredCluster]) -> Vec<u64> {
    rows.iter().map(|r| r.rep_id).collect()
}

/// Linear-scan oracle over every row of the level, same ordering.
fn scan(store: &Store, v: &Viewport) -> Vec<u64> {
    let mut hits: Vec<&StoredCluster> = store
        .level_rows(v.level)
        .unwrap()
        .filter(|r| r.bbox[0] <= v.x_max && r.bbox[2] >= v.x_min && r.bbox[1] <= v.y_max && r.bbox[3] >= v.y_min)
        .collect();
    hits.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.rep_id.cmp(&b.rep_id)));
    ids(&hits)
}

fn random_viewport(rng: &mut ChaCha8Rng, store: &Store) -> Viewport {
    let plan = store.plan();
    let level = rng.random_range(1..=plan.num_levels);
    let (cw, ch) = plan.level_canvas(level);
    let w = rng.random_range(0.0..plan.viewport_width * 1.5);
    let h = rng.random_range(0.0..plan.viewport_height * 1.5);
    let x = rng.random_range(-100.0..cw);
    let y = rng.random_range(-100.0..ch);
    Viewport::new(level, x, y, x + w, y + h)
}

#[test]
fn table_counts_follow_merge_rule() {
    let p = prepared(Distribution::Uniform, 800, 2, &spec_json(400, None, Some(3)));
    let dir = tempfile::tempdir().unwrap();
    let store = build(&p, LayoutMode::Distributed(DistOptions { capacity: 200, workers: 2 }), dir.path(), 1);
    let m = store.manifest();
    assert_eq!(m.partitions.len(), 4);
    let per_level = |l: u32| m.tables.iter().filter(|t| t.level == l).count();
    assert_eq!((per_level(1), per_level(2), per_level(3)), (1, 4, 4));
    for t in &m.tables {
        assert!(dir.path().join(&t.path).is_file());
        assert_eq!(t.path, format!("level_{}/part_{}.tbl", t.level, t.partition));
    }
    assert!(dir.path().join("partitions.json").is_file());
}

#[test]
fn fetch_matches_linear_scan() {
    let p = prepared(Distribution::Skew, 10_000, 6, &spec_json(400, None, None));
    let dir = tempfile::tempdir().unwrap();
    let store = build(&p, LayoutMode::Distributed(DistOptions { capacity: 700, workers: 4 }), dir.path(), 1);
    assert!(store.num_levels() >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let v = random_viewport(&mut rng, &store);
        let (rows, trace) = store.fetch_traced(&v).unwrap();
        assert_eq!(ids(&rows), scan(&store, &v), "{v:?}");
        // Pruned tables hold nothing that intersects.
        for &pid in &trace.pruned {
            let rows = store.table_rows(v.level, pid).unwrap();
            assert!(rows.iter().all(|r| !r.intersects(&v)), "pruned partition {pid} has hits for {v:?}");
        }
    }
}

#[test]
fn whole_canvas_and_gaps() {
    let p = prepared(Distribution::Uniform, 2000, 3, &spec_json(400, None, None));
    let dir = tempfile::tempdir().unwrap();
    let store = build(&p, LayoutMode::Sequential, dir.path(), 3);
    for level in 1..=store.num_levels() {
        let (cw, ch) = store.plan().level_canvas(level);
        let all = store.fetch_viewport(&Viewport::new(level, 0.0, 0.0, cw, ch)).unwrap();
        assert_eq!(all.len(), store.level_rows(level).unwrap().count());
    }
    // A viewport strictly left of everything.
    let v = Viewport::new(1, -500.0, 0.0, -200.0, 900.0);
    assert!(store.fetch_viewport(&v).unwrap().is_empty());
    // Touching a bbox edge counts.
    let r = store.level_rows(1).unwrap().next().unwrap().clone();
    let touch = Viewport::new(1, r.bbox[2], r.bbox[3], r.bbox[2] + 1.0, r.bbox[3] + 1.0);
    assert!(store.fetch_viewport(&touch).unwrap().iter().any(|x| x.rep_id == r.rep_id));
}

#[test]
fn unknown_level_and_bad_viewport() {
    let p = prepared(Distribution::Uniform, 100, 3, &spec_json(400, None, Some(2)));
    let dir = tempfile::tempdir().unwrap();
    let store = build(&p, LayoutMode::Sequential, dir.path(), 3);
    assert!(matches!(store.fetch_viewport(&Viewport::new(0, 0.0, 0.0, 1.0, 1.0)), Err(StoreError::UnknownLevel(0))));
    assert!(matches!(store.fetch_viewport(&Viewport::new(3, 0.0, 0.0, 1.0, 1.0)), Err(StoreError::UnknownLevel(3))));
    assert!(matches!(
        store.fetch_viewport(&Viewport::new(1, 5.0, 0.0, 1.0, 1.0)),
        Err(StoreError::InvalidViewport(_))
    ));
}

#[test]
fn rebuild_is_byte_identical() {
    let p = prepared(Distribution::Skew, 3000, 7, &spec_json(400, None, None));
    let out = run_layout(&p, LayoutMode::Distributed(DistOptions { capacity: 400, workers: 3 })).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = build_indexes(input(&p, &out.levels, &out.tree, 1), a.path()).unwrap();
    let sb = build_indexes(input(&p, &out.levels, &out.tree, 1), b.path()).unwrap();
    assert_eq!(sa.manifest, sb.manifest);
    for f in ["manifest.json", "partitions.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    for t in &sa.manifest.tables {
        assert_eq!(std::fs::read(a.path().join(&t.path)).unwrap(), std::fs::read(b.path().join(&t.path)).unwrap());
    }
}

/// Two close objects in separate partitions merge on level 1, leaving the
/// less important one's partition with an empty table.
#[test]
fn empty_partition_table() {
    let mut j = spec_json(400, Some(1.0), Some(2));
    j["config"]["viewportWidth"] = 1000.into();
    let p = {
        use ssv_core::data::{ColumnDef, ColumnType, Dataset, Value};
        let spec = ssv_core::parse_spec(&j.to_string()).unwrap();
        let cols = ["x", "y", "z"].map(|c| ColumnDef::new(c, ColumnType::Float)).to_vec();
        let rows = vec![
            vec![Value::Num(0.0), Value::Num(0.0), Value::Num(2.0)],
            vec![Value::Num(1.0), Value::Num(1.0), Value::Num(1.0)],
            vec![Value::Num(1000.0), Value::Num(1000.0), Value::Num(0.0)],
            vec![Value::Num(1001.0), Value::Num(1001.0), Value::Num(0.0)],
        ];
        ssv_core::pipeline::prepare(&spec, &Dataset { columns: cols, rows }).unwrap()
    };
    let tree = build_kd_tree(&p.objects, 1, plan_extent(&p.plan)).unwrap();
    let levels = ssv_core::cluster_levels(&p.objects, &p.plan, &p.schema);
    let dir = tempfile::tempdir().unwrap();
    let s = build_indexes(input(&p, &levels, &tree, 0), dir.path()).unwrap();
    let empty: Vec<_> = s.manifest.tables.iter().filter(|t| t.rows == 0).collect();
    assert!(!empty.is_empty());
    let store = Store::open(dir.path()).unwrap();
    for t in empty {
        assert!(store.table_rows(t.level, t.partition).unwrap().is_empty());
        let (cw, ch) = store.plan().level_canvas(t.level);
        store.fetch_viewport(&Viewport::new(t.level, 0.0, 0.0, cw, ch)).unwrap();
    }
}

#[test]
fn corrupted_table_is_rejected() {
    let p = prepared(Distribution::Uniform, 200, 3, &spec_json(400, None, Some(2)));
    let dir = tempfile::tempdir().unwrap();
    build(&p, LayoutMode::Sequential, dir.path(), 3);
    let path = dir.path().join("level_1/part_0.tbl");
    let mut buf = std::fs::read(&path).unwrap();
    let last = buf.len() - 1;
    buf[last] ^= 1;
    std::fs::write(&path, buf).unwrap();
    let err = Store::open(dir.path()).err().expect("checksum must fail");
    assert!(matches!(err, StoreError::Corrupt { .. }), "{err}");
}

#[test]
fn stored_rows_match_layout() {
    let p = prepared(Distribution::Uniform, 500, 3, &spec_json(400, None, Some(2)));
    let dir = tempfile::tempdir().unwrap();
    let out = run_layout(&p, LayoutMode::Sequential).unwrap();
    build_indexes(input(&p, &out.levels, &out.tree, 3), dir.path()).unwrap();
    let store = Store::open(dir.path()).unwrap();
    for l in &out.levels {
        let mut rows: Vec<&StoredCluster> = store.level_rows(l.level).unwrap().collect();
        rows.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.rep_id.cmp(&b.rep_id)));
        assert_eq!(rows.len(), l.clusters.len());
        for (r, c) in rows.iter().zip(&l.clusters) {
            assert_eq!(r.rep_id, p.objects[c.rep as usize].id);
            assert_eq!((r.cx, r.cy, r.member_count), (c.cx, c.cy, c.member_count()));
            assert_eq!(r.bbox, [c.cx - 40.0, c.cy - 40.0, c.cx + 40.0, c.cy + 40.0]);
            assert_eq!(r.agg, c.agg);
            assert_eq!(r.boundary, c.boundary);
            assert_eq!(r.ranklist.len(), c.ranklist.len());
        }
    }
}
