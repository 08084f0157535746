use super::build::Manifest;
use super::table::decode_table;
use super::{StoreError, StoredCluster, Viewport};
use crate::data::importance_order;
use crate::grammar::LayoutPlan;
use crate::partition::{KdPartitionTree, NodeKind, Rect};
use rayon::prelude::*;
use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

type Entry = GeomWithData<Rectangle<[f64; 2]>, u32>;

struct Table {
    rows: Vec<StoredCluster>,
    index: RTree<Entry>,
}

impl Table {
    fn new(rows: Vec<StoredCluster>) -> Self {
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, r)| Entry::new(Rectangle::from_corners([r.bbox[0], r.bbox[1]], [r.bbox[2], r.bbox[3]]), i as u32))
            .collect();
        Self { rows, index: RTree::bulk_load(entries) }
    }

    fn query<'a>(&'a self, v: &Viewport, out: &mut Vec<&'a StoredCluster>) {
        let env = AABB::from_corners([v.x_min, v.y_min], [v.x_max, v.y_max]);
        out.extend(self.index.locate_in_envelope_intersecting(&env).map(|e| &self.rows[e.data as usize]));
    }
}

/// A loaded build. Immutable; safe to query from many threads.
pub struct Store {
    dir: PathBuf,
    manifest: Manifest,
    tree: KdPartitionTree,
    /// `levels[i - 1][j]`: table of partition `j` on level `i` (a single
    /// table on merged levels).
    levels: Vec<Vec<Table>>,
}

/// Which partition tables a query touched; used to check pruning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchTrace {
    pub visited: Vec<u32>,
    pub pruned: Vec<u32>,
}

impl Store {
    /// Loads every table listed in `<dir>/manifest.json`, verifying
    /// checksums, and builds the in-memory R-trees.
    pub fn open(dir: &Path) -> Result<Store, StoreError> {
        let mpath = dir.join("manifest.json");
        let text = fs::read_to_string(&mpath).map_err(|e| StoreError::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| StoreError::Corrupt { path: mpath.clone(), reason: e.to_string() })?;
        let tree = KdPartitionTree::from_manifest(&manifest.kd_tree)
            .map_err(|e| StoreError::Corrupt { path: mpath.clone(), reason: e.to_string() })?;
        let eta = manifest.plan.num_levels;
        let expected = |level: u32| if manifest.is_merged(level) { 1 } else { tree.partition_count() };
        let mut slots: Vec<Vec<Option<Table>>> = (1..=eta).map(|l| (0..expected(l)).map(|_| None).collect()).collect();

        let loaded: Vec<(u32, u32, Table)> = manifest
            .tables
            .par_iter()
            .map(|t| {
                let path = dir.join(&t.path);
                let corrupt = |reason: String| StoreError::Corrupt { path: path.clone(), reason };
                let buf = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
                if format!("{:x}", Sha256::digest(&buf)) != t.sha256 {
                    return Err(corrupt("checksum mismatch".into()));
                }
                let (level, partition, rows) = decode_table(&buf).map_err(|e| corrupt(e.to_string()))?;
                if (level, partition, rows.len() as u64) != (t.level, t.partition, t.rows) {
                    return Err(corrupt("header disagrees with manifest".into()));
                }
                Ok((level, partition, Table::new(rows)))
            })
            .collect::<Result<_, StoreError>>()?;
        for (level, partition, table) in loaded {
            let slot = slots
                .get_mut(level.wrapping_sub(1) as usize)
                .and_then(|l| l.get_mut(partition as usize))
                .ok_or_else(|| StoreError::Corrupt {
                    path: mpath.clone(),
                    reason: format!("unexpected table level {level} partition {partition}"),
                })?;
            *slot = Some(table);
        }
        let levels = slots
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                l.into_iter()
                    .enumerate()
                    .map(|(j, t)| {
                        t.ok_or_else(|| StoreError::Corrupt {
                            path: mpath.clone(),
                            reason: format!("missing table level {} partition {j}", i + 1),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(Store { dir: dir.to_path_buf(), manifest, tree, levels })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn plan(&self) -> &LayoutPlan {
        &self.manifest.plan
    }

    pub fn num_levels(&self) -> u32 {
        self.manifest.plan.num_levels
    }

    fn level_tables(&self, level: u32) -> Result<&[Table], StoreError> {
        if level == 0 || level > self.num_levels() {
            return Err(StoreError::UnknownLevel(level));
        }
        Ok(&self.levels[level as usize - 1])
    }

    /// All rows of a level, unsorted.
    pub fn level_rows(&self, level: u32) -> Result<impl Iterator<Item = &StoredCluster>, StoreError> {
        Ok(self.level_tables(level)?.iter().flat_map(|t| t.rows.iter()))
    }

    /// Rows of one partition table.
    pub fn table_rows(&self, level: u32, partition: u32) -> Result<&[StoredCluster], StoreError> {
        let tables = self.level_tables(level)?;
        Ok(tables.get(partition as usize).map_or(&[][..], |t| &t.rows))
    }

    /// Rows whose bbox intersects `v` (edges inclusive), most important
    /// first, ties by representative id.
    pub fn fetch_viewport(&self, v: &Viewport) -> Result<Vec<&StoredCluster>, StoreError> {
        self.fetch_traced(v).map(|(rows, _)| rows)
    }

    pub fn fetch_traced(&self, v: &Viewport) -> Result<(Vec<&StoredCluster>, FetchTrace), StoreError> {
        let tables = self.level_tables(v.level)?;
        v.validate()?;
        let mut out = Vec::new();
        let mut trace = FetchTrace::default();
        if self.manifest.is_merged(v.level) {
            tables[0].query(v, &mut out);
            trace.visited.push(0);
        } else {
            self.visit(0, v, tables, &mut out, &mut trace);
        }
        out.sort_unstable_by(|a, b| importance_order(a.importance, a.rep_id, b.importance, b.rep_id));
        Ok((out, trace))
    }

    fn visit<'a>(
        &'a self,
        node: u32,
        v: &Viewport,
        tables: &'a [Table],
        out: &mut Vec<&'a StoredCluster>,
        trace: &mut FetchTrace,
    ) {
        let n = &self.tree.nodes[node as usize];
        if !self.extent_hits(&n.extent, v) {
            trace.pruned.extend(n.first_leaf..n.end_leaf);
            return;
        }
        match n.kind {
            NodeKind::Leaf { partition_id, .. } => {
                tables[partition_id as usize].query(v, out);
                trace.visited.push(partition_id);
            }
            NodeKind::Split { left, right, .. } => {
                self.visit(left, v, tables, out, trace);
                self.visit(right, v, tables, out, trace);
            }
        }
    }

    /// Whether any mark whose representative lies in `extent` can reach
    /// the viewport: the extent in level px, grown by half a mark.
    fn extent_hits(&self, extent: &Rect, v: &Viewport) -> bool {
        let plan = self.plan();
        let a = plan.project(extent.x_min, extent.y_min, v.level);
        let b = plan.project(extent.x_max, extent.y_max, v.level);
        let (hw, hh) = (plan.mark_width / 2.0, plan.mark_height / 2.0);
        let (x0, x1) = (a[0].min(b[0]) - hw, a[0].max(b[0]) + hw);
        let (y0, y1) = (a[1].min(b[1]) - hh, a[1].max(b[1]) + hh);
        x0 <= v.x_max && x1 >= v.x_min && y0 <= v.y_max && y1 >= v.y_min
    }
}
