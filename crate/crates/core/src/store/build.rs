use super::table::encode_table;
use super::{RankEntry, StoreError, StoredCluster};
use crate::data::{ColumnDef, PointObject};
use crate::grammar::LayoutPlan;
use crate::layout::LevelLayout;
use crate::partition::{KdManifestNode, KdPartitionTree, PartitionInfo};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

/// Levels `1..=L` are stored as one table each.
pub const DEFAULT_MERGED_LEVELS: u32 = 3;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableEntry {
    pub level: u32,
    pub partition: u32,
    /// Relative to the build directory.
    pub path: String,
    pub rows: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub format_version: u32,
    pub object_count: u64,
    pub merged_levels: u32,
    /// Dataset columns, in payload order.
    pub columns: Vec<ColumnDef>,
    pub plan: LayoutPlan,
    pub kd_tree: KdManifestNode,
    pub partitions: Vec<PartitionInfo>,
    pub tables: Vec<TableEntry>,
}

impl Manifest {
    pub fn is_merged(&self, level: u32) -> bool {
        level <= self.merged_levels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildSummary {
    pub manifest: Manifest,
    pub bytes_written: u64,
}

/// Converts one level into table rows, keyed by partition of the
/// representative (or 0 on merged levels), each group sorted by importance.
pub fn stored_rows(
    layout: &LevelLayout,
    tree: &KdPartitionTree,
    plan: &LayoutPlan,
    objects: &[PointObject],
    merged: bool,
) -> Vec<Vec<StoredCluster>> {
    let mut groups = vec![Vec::new(); if merged { 1 } else { tree.partition_count() }];
    let (hw, hh) = (plan.mark_width / 2.0, plan.mark_height / 2.0);
    for c in &layout.clusters {
        let rep = &objects[c.rep as usize];
        let partition = if merged { 0 } else { tree.assignment[c.rep as usize] };
        groups[partition as usize].push(StoredCluster {
            level: layout.level,
            partition,
            rep_id: rep.id,
            importance: rep.importance,
            cx: c.cx,
            cy: c.cy,
            member_count: c.member_count(),
            bbox: [c.cx - hw, c.cy - hh, c.cx + hw, c.cy + hh],
            agg: c.agg.clone(),
            ranklist: c
                .ranklist
                .iter()
                .map(|&i| {
                    let o = &objects[i as usize];
                    RankEntry { id: o.id, importance: o.importance, payload: o.payload.clone() }
                })
                .collect(),
            rep_payload: rep.payload.clone(),
            boundary: c.boundary.clone(),
        });
    }
    for g in &mut groups {
        g.sort_by(|a, b| crate::data::importance_order(a.importance, a.rep_id, b.importance, b.rep_id));
    }
    groups
}

/// What a build persists, besides the output directory.
#[derive(Debug, Clone, Copy)]
pub struct BuildInput<'a> {
    pub levels: &'a [LevelLayout],
    pub tree: &'a KdPartitionTree,
    pub plan: &'a LayoutPlan,
    pub objects: &'a [PointObject],
    pub columns: &'a [ColumnDef],
    pub merged_levels: u32,
}

/// Writes `<out>/level_<i>/part_<j>.tbl` for every table, plus
/// `manifest.json` and `partitions.json`. Output depends only on the inputs,
/// so rebuilding unchanged layouts reproduces the files byte for byte.
pub fn build_indexes(input: BuildInput<'_>, out: &Path) -> Result<BuildSummary, StoreError> {
    let BuildInput { levels, tree, plan, objects, columns, merged_levels } = input;
    assert_eq!(tree.assignment.len(), objects.len(), "tree was built over a different object set");
    fs::create_dir_all(out).map_err(|e| StoreError::io(out, e))?;
    let jobs: Vec<(u32, u32, Vec<StoredCluster>)> = levels
        .iter()
        .flat_map(|l| {
            let merged = l.level <= merged_levels;
            stored_rows(l, tree, plan, objects, merged)
                .into_iter()
                .enumerate()
                .map(move |(j, rows)| (l.level, j as u32, rows))
        })
        .collect();
    let tables: Vec<(TableEntry, u64)> = jobs
        .into_par_iter()
        .map(|(level, partition, rows)| {
            let rel = format!("level_{level}/part_{partition}.tbl");
            let dir = out.join(format!("level_{level}"));
            fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
            let buf = encode_table(level, partition, &rows);
            let path = out.join(&rel);
            fs::write(&path, &buf).map_err(|e| StoreError::io(&path, e))?;
            let entry = TableEntry {
                level,
                partition,
                path: rel,
                rows: rows.len() as u64,
                sha256: format!("{:x}", Sha256::digest(&buf)),
            };
            Ok((entry, buf.len() as u64))
        })
        .collect::<Result<_, StoreError>>()?;
    let bytes_written = tables.iter().map(|t| t.1).sum();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        object_count: objects.len() as u64,
        merged_levels,
        columns: columns.to_vec(),
        plan: plan.clone(),
        kd_tree: tree.to_manifest(),
        partitions: tree.partitions(),
        tables: tables.into_iter().map(|t| t.0).collect(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    write_json(&out.join("partitions.json"), &manifest.partitions)?;
    Ok(BuildSummary { manifest, bytes_written })
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), StoreError> {
    let mut s = serde_json::to_string_pretty(v).expect("manifest types serialize");
    s.push('\n');
    fs::write(path, s).map_err(|e| StoreError::io(path, e))
}
