//! Median-split KD tree over raw object coordinates.

use super::PartitionError;
use crate::data::PointObject;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn at_depth(depth: u32) -> Axis {
        if depth.is_multiple_of(2) {
            Axis::X
        } else {
            Axis::Y
        }
    }

    #[inline]
    fn coord(self, o: &PointObject) -> f64 {
        match self {
            Axis::X => o.x,
            Axis::Y => o.y,
        }
    }
}

/// Axis-aligned rectangle in raw data units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn bounding(objects: &[PointObject]) -> Self {
        objects.iter().fold(
            Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |r, o| Rect::new(r.x_min.min(o.x), r.y_min.min(o.y), r.x_max.max(o.x), r.y_max.max(o.y)),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    fn split(&self, axis: Axis, v: f64) -> (Rect, Rect) {
        match axis {
            Axis::X => (Rect { x_max: v, ..*self }, Rect { x_min: v, ..*self }),
            Axis::Y => (Rect { y_max: v, ..*self }, Rect { y_min: v, ..*self }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Split {
        axis: Axis,
        split_value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        partition_id: u32,
        object_count: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdNode {
    pub depth: u32,
    pub extent: Rect,
    /// Leaves `first_leaf..end_leaf` lie under this node (leaf ids are
    /// assigned in depth-first order).
    pub first_leaf: u32,
    pub end_leaf: u32,
    pub kind: NodeKind,
}

/// Partition scheme shared by every level of a distributed build.
#[derive(Debug, Clone, PartialEq)]
pub struct KdPartitionTree {
    /// Node 0 is the root.
    pub nodes: Vec<KdNode>,
    /// Node index of each partition id.
    pub leaves: Vec<u32>,
    /// Partition id of each object, by index into the input slice.
    pub assignment: Vec<u32>,
    pub capacity: u64,
}

/// Leaf record of the partition manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionInfo {
    pub partition_id: u32,
    pub object_count: u64,
    pub extent: Rect,
}

/// Nested JSON form of the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KdManifestNode {
    #[serde(rename_all = "camelCase")]
    Split { axis: Axis, split_value: f64, extent: Rect, children: Box<[KdManifestNode; 2]> },
    Leaf(PartitionInfo),
}

/// Builds the tree by recursive median splits until every leaf holds at
/// most `capacity` objects.
///
/// Objects are ordered by `(coordinate, id)` on the split axis and the left
/// child receives the first `ceil(n/2)` of them; `split_value` is the lower
/// median. Objects sharing the median coordinate may therefore land on
/// either side, so leaf membership is recorded per object in
/// [`KdPartitionTree::assignment`] rather than re-derived from coordinates.
pub fn build_kd_tree(objects: &[PointObject], capacity: u64, root: Rect) -> Result<KdPartitionTree, PartitionError> {
    if capacity < 1 {
        return Err(PartitionError::InvalidCapacity);
    }
    let mut b = Builder {
        objects,
        capacity: capacity as usize,
        nodes: Vec::new(),
        leaves: Vec::new(),
        assignment: vec![0; objects.len()],
    };
    let mut idx: Vec<u32> = (0..objects.len() as u32).collect();
    b.build(&mut idx, 0, root);
    Ok(KdPartitionTree { nodes: b.nodes, leaves: b.leaves, assignment: b.assignment, capacity })
}

struct Builder<'a> {
    objects: &'a [PointObject],
    capacity: usize,
    nodes: Vec<KdNode>,
    leaves: Vec<u32>,
    assignment: Vec<u32>,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [u32], depth: u32, extent: Rect) -> u32 {
        let me = self.nodes.len() as u32;
        let first_leaf = self.leaves.len() as u32;
        if idx.len() <= self.capacity {
            let pid = first_leaf;
            for &i in idx.iter() {
                self.assignment[i as usize] = pid;
            }
            self.leaves.push(me);
            self.nodes.push(KdNode {
                depth,
                extent,
                first_leaf,
                end_leaf: first_leaf + 1,
                kind: NodeKind::Leaf { partition_id: pid, object_count: idx.len() as u64 },
            });
            return me;
        }
        let axis = Axis::at_depth(depth);
        let objs = self.objects;
        let cmp = |a: &u32, b: &u32| -> Ordering {
            let (oa, ob) = (&objs[*a as usize], &objs[*b as usize]);
            axis.coord(oa).total_cmp(&axis.coord(ob)).then(oa.id.cmp(&ob.id))
        };
        let n_left = idx.len().div_ceil(2);
        idx.select_nth_unstable_by(n_left - 1, cmp);
        let split_value = axis.coord(&objs[idx[n_left - 1] as usize]);
        // Placeholder, patched once children exist.
        self.nodes.push(KdNode {
            depth,
            extent,
            first_leaf,
            end_leaf: first_leaf,
            kind: NodeKind::Split { axis, split_value, left: 0, right: 0 },
        });
        let (le, re) = extent.split(axis, split_value);
        let (li, ri) = idx.split_at_mut(n_left);
        let left = self.build(li, depth + 1, le);
        let right = self.build(ri, depth + 1, re);
        let node = &mut self.nodes[me as usize];
        node.end_leaf = self.leaves.len() as u32;
        node.kind = NodeKind::Split { axis, split_value, left, right };
        me
    }
}

impl KdPartitionTree {
    /// One partition holding all `n` objects.
    pub fn single(n: usize, root: Rect) -> Self {
        Self {
            nodes: vec![KdNode {
                depth: 0,
                extent: root,
                first_leaf: 0,
                end_leaf: 1,
                kind: NodeKind::Leaf { partition_id: 0, object_count: n as u64 },
            }],
            leaves: vec![0],
            assignment: vec![0; n],
            capacity: n as u64,
        }
    }

    pub fn root(&self) -> &KdNode {
        &self.nodes[0]
    }

    pub fn partition_count(&self) -> usize {
        self.leaves.len()
    }

    /// Depth of the deepest split node plus one; zero for a single leaf.
    pub fn split_depths(&self) -> u32 {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Split { .. }))
            .map(|n| n.depth + 1)
            .max()
            .unwrap_or(0)
    }

    /// Split node indices at `depth`, ordered by leaf range.
    pub fn splits_at_depth(&self, depth: u32) -> Vec<u32> {
        let mut v: Vec<u32> = (0..self.nodes.len() as u32)
            .filter(|&i| {
                let n = &self.nodes[i as usize];
                n.depth == depth && matches!(n.kind, NodeKind::Split { .. })
            })
            .collect();
        v.sort_by_key(|&i| self.nodes[i as usize].first_leaf);
        v
    }

    pub fn partitions(&self) -> Vec<PartitionInfo> {
        self.leaves
            .iter()
            .map(|&n| {
                let node = &self.nodes[n as usize];
                match node.kind {
                    NodeKind::Leaf { partition_id, object_count } => {
                        PartitionInfo { partition_id, object_count, extent: node.extent }
                    }
                    NodeKind::Split { .. } => unreachable!("leaf index points at a split"),
                }
            })
            .collect()
    }

    pub fn to_manifest(&self) -> KdManifestNode {
        self.manifest_node(0)
    }

    fn manifest_node(&self, i: u32) -> KdManifestNode {
        let n = &self.nodes[i as usize];
        match n.kind {
            NodeKind::Leaf { partition_id, object_count } => {
                KdManifestNode::Leaf(PartitionInfo { partition_id, object_count, extent: n.extent })
            }
            NodeKind::Split { axis, split_value, left, right } => KdManifestNode::Split {
                axis,
                split_value,
                extent: n.extent,
                children: Box::new([self.manifest_node(left), self.manifest_node(right)]),
            },
        }
    }

    /// Rebuilds the node arena from a manifest. Object assignments are not
    /// part of the manifest and come back empty.
    pub fn from_manifest(root: &KdManifestNode) -> Result<Self, PartitionError> {
        let mut t = KdPartitionTree { nodes: vec![], leaves: vec![], assignment: vec![], capacity: 0 };
        t.load(root, 0)?;
        t.capacity = t
            .nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Leaf { object_count, .. } => Some(object_count),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Ok(t)
    }

    fn load(&mut self, m: &KdManifestNode, depth: u32) -> Result<u32, PartitionError> {
        let me = self.nodes.len() as u32;
        let first_leaf = self.leaves.len() as u32;
        match m {
            KdManifestNode::Leaf(p) => {
                if p.partition_id != first_leaf {
                    return Err(PartitionError::BadManifest(format!(
                        "partition {} found where {} was expected",
                        p.partition_id, first_leaf
                    )));
                }
                self.leaves.push(me);
                self.nodes.push(KdNode {
                    depth,
                    extent: p.extent,
                    first_leaf,
                    end_leaf: first_leaf + 1,
                    kind: NodeKind::Leaf { partition_id: p.partition_id, object_count: p.object_count },
                });
            }
            KdManifestNode::Split { axis, split_value, extent, children } => {
                self.nodes.push(KdNode {
                    depth,
                    extent: *extent,
                    first_leaf,
                    end_leaf: first_leaf,
                    kind: NodeKind::Leaf { partition_id: 0, object_count: 0 },
                });
                let left = self.load(&children[0], depth + 1)?;
                let right = self.load(&children[1], depth + 1)?;
                let node = &mut self.nodes[me as usize];
                node.end_leaf = self.leaves.len() as u32;
                node.kind = NodeKind::Split { axis: *axis, split_value: *split_value, left, right };
            }
        }
        Ok(me)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate, Distribution};
    use proptest::prelude::*;

    fn pt(id: u64, x: f64, y: f64) -> PointObject {
        PointObject { id, x, y, importance: 0.0, payload: vec![] }
    }

    /// Independent validity check: leaf sizes, contiguous ids, disjoint and
    /// complete assignment, objects inside their leaf extents, sibling
    /// balance and axis alternation.
    fn check_tree(t: &KdPartitionTree, objs: &[PointObject], m: u64) {
        let infos = t.partitions();
        let mut counts = vec![0u64; infos.len()];
        for (i, &p) in t.assignment.iter().enumerate() {
            counts[p as usize] += 1;
            assert!(infos[p as usize].extent.contains(objs[i].x, objs[i].y));
        }
        for (i, info) in infos.iter().enumerate() {
            assert_eq!(info.partition_id, i as u32);
            assert_eq!(info.object_count, counts[i]);
            assert!(info.object_count <= m);
        }
        assert_eq!(counts.iter().sum::<u64>(), objs.len() as u64);
        for n in &t.nodes {
            if let NodeKind::Split { axis, left, right, .. } = n.kind {
                assert_eq!(axis, if n.depth % 2 == 0 { Axis::X } else { Axis::Y });
                let size = |k: u32| -> u64 {
                    let c = &t.nodes[k as usize];
                    (c.first_leaf..c.end_leaf).map(|l| counts[l as usize]).sum()
                };
                assert!(size(left).abs_diff(size(right)) <= 1);
                assert!(size(left) >= size(right));
                assert_eq!(t.nodes[left as usize].end_leaf, t.nodes[right as usize].first_leaf);
            }
        }
    }

    #[test]
    fn fits_in_one_leaf() {
        let objs: Vec<_> = (0..10).map(|i| pt(i, i as f64, 0.0)).collect();
        let t = build_kd_tree(&objs, 10, Rect::bounding(&objs)).unwrap();
        assert_eq!(t.partition_count(), 1);
        assert_eq!(t.split_depths(), 0);
        assert_eq!(t, KdPartitionTree::single(10, Rect::bounding(&objs)));
    }

    #[test]
    fn rejects_zero_capacity() {
        assert_eq!(build_kd_tree(&[], 0, Rect::new(0.0, 0.0, 1.0, 1.0)), Err(PartitionError::InvalidCapacity));
    }

    /// Eight points on a horizontal line with capacity 2: an X split at the
    /// root, degenerate Y splits below it, four leaves of two.
    #[test]
    fn collinear_eight() {
        let objs: Vec<_> = (0..8).map(|i| pt(i, i as f64, 5.0)).collect();
        let t = build_kd_tree(&objs, 2, Rect::bounding(&objs)).unwrap();
        check_tree(&t, &objs, 2);
        assert_eq!(t.partition_count(), 4);
        assert_eq!(t.split_depths(), 2);
        let root = match t.root().kind {
            NodeKind::Split { axis, split_value, .. } => (axis, split_value),
            _ => panic!(),
        };
        assert_eq!(root, (Axis::X, 3.0));
        for s in t.splits_at_depth(1) {
            match t.nodes[s as usize].kind {
                NodeKind::Split { axis, split_value, .. } => assert_eq!((axis, split_value), (Axis::Y, 5.0)),
                _ => panic!(),
            }
        }
        assert_eq!(t.assignment, vec![0, 0, 1, 1, 2, 2, 3, 3]);
        assert!(t.partitions().iter().all(|p| p.object_count == 2));
    }

    #[test]
    fn skewed_hundred_thousand() {
        let ds = generate(Distribution::Skew, 100_000, 3);
        let objs: Vec<_> = ds
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| pt(i as u64, r[0].as_f64().unwrap(), r[1].as_f64().unwrap()))
            .collect();
        let t = build_kd_tree(&objs, 1000, Rect::bounding(&objs)).unwrap();
        check_tree(&t, &objs, 1000);
        assert_eq!(t.partition_count(), 128);
    }

    #[test]
    fn manifest_roundtrip() {
        let objs: Vec<_> = (0..37).map(|i| pt(i, (i * 7 % 11) as f64, (i * 5 % 13) as f64)).collect();
        let t = build_kd_tree(&objs, 4, Rect::bounding(&objs)).unwrap();
        let json = serde_json::to_string(&t.to_manifest()).unwrap();
        let back: KdManifestNode = serde_json::from_str(&json).unwrap();
        let t2 = KdPartitionTree::from_manifest(&back).unwrap();
        assert_eq!(t2.nodes, t.nodes);
        assert_eq!(t2.leaves, t.leaves);
    }

    proptest! {
        #[test]
        fn tree_is_valid(pts in prop::collection::vec((0i32..20, 0i32..20), 0..200), m in 1u64..9) {
            let objs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| pt(i as u64, x as f64, y as f64)).collect();
            let t = build_kd_tree(&objs, m, Rect::new(0.0, 0.0, 20.0, 20.0)).unwrap();
            check_tree(&t, &objs, m);
        }
    }
}
