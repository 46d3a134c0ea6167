//! Exact nearest-neighbor index over a fixed reference cloud.
//!
//! A static kd-tree whose queries return exactly what a brute-force
//! scan would: the minimum squared distance, with ties broken by the
//! lowest reference index. Trimmed ICP's monotonicity argument assumes
//! an exact argmin, so no approximation is allowed here.

use alloc::vec::Vec;

use crate::cloud::{Correspondence, Point3, PointCloud};
use crate::math::dist_squared;

#[derive(Debug, Clone)]
struct Node {
    /// Index into the reference cloud.
    point: u32,
    axis: u8,
    /// Children as node indices; u32::MAX marks a leaf side.
    left: u32,
    right: u32,
}

const NONE: u32 = u32::MAX;

/// Immutable spatial index over a snapshot of the reference points.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Point3>,
    nodes: Vec<Node>,
    root: u32,
}

impl NnIndex {
    /// Builds the index for exactly the given reference points.
    pub fn build(reference: &PointCloud) -> NnIndex {
        let points: Vec<Point3> = reference.points().to_vec();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_recursive(&points, &mut order, &mut nodes);
        NnIndex {
            points,
            nodes,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the reference point nearest to
    /// `query`; the lowest index wins among exact ties.
    pub fn nearest(&self, query: Point3) -> (usize, f64) {
        debug_assert!(self.root != NONE);
        let mut best = (f64::INFINITY, u32::MAX);
        self.search(self.root, query, &mut best);
        (best.1 as usize, best.0)
    }

    /// Nearest-neighbor correspondence for a template point.
    pub fn nearest_correspondence(&self, template_index: usize, query: Point3) -> Correspondence {
        let (reference_index, squared_distance) = self.nearest(query);
        Correspondence {
            template_index,
            reference_index,
            squared_distance,
        }
    }

    fn search(&self, node_id: u32, query: Point3, best: &mut (f64, u32)) {
        let node = &self.nodes[node_id as usize];
        let idx = node.point;
        let d = dist_squared(query, self.points[idx as usize]);
        if d < best.0 || (d == best.0 && idx < best.1) {
            *best = (d, idx);
        }
        let p = self.points[idx as usize];
        let diff = match node.axis {
            0 => query.x - p.x,
            1 => query.y - p.y,
            _ => query.z - p.z,
        };
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if near != NONE {
            self.search(near, query, best);
        }
        // An equal-distance, lower-index point may sit exactly on the
        // splitting plane of the far side, so prune strictly.
        if far != NONE && diff * diff <= best.0 {
            self.search(far, query, best);
        }
    }
}

fn build_recursive(points: &[Point3], order: &mut [u32], nodes: &mut Vec<Node>) -> u32 {
    if order.is_empty() {
        return NONE;
    }
    let axis = widest_axis(points, order);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ka = coord(points[a as usize], axis);
        let kb = coord(points[b as usize], axis);
        ka.total_cmp(&kb)
    });
    let pivot = order[mid];
    let (lo, rest) = order.split_at_mut(mid);
    let hi = &mut rest[1..];
    let left = build_recursive(points, lo, nodes);
    let right = build_recursive(points, hi, nodes);
    nodes.push(Node {
        point: pivot,
        axis,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}

fn widest_axis(points: &[Point3], order: &[u32]) -> u8 {
    let first = points[order[0] as usize];
    let mut lo = first;
    let mut hi = first;
    for &i in &order[1..] {
        let p = points[i as usize];
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        lo.z = lo.z.min(p.z);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
        hi.z = hi.z.max(p.z);
    }
    let ext = hi - lo;
    if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    }
}

fn coord(p: Point3, axis: u8) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}
