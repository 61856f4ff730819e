//! Exact nearest-neighbor search over a fixed point set.
//!
//! A plain kd-tree; exact (never approximate) so ICP stays deterministic,
//! with ties broken by lowest point index for bit-reproducible pipelines.

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Immutable spatial index supporting exact nearest-neighbor and
/// radius queries.
#[derive(Debug)]
pub struct NeighborIndex {
    points: Vec<Point3<f64>>,
    root: Option<Box<Node>>,
}

#[derive(Debug)]
struct Node {
    index: u32,
    axis: u8,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

impl NeighborIndex {
    /// Builds the index; fails with `EmptyIndex` for an empty point set.
    pub fn build(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let root = build_node(points, &mut order, 0);
        Ok(Self {
            points: points.to_vec(),
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &Point3<f64> {
        &self.points[index]
    }

    /// Exact Euclidean nearest neighbor; ties broken by lowest point index.
    pub fn nearest(&self, query: &Point3<f64>) -> (usize, f64) {
        let mut best = (u32::MAX, f64::INFINITY);
        nearest_rec(
            self.root.as_deref().expect("index is never empty"),
            &self.points,
            query,
            &mut best,
        );
        (best.0 as usize, best.1.sqrt())
    }

    /// Indices of all points within `radius` of `query`, ascending.
    pub fn within_radius(&self, query: &Point3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        radius_rec(
            self.root.as_deref().expect("index is never empty"),
            &self.points,
            query,
            radius * radius,
            &mut out,
        );
        out.sort_unstable();
        out
    }
}

fn build_node(points: &[Point3<f64>], order: &mut [u32], depth: usize) -> Option<Box<Node>> {
    if order.is_empty() {
        return None;
    }
    let axis = (depth % 3) as u8;
    let mid = order.len() / 2;
    // Strict (coordinate, index) ordering keeps the split deterministic
    // even with duplicate coordinates.
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ca = points[a as usize][axis as usize];
        let cb = points[b as usize][axis as usize];
        ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
    });
    let index = order[mid];
    let (left, rest) = order.split_at_mut(mid);
    let right = &mut rest[1..];
    Some(Box::new(Node {
        index,
        axis,
        left: build_node(points, left, depth + 1),
        right: build_node(points, right, depth + 1),
    }))
}

fn nearest_rec(
    node: &Node,
    points: &[Point3<f64>],
    query: &Point3<f64>,
    best: &mut (u32, f64),
) {
    let p = &points[node.index as usize];
    let d2 = (p - query).norm_squared();
    if d2 < best.1 || (d2 == best.1 && node.index < best.0) {
        *best = (node.index, d2);
    }

    let delta = query[node.axis as usize] - p[node.axis as usize];
    let (near, far) = if delta < 0.0 {
        (&node.left, &node.right)
    } else {
        (&node.right, &node.left)
    };
    if let Some(n) = near {
        nearest_rec(n, points, query, best);
    }
    // `<=` so equidistant candidates on the far side are still visited,
    // which the lowest-index tie-break requires.
    if let Some(f) = far {
        if delta * delta <= best.1 {
            nearest_rec(f, points, query, best);
        }
    }
}

fn radius_rec(
    node: &Node,
    points: &[Point3<f64>],
    query: &Point3<f64>,
    radius_sq: f64,
    out: &mut Vec<usize>,
) {
    let p = &points[node.index as usize];
    if (p - query).norm_squared() <= radius_sq {
        out.push(node.index as usize);
    }
    let delta = query[node.axis as usize] - p[node.axis as usize];
    let (near, far) = if delta < 0.0 {
        (&node.left, &node.right)
    } else {
        (&node.right, &node.left)
    };
    if let Some(n) = near {
        radius_rec(n, points, query, radius_sq, out);
    }
    if let Some(f) = far {
        if delta * delta <= radius_sq {
            radius_rec(f, points, query, radius_sq, out);
        }
    }
}
