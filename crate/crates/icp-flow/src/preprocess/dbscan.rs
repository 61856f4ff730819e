//! Deterministic DBSCAN-style density clustering.
//!
//! Core points (at least `min_samples` points, the point itself included,
//! within `eps`) are linked into connected components; non-core points
//! within `eps` of a core point join the cluster of their lowest-index core
//! neighbor. Label assignment depends only on point order, never on
//! traversal order, so results are reproducible.

use nalgebra::Point3;

use crate::geometry::NeighborIndex;
use crate::preprocess::ClusterLabel;

pub fn dbscan(points: &[Point3<f64>], eps: f64, min_samples: usize) -> Vec<ClusterLabel> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_samples >= 1, "min_samples must be at least 1");
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }

    let index = NeighborIndex::build(points).expect("non-empty");
    let neighborhoods: Vec<Vec<usize>> = points
        .iter()
        .map(|p| index.within_radius(p, eps))
        .collect();
    let core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_samples).collect();

    let mut labels: Vec<ClusterLabel> = vec![None; n];
    let mut next = 0usize;

    // Connected components over core points.
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let id = next;
        next += 1;
        labels[start] = Some(id);
        let mut queue = vec![start];
        while let Some(i) = queue.pop() {
            for &j in &neighborhoods[i] {
                if core[j] && labels[j].is_none() {
                    labels[j] = Some(id);
                    queue.push(j);
                }
            }
        }
    }

    // Border points adopt the cluster of their lowest-index core neighbor.
    for i in 0..n {
        if core[i] || labels[i].is_some() {
            continue;
        }
        if let Some(&c) = neighborhoods[i].iter().find(|&&j| core[j]) {
            labels[i] = labels[c];
        }
    }

    labels
}
