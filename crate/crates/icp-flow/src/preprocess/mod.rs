//! Ego-motion compensation, ground removal, and fused density clustering.

mod dbscan;

pub use dbscan::dbscan;

use nalgebra::Point3;

use crate::geometry::{NeighborIndex, PointCloud, RigidTransform};

/// Per-point cluster label; `None` is noise (no cluster).
pub type ClusterLabel = Option<usize>;

/// The two non-ground scans of a pair, clustered as one fused point set and
/// split back by scan of origin. Cluster ids are contiguous `0..cluster_count`
/// and each id appears in at least one of the two label lists.
#[derive(Debug, Clone)]
pub struct ClusteredScanPair {
    /// Ego-compensated, ground-removed scan at time t.
    pub scan_t: PointCloud,
    /// Ground-removed scan at time t + Δt.
    pub scan_t2: PointCloud,
    pub labels_t: Vec<ClusterLabel>,
    pub labels_t2: Vec<ClusterLabel>,
    pub cluster_count: usize,
}

impl ClusteredScanPair {
    /// Points of cluster `id` drawn from the scan at time t.
    pub fn cluster_points_t(&self, id: usize) -> Vec<Point3<f64>> {
        collect_cluster(&self.scan_t, &self.labels_t, id)
    }

    /// Points of cluster `id` drawn from the scan at time t + Δt.
    pub fn cluster_points_t2(&self, id: usize) -> Vec<Point3<f64>> {
        collect_cluster(&self.scan_t2, &self.labels_t2, id)
    }

    /// Fused point count per cluster id.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.cluster_count];
        for l in self.labels_t.iter().chain(self.labels_t2.iter()).flatten() {
            sizes[*l] += 1;
        }
        sizes
    }

    /// Ids with at least one point in the scan at time t, ascending.
    pub fn source_ids(&self) -> Vec<usize> {
        ids_present(&self.labels_t, self.cluster_count)
    }

    /// Ids with at least one point in the scan at time t + Δt, ascending.
    pub fn target_ids(&self) -> Vec<usize> {
        ids_present(&self.labels_t2, self.cluster_count)
    }
}

fn collect_cluster(scan: &PointCloud, labels: &[ClusterLabel], id: usize) -> Vec<Point3<f64>> {
    scan.iter()
        .zip(labels)
        .filter(|(_, l)| **l == Some(id))
        .map(|(p, _)| *p)
        .collect()
}

fn ids_present(labels: &[ClusterLabel], cluster_count: usize) -> Vec<usize> {
    let mut present = vec![false; cluster_count];
    for l in labels.iter().flatten() {
        present[*l] = true;
    }
    present
        .iter()
        .enumerate()
        .filter(|(_, p)| **p)
        .map(|(i, _)| i)
        .collect()
}

/// Maps the scan into the other frame's coordinate system; the source scan
/// is left unmodified.
pub fn compensate_ego(scan: &PointCloud, ego: &RigidTransform) -> PointCloud {
    ego.apply(scan)
}

/// Keeps exactly the points with z > `z_threshold`. The returned index map
/// gives, for each surviving point, its index in the original scan so flow
/// can be written back to the full scan later.
pub fn remove_ground(scan: &PointCloud, z_threshold: f64) -> (PointCloud, Vec<usize>) {
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (i, p) in scan.iter().enumerate() {
        if p.z > z_threshold {
            points.push(*p);
            kept.push(i);
        }
    }
    (PointCloud::new(points, scan.timestamp), kept)
}

/// Concatenates the two scans, density-clusters the fused set, discards
/// clusters smaller than `min_cluster_size` as noise, relabels the rest
/// contiguously (descending fused size, ties by smallest member index), and
/// splits the labels back by scan of origin.
pub fn cluster_fused(
    scan_t: &PointCloud,
    scan_t2: &PointCloud,
    eps: f64,
    min_samples: usize,
    min_cluster_size: usize,
) -> ClusteredScanPair {
    let fused: Vec<Point3<f64>> = scan_t.iter().chain(scan_t2.iter()).copied().collect();
    let raw = if fused.is_empty() {
        Vec::new()
    } else {
        dbscan(&fused, eps, min_samples)
    };

    let raw_count = raw.iter().flatten().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; raw_count];
    let mut first_member = vec![usize::MAX; raw_count];
    for (i, l) in raw.iter().enumerate() {
        if let Some(c) = l {
            sizes[*c] += 1;
            first_member[*c] = first_member[*c].min(i);
        }
    }

    // Survivors ordered by descending fused size, ties by smallest member.
    let mut survivors: Vec<usize> = (0..raw_count)
        .filter(|&c| sizes[c] >= min_cluster_size.max(1))
        .collect();
    survivors.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first_member[a].cmp(&first_member[b])));

    let mut relabel = vec![None; raw_count];
    for (new_id, &old_id) in survivors.iter().enumerate() {
        relabel[old_id] = Some(new_id);
    }

    let final_labels: Vec<ClusterLabel> = raw
        .iter()
        .map(|l| l.and_then(|c| relabel[c]))
        .collect();

    let (labels_t, labels_t2) = final_labels.split_at(scan_t.len());
    ClusteredScanPair {
        scan_t: scan_t.clone(),
        scan_t2: scan_t2.clone(),
        labels_t: labels_t.to_vec(),
        labels_t2: labels_t2.to_vec(),
        cluster_count: survivors.len(),
    }
}

/// Keeps the `max_clusters` largest clusters (by fused point count, ties by
/// smaller id); demoted clusters' points are relabeled noise so they receive
/// identity transforms downstream.
pub fn select_top_clusters(pair: &ClusteredScanPair, max_clusters: usize) -> ClusteredScanPair {
    if pair.cluster_count <= max_clusters {
        return pair.clone();
    }
    let sizes = pair.cluster_sizes();
    let mut order: Vec<usize> = (0..pair.cluster_count).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    order.truncate(max_clusters);
    order.sort_unstable();

    let mut relabel = vec![None; pair.cluster_count];
    for (new_id, &old_id) in order.iter().enumerate() {
        relabel[old_id] = Some(new_id);
    }
    let remap = |labels: &[ClusterLabel]| -> Vec<ClusterLabel> {
        labels.iter().map(|l| l.and_then(|c| relabel[c])).collect()
    };
    ClusteredScanPair {
        scan_t: pair.scan_t.clone(),
        scan_t2: pair.scan_t2.clone(),
        labels_t: remap(&pair.labels_t),
        labels_t2: remap(&pair.labels_t2),
        cluster_count: order.len(),
    }
}

/// Symmetric Chamfer distance (mean nearest-neighbor distance, both ways).
pub fn chamfer_distance(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let ia = NeighborIndex::build(a).expect("non-empty");
    let ib = NeighborIndex::build(b).expect("non-empty");
    let d_ab: f64 = a.iter().map(|p| ib.nearest(p).1).sum::<f64>() / a.len() as f64;
    let d_ba: f64 = b.iter().map(|p| ia.nearest(p).1).sum::<f64>() / b.len() as f64;
    0.5 * (d_ab + d_ba)
}
