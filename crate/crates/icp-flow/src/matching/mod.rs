//! Candidate pairing across time plus histogram-initialized ICP scoring.

pub mod histogram;
mod icp;

pub use histogram::{histogram_init, TranslationHistogram, VOTE_CAP};
pub use icp::{icp_align, match_metrics, IcpParams, MatchScore};

use nalgebra::{Point3, Vector3};

use crate::geometry::RigidTransform;
use crate::preprocess::{ClusterLabel, ClusteredScanPair};

/// A scored cluster pair: the transform mapping the source cluster toward
/// the target cluster plus the d / r alignment metrics.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub source: usize,
    pub target: usize,
    pub transform: RigidTransform,
    pub mean_distance: f64,
    pub inlier_ratio: f64,
}

/// How ICP is seeded for each candidate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Translation voting over all pairwise point differences.
    Histogram,
    /// Translation aligning the cluster centroids.
    Centroid,
    /// Identity.
    None,
}

#[derive(Debug, Clone, Copy)]
pub struct MatchParams {
    pub tau_x: f64,
    pub tau_y: f64,
    pub tau_z: f64,
    pub bin_size: f64,
    pub init: InitMode,
    pub icp: IcpParams,
}

impl MatchParams {
    pub fn ranges(&self) -> [f64; 3] {
        [self.tau_x, self.tau_y, self.tau_z]
    }
}

/// Same-index shortcut: (m, m) for every id present in both scans. These
/// pairs are matched first; ids matched successfully downstream are
/// excluded from the locality round.
pub fn same_index_pairs(pair: &ClusteredScanPair) -> Vec<(usize, usize)> {
    let src = pair.source_ids();
    let tgt: std::collections::BTreeSet<usize> = pair.target_ids().into_iter().collect();
    src.into_iter()
        .filter(|m| tgt.contains(m))
        .map(|m| (m, m))
        .collect()
}

/// Locality round: every (m, n) over the given remaining ids whose
/// axis-aligned bounding boxes, expanded by (τx, τy) in x/y, overlap.
/// Candidate pairs are many-to-many.
pub fn locality_pairs(
    pair: &ClusteredScanPair,
    source_ids: &[usize],
    target_ids: &[usize],
    tau_x: f64,
    tau_y: f64,
) -> Vec<(usize, usize)> {
    let src_boxes: Vec<(usize, Bounds)> = source_ids
        .iter()
        .filter_map(|&m| bounds_of(&pair.scan_t.points, &pair.labels_t, m).map(|b| (m, b)))
        .collect();
    let tgt_boxes: Vec<(usize, Bounds)> = target_ids
        .iter()
        .filter_map(|&n| bounds_of(&pair.scan_t2.points, &pair.labels_t2, n).map(|b| (n, b)))
        .collect();

    let mut out = Vec::new();
    for (m, sb) in &src_boxes {
        for (n, tb) in &tgt_boxes {
            let overlap_x = sb.min_x - tau_x <= tb.max_x && sb.max_x + tau_x >= tb.min_x;
            let overlap_y = sb.min_y - tau_y <= tb.max_y && sb.max_y + tau_y >= tb.min_y;
            if overlap_x && overlap_y {
                out.push((*m, *n));
            }
        }
    }
    out
}

/// One-shot two-phase candidate generation: the same-index pairs followed by
/// locality pairs over the ids not present in both scans. The full pipeline
/// instead runs the two phases with association feedback in between (see the
/// pipeline module), which additionally excludes successfully matched ids
/// from the second phase.
pub fn pair_clusters(pair: &ClusteredScanPair, tau_x: f64, tau_y: f64) -> Vec<(usize, usize)> {
    let phase1 = same_index_pairs(pair);
    let both: std::collections::BTreeSet<usize> = phase1.iter().map(|(m, _)| *m).collect();
    let remaining_src: Vec<usize> = pair
        .source_ids()
        .into_iter()
        .filter(|m| !both.contains(m))
        .collect();
    let remaining_tgt: Vec<usize> = pair
        .target_ids()
        .into_iter()
        .filter(|n| !both.contains(n))
        .collect();
    let mut out = phase1;
    out.extend(locality_pairs(pair, &remaining_src, &remaining_tgt, tau_x, tau_y));
    out
}

struct Bounds {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

fn bounds_of(points: &[Point3<f64>], labels: &[ClusterLabel], id: usize) -> Option<Bounds> {
    let mut b: Option<Bounds> = None;
    for (p, l) in points.iter().zip(labels) {
        if *l != Some(id) {
            continue;
        }
        match &mut b {
            None => {
                b = Some(Bounds {
                    min_x: p.x,
                    max_x: p.x,
                    min_y: p.y,
                    max_y: p.y,
                })
            }
            Some(b) => {
                b.min_x = b.min_x.min(p.x);
                b.max_x = b.max_x.max(p.x);
                b.min_y = b.min_y.min(p.y);
                b.max_y = b.max_y.max(p.y);
            }
        }
    }
    b
}

/// Seeds ICP for one candidate pair according to the init mode.
pub fn initial_transform(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    params: &MatchParams,
) -> RigidTransform {
    match params.init {
        InitMode::Histogram => RigidTransform::from_translation(histogram_init(
            src,
            dst,
            params.ranges(),
            params.bin_size,
        )),
        InitMode::Centroid => {
            let sc: Vector3<f64> =
                src.iter().map(|p| p.coords).sum::<Vector3<f64>>() / src.len() as f64;
            let dc: Vector3<f64> =
                dst.iter().map(|p| p.coords).sum::<Vector3<f64>>() / dst.len() as f64;
            RigidTransform::from_translation(dc - sc)
        }
        InitMode::None => RigidTransform::identity(),
    }
}

/// Runs init + ICP per candidate; results are sorted by (source, target) so
/// the output is deterministic and independent of evaluation order.
pub fn match_candidates(
    pair: &ClusteredScanPair,
    candidates: &[(usize, usize)],
    params: &MatchParams,
) -> Vec<MatchResult> {
    let mut results: Vec<MatchResult> = candidates
        .iter()
        .filter_map(|&(m, n)| {
            let src = pair.cluster_points_t(m);
            let dst = pair.cluster_points_t2(n);
            if src.is_empty() || dst.is_empty() {
                return None;
            }
            let init = initial_transform(&src, &dst, params);
            let score = icp_align(&src, &dst, &init, &params.icp);
            Some(MatchResult {
                source: m,
                target: n,
                transform: score.transform,
                mean_distance: score.mean_distance,
                inlier_ratio: score.inlier_ratio,
            })
        })
        .collect();
    results.sort_by_key(|r| (r.source, r.target));
    results
}
