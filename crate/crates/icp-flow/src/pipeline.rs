//! Single-pair estimation driver: preprocesses a scan pair, runs the
//! two-round candidate matching, and resolves the final cluster assignment.
//!
//! Round one scores the same-index shortcut pairs; ids matched there are
//! removed, and round two scores bounding-box locality pairs among whatever
//! remains. Both rounds share the same thresholds.

use crate::association::{associate_argmin, associate_hungarian, build_matrices, Assignment};
use crate::config::{AssociationMode, PipelineConfig};
use crate::flow::{recover_flow, FlowField};
use crate::geometry::{PointCloud, RigidTransform};
use crate::matching::{locality_pairs, match_candidates, same_index_pairs, MatchResult};
use crate::preprocess::{cluster_fused, compensate_ego, remove_ground, select_top_clusters, ClusteredScanPair};

/// Everything produced while estimating one scan pair. `flow` is aligned
/// with the full source scan; the rest is kept for chaining and diagnostics.
#[derive(Debug)]
pub struct PairEstimate {
    pub flow: FlowField,
    pub pair: ClusteredScanPair,
    pub assignment: Assignment,
    /// Sensor-frame motion from the source scan's frame into the target's.
    pub ego: RigidTransform,
    /// Original index of each surviving source point.
    pub kept_t: Vec<usize>,
    /// Original index of each surviving target point.
    pub kept_t2: Vec<usize>,
    pub results: Vec<MatchResult>,
}

/// Relative ego motion mapping sensor-frame-t coordinates into
/// sensor-frame-t2, from the two sensor-to-world poses.
pub fn relative_ego(pose_t: &RigidTransform, pose_t2: &RigidTransform) -> RigidTransform {
    pose_t2.invert().compose(pose_t)
}

/// Runs the full single-pair pipeline. `dt` controls the translation search
/// ranges (τx = τy = speed_cap · dt).
pub fn estimate_pair(
    scan_t: &PointCloud,
    scan_t2: &PointCloud,
    pose_t: &RigidTransform,
    pose_t2: &RigidTransform,
    dt: f64,
    cfg: &PipelineConfig,
) -> PairEstimate {
    let ego = relative_ego(pose_t, pose_t2);
    let compensated = compensate_ego(scan_t, &ego);

    let (ng_t, kept_t) = remove_ground(&compensated, cfg.z_threshold);
    let (ng_t2, kept_t2) = remove_ground(scan_t2, cfg.z_threshold);

    let pair = cluster_fused(&ng_t, &ng_t2, cfg.eps, cfg.min_samples, cfg.min_cluster_size);
    let pair = select_top_clusters(&pair, cfg.max_clusters);

    let (assignment, results) = match_pair(&pair, dt, cfg);

    let flow = recover_flow(scan_t, &kept_t, &pair.labels_t, &assignment, &ego)
        .expect("kept map and labels are consistent by construction");

    PairEstimate {
        flow,
        pair,
        assignment,
        ego,
        kept_t,
        kept_t2,
        results,
    }
}

/// Two-round candidate generation, scoring, and association on an already
/// clustered pair.
pub fn match_pair(
    pair: &ClusteredScanPair,
    dt: f64,
    cfg: &PipelineConfig,
) -> (Assignment, Vec<MatchResult>) {
    let params = cfg.match_params(dt);
    let associate = |results: &[MatchResult]| -> Assignment {
        let (mats, transforms) = build_matrices(results, pair.cluster_count, pair.cluster_count)
            .expect("candidate pairs are unique within a round");
        match cfg.association {
            AssociationMode::Argmin => associate_argmin(&mats, cfg.tau_d, cfg.tau_r, &transforms),
            AssociationMode::Hungarian => {
                associate_hungarian(&mats, cfg.tau_d, cfg.tau_r, &transforms)
            }
        }
    };

    // Round 1: same-index shortcut.
    let phase1 = same_index_pairs(pair);
    let results1 = match_candidates(pair, &phase1, &params);
    let mut assignment = associate(&results1);

    // Round 2: locality pairing among ids not matched yet.
    let matched_targets: std::collections::BTreeSet<usize> =
        assignment.matched_pairs().map(|(_, n)| n).collect();
    let remaining_src: Vec<usize> = pair
        .source_ids()
        .into_iter()
        .filter(|&m| !assignment.is_matched(m))
        .collect();
    let remaining_tgt: Vec<usize> = pair
        .target_ids()
        .into_iter()
        .filter(|n| !matched_targets.contains(n))
        .collect();

    let phase2 = locality_pairs(pair, &remaining_src, &remaining_tgt, params.tau_x, params.tau_y);
    let results2 = match_candidates(pair, &phase2, &params);
    assignment.merge_from(&associate(&results2));

    let mut results = results1;
    results.extend(results2);
    results.sort_by_key(|r| (r.source, r.target));
    (assignment, results)
}
