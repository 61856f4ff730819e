//! Point-to-point ICP refinement and the d / r alignment metrics.

use nalgebra::Point3;

use crate::error::Error;
use crate::geometry::{best_rigid_fit, NeighborIndex, RigidTransform};
use crate::geometry::fit::centroid_translation;

/// Outcome of aligning one cluster pair: the cumulative transform mapping
/// src toward dst plus the alignment metrics.
#[derive(Debug, Clone)]
pub struct MatchScore {
    pub transform: RigidTransform,
    /// Mean nearest-neighbor distance of transformed src points (meters).
    pub mean_distance: f64,
    /// Inliers / (L_m + L_n − inliers). May exceed 1 when several src
    /// points share a nearest neighbor.
    pub inlier_ratio: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct IcpParams {
    pub max_iters: usize,
    /// Stop once the RMS correspondence distance improves by less than this.
    pub convergence_tol: f64,
    /// Correspondence distance below which a pair counts as an inlier.
    pub tau_inlier: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iters: 100,
            convergence_tol: 1e-4,
            tau_inlier: 0.1,
        }
    }
}

/// Iterates nearest-neighbor correspondence and closed-form rigid fitting
/// from `init` until the RMS correspondence distance stops improving, then
/// scores the converged transform. Degenerate fits (collinear clusters)
/// fall back to a translation-only update for that iteration; the loop
/// never aborts.
pub fn icp_align(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    init: &RigidTransform,
    params: &IcpParams,
) -> MatchScore {
    let (score, _) = icp_align_trace(src, dst, init, params);
    score
}

pub(crate) fn icp_align_trace(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    init: &RigidTransform,
    params: &IcpParams,
) -> (MatchScore, Vec<f64>) {
    assert!(!src.is_empty() && !dst.is_empty(), "clusters must be non-empty");
    let index = NeighborIndex::build(dst).expect("non-empty");

    let mut transform = *init;
    let mut rms_trace = vec![rms_distance(src, &index, &transform)];
    let mut iterations = 0;

    for _ in 0..params.max_iters {
        let corr: Vec<Point3<f64>> = src
            .iter()
            .map(|p| {
                let (j, _) = index.nearest(&transform.apply_point(p));
                *index.point(j)
            })
            .collect();

        let candidate = match best_rigid_fit(src, &corr) {
            Ok(t) => t,
            Err(Error::DegenerateInput) => {
                RigidTransform::from_translation(centroid_translation(src, &corr))
            }
            Err(e) => unreachable!("equal-length fit cannot fail otherwise: {e}"),
        };

        let rms = rms_distance(src, &index, &candidate);
        let prev = *rms_trace.last().expect("trace is non-empty");
        if rms > prev {
            break; // reject a non-improving step, keep the previous transform
        }
        transform = candidate;
        iterations += 1;
        rms_trace.push(rms);
        if prev - rms < params.convergence_tol {
            break;
        }
    }

    let (mean_distance, inlier_ratio) =
        match_metrics(src, dst, &transform, params.tau_inlier);
    (
        MatchScore {
            transform,
            mean_distance,
            inlier_ratio,
            iterations,
        },
        rms_trace,
    )
}

fn rms_distance(src: &[Point3<f64>], dst_index: &NeighborIndex, t: &RigidTransform) -> f64 {
    let sum_sq: f64 = src
        .iter()
        .map(|p| {
            let d = dst_index.nearest(&t.apply_point(p)).1;
            d * d
        })
        .sum();
    (sum_sq / src.len() as f64).sqrt()
}

/// Direct evaluation of the alignment metrics for a given transform:
/// d = mean over src of the transformed nearest-neighbor distance, and
/// r = inliers / (L_m + L_n − inliers) with an inlier being a
/// correspondence within `tau_inlier`.
pub fn match_metrics(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    t: &RigidTransform,
    tau_inlier: f64,
) -> (f64, f64) {
    assert!(!src.is_empty() && !dst.is_empty(), "clusters must be non-empty");
    let index = NeighborIndex::build(dst).expect("non-empty");
    let mut sum = 0.0;
    let mut inliers = 0usize;
    for p in src {
        let d = index.nearest(&t.apply_point(p)).1;
        sum += d;
        if d <= tau_inlier {
            inliers += 1;
        }
    }
    let mean = sum / src.len() as f64;
    let denom = (src.len() + dst.len() - inliers) as f64;
    (mean, inliers as f64 / denom)
}
