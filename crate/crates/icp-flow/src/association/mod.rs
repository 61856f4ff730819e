//! Cluster correspondence resolution from the scored candidate pairs:
//! distance / inlier-ratio matrices, thresholded row-argmin, and an
//! optional one-to-one Hungarian alternative.

mod hungarian;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::matching::MatchResult;

/// Sentinel cost standing in for infeasible entries when the rectangular
/// problem is padded to a square one; large but finite so the solver stays
/// numerically well-defined.
const PAD_COST: f64 = 1e6;

/// M×N matrices of the d / r metrics; entries never scored by ICP hold
/// +∞ in `distance` and 0 in `inlier_ratio`.
#[derive(Debug, Clone)]
pub struct AssociationMatrices {
    pub sources: usize,
    pub targets: usize,
    distance: Vec<f64>,
    inlier_ratio: Vec<f64>,
}

impl AssociationMatrices {
    pub fn distance(&self, m: usize, n: usize) -> f64 {
        self.distance[m * self.targets + n]
    }

    pub fn inlier_ratio(&self, m: usize, n: usize) -> f64 {
        self.inlier_ratio[m * self.targets + n]
    }
}

/// Per source cluster: the matched target and transform, or unmatched
/// (identity transform).
#[derive(Debug, Clone)]
pub struct Assignment {
    matches: Vec<Option<(usize, RigidTransform)>>,
}

impl Assignment {
    pub fn unmatched(sources: usize) -> Self {
        Self {
            matches: vec![None; sources],
        }
    }

    pub fn sources(&self) -> usize {
        self.matches.len()
    }

    pub fn target_of(&self, source: usize) -> Option<usize> {
        self.matches[source].as_ref().map(|(n, _)| *n)
    }

    /// The matched transform, or identity for unmatched sources.
    pub fn transform_of(&self, source: usize) -> RigidTransform {
        self.matches[source]
            .as_ref()
            .map(|(_, t)| *t)
            .unwrap_or_else(RigidTransform::identity)
    }

    pub fn is_matched(&self, source: usize) -> bool {
        self.matches[source].is_some()
    }

    pub fn set(&mut self, source: usize, target: usize, transform: RigidTransform) {
        self.matches[source] = Some((target, transform));
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matches
            .iter()
            .enumerate()
            .filter_map(|(m, v)| v.as_ref().map(|(n, _)| (m, *n)))
    }

    /// Merges another assignment into this one; only unmatched rows are
    /// overwritten.
    pub fn merge_from(&mut self, other: &Assignment) {
        for (m, v) in other.matches.iter().enumerate() {
            if self.matches[m].is_none() {
                self.matches[m] = v.clone();
            }
        }
    }
}

/// Fills the matrices from the scored results; unscored entries stay at
/// (+∞, 0). Two results for the same (source, target) are an error.
pub fn build_matrices(
    results: &[MatchResult],
    sources: usize,
    targets: usize,
) -> Result<(AssociationMatrices, BTreeMap<(usize, usize), RigidTransform>)> {
    let mut mats = AssociationMatrices {
        sources,
        targets,
        distance: vec![f64::INFINITY; sources * targets],
        inlier_ratio: vec![0.0; sources * targets],
    };
    let mut transforms = BTreeMap::new();
    for r in results {
        assert!(r.source < sources && r.target < targets, "result ids in range");
        let idx = r.source * targets + r.target;
        if transforms.insert((r.source, r.target), r.transform).is_some() {
            return Err(Error::DuplicateCandidate {
                src: r.source,
                dst: r.target,
            });
        }
        mats.distance[idx] = r.mean_distance;
        mats.inlier_ratio[idx] = r.inlier_ratio;
    }
    Ok((mats, transforms))
}

/// Row argmin over entries surviving the inlier-ratio mask; ties go to the
/// lowest target id. Returns `None` when the row is empty after masking.
pub(crate) fn row_argmin(distances: &[f64], ratios: &[f64], tau_r: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (n, (&d, &r)) in distances.iter().zip(ratios).enumerate() {
        if r < tau_r || !d.is_finite() {
            continue;
        }
        if best.is_none_or(|b| d < distances[b]) {
            best = Some(n);
        }
    }
    best
}

/// Per source row: mask entries with r < τ_r, take the argmin over the
/// remaining distances, then reject the winner if its d > τ_d. Rejected or
/// empty rows stay unmatched. Target reuse across rows is permitted.
pub fn associate_argmin(
    mats: &AssociationMatrices,
    tau_d: f64,
    tau_r: f64,
    transforms: &BTreeMap<(usize, usize), RigidTransform>,
) -> Assignment {
    let mut out = Assignment::unmatched(mats.sources);
    for m in 0..mats.sources {
        let row_d = &mats.distance[m * mats.targets..(m + 1) * mats.targets];
        let row_r = &mats.inlier_ratio[m * mats.targets..(m + 1) * mats.targets];
        if let Some(n) = row_argmin(row_d, row_r, tau_r) {
            if row_d[n] <= tau_d {
                out.set(m, n, transforms[&(m, n)]);
            }
        }
    }
    out
}

/// One-to-one minimum-cost assignment over the feasible entries
/// (r ≥ τ_r and d ≤ τ_d) on cost d; the rectangular matrix is padded to a
/// square one with a large finite sentinel, and sources that end up on a
/// padded or infeasible entry stay unmatched.
pub fn associate_hungarian(
    mats: &AssociationMatrices,
    tau_d: f64,
    tau_r: f64,
    transforms: &BTreeMap<(usize, usize), RigidTransform>,
) -> Assignment {
    let mut out = Assignment::unmatched(mats.sources);
    let side = mats.sources.max(mats.targets);
    if side == 0 {
        return out;
    }

    let mut costs = vec![PAD_COST; side * side];
    for m in 0..mats.sources {
        for n in 0..mats.targets {
            let d = mats.distance(m, n);
            let r = mats.inlier_ratio(m, n);
            if r >= tau_r && d <= tau_d {
                costs[m * side + n] = d;
            }
        }
    }

    let assignment = hungarian::solve_square(&costs, side);
    for m in 0..mats.sources {
        let n = assignment[m];
        if n < mats.targets && costs[m * side + n] < PAD_COST {
            out.set(m, n, transforms[&(m, n)]);
        }
    }
    out
}
