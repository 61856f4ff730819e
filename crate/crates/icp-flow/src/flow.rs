//! Per-point flow recovery from per-cluster rigid transforms, and chaining
//! of per-pair matches across a scan sequence for longer-horizon flow.

use nalgebra::Vector3;

use crate::association::Assignment;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::pipeline::{estimate_pair, PairEstimate};
use crate::preprocess::ClusterLabel;

/// Per-point 3D displacement vectors, aligned one-to-one with a source
/// scan (pre-ground-removal).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    vectors: Vec<Vector3<f64>>,
}

impl FlowField {
    pub fn new(vectors: Vec<Vector3<f64>>) -> Self {
        Self { vectors }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            vectors: vec![Vector3::zeros(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector3<f64>> {
        self.vectors.iter()
    }

    pub fn as_slice(&self) -> &[Vector3<f64>] {
        &self.vectors
    }

    pub fn get(&self, i: usize) -> &Vector3<f64> {
        &self.vectors[i]
    }
}

/// Expands the cluster assignment into a per-point flow field over the full
/// source scan: matched cluster points move by (T_k · T_ego), everything
/// else (ground, noise, unmatched clusters) by T_ego alone.
pub fn recover_flow(
    full_scan_t: &PointCloud,
    kept_index_map: &[usize],
    labels: &[ClusterLabel],
    assignment: &Assignment,
    ego: &RigidTransform,
) -> Result<FlowField> {
    if kept_index_map.len() != labels.len() {
        return Err(Error::LengthMismatch {
            context: "recover_flow kept map vs labels",
            expected: kept_index_map.len(),
            actual: labels.len(),
        });
    }
    if let Some(&bad) = kept_index_map.iter().find(|&&i| i >= full_scan_t.len()) {
        return Err(Error::LengthMismatch {
            context: "recover_flow kept index out of range",
            expected: full_scan_t.len(),
            actual: bad,
        });
    }

    let mut cluster_of_point: Vec<ClusterLabel> = vec![None; full_scan_t.len()];
    for (ki, &full_idx) in kept_index_map.iter().enumerate() {
        cluster_of_point[full_idx] = labels[ki];
    }

    // (T_k · T_ego) per cluster; identity object motion folds back to ego.
    let composed: Vec<RigidTransform> = (0..assignment.sources())
        .map(|k| assignment.transform_of(k).compose(ego))
        .collect();

    let vectors = full_scan_t
        .iter()
        .zip(&cluster_of_point)
        .map(|(x, label)| {
            let t = match label {
                Some(k) => &composed[*k],
                None => ego,
            };
            t.apply_point(x) - x
        })
        .collect();
    Ok(FlowField::new(vectors))
}

/// Per-pair estimates plus the per-cluster transform chains composed from
/// frame 0 forward.
#[derive(Debug)]
pub struct TrackGraph {
    pub estimates: Vec<PairEstimate>,
    /// Cumulative ego transform frame-0 → frame-(k+1) at index k.
    pub ego_chain: Vec<RigidTransform>,
    /// chains[c][k]: cumulative sensor-frame transform frame-0 → frame-(k+1)
    /// for frame-0 cluster c, ego included. Broken chains continue with
    /// identity object motion from the break onward.
    pub chains: Vec<Vec<RigidTransform>>,
}

/// Scan gap used for search-range scaling: positive timestamp difference
/// when present, the configured default otherwise.
pub fn resolve_dt(scan_a: &PointCloud, scan_b: &PointCloud, cfg: &PipelineConfig) -> f64 {
    let dt = scan_b.timestamp - scan_a.timestamp;
    if dt.is_finite() && dt > 0.0 {
        dt
    } else {
        cfg.dt
    }
}

/// Full single-pair pipeline between two scans an arbitrary gap apart, with
/// the translation search ranges rescaled by the gap.
pub fn direct_pair_flow(
    scan_a: &PointCloud,
    scan_b: &PointCloud,
    pose_a: &RigidTransform,
    pose_b: &RigidTransform,
    cfg: &PipelineConfig,
) -> FlowField {
    let dt = resolve_dt(scan_a, scan_b, cfg);
    estimate_pair(scan_a, scan_b, pose_a, pose_b, dt, cfg).flow
}

/// Runs the pipeline over each adjacent pair and follows every frame-0
/// cluster forward, composing per-pair transforms; emits the frame-0 →
/// frame-k flow for k = 1..K−1.
///
/// Chain linkage across pairs is by point overlap: the frame-k source
/// cluster that shares the most points with the previous pair's matched
/// target continues the chain (ties to the smaller id). A cluster that goes
/// unmatched, or whose target has no overlapping cluster in the next pair,
/// keeps identity object motion from the break onward.
pub fn track_sequence(
    scans: &[PointCloud],
    poses: &[RigidTransform],
    cfg: &PipelineConfig,
) -> Result<Vec<FlowField>> {
    if scans.len() < 2 {
        return Err(Error::InvalidConfig("need at least 2 scans to track".into()));
    }
    if poses.len() != scans.len() {
        return Err(Error::LengthMismatch {
            context: "track_sequence poses vs scans",
            expected: scans.len(),
            actual: poses.len(),
        });
    }

    let graph = build_track_graph(scans, poses, cfg);
    let first = &graph.estimates[0];
    let scan0 = &scans[0];

    let mut flows = Vec::with_capacity(graph.estimates.len());
    for k in 0..graph.estimates.len() {
        let mut chained = Assignment::unmatched(first.pair.cluster_count);
        for (c, chain) in graph.chains.iter().enumerate() {
            // recover_flow composes with ego itself, so strip the cumulative
            // ego off the chained transform: chain = T_obj · ego_chain.
            let object_only = chain[k].compose(&graph.ego_chain[k].invert());
            chained.set(c, c, object_only);
        }
        flows.push(recover_flow(
            scan0,
            &first.kept_t,
            &first.pair.labels_t,
            &chained,
            &graph.ego_chain[k],
        )?);
    }
    Ok(flows)
}

/// Estimates every adjacent pair and composes the per-cluster chains.
pub fn build_track_graph(
    scans: &[PointCloud],
    poses: &[RigidTransform],
    cfg: &PipelineConfig,
) -> TrackGraph {
    let estimates: Vec<PairEstimate> = (0..scans.len() - 1)
        .map(|j| {
            let dt = resolve_dt(&scans[j], &scans[j + 1], cfg);
            estimate_pair(&scans[j], &scans[j + 1], &poses[j], &poses[j + 1], dt, cfg)
        })
        .collect();

    let mut ego_chain = Vec::with_capacity(estimates.len());
    let mut ego_acc = RigidTransform::identity();
    for est in &estimates {
        ego_acc = est.ego.compose(&ego_acc);
        ego_chain.push(ego_acc);
    }

    let cluster_count0 = estimates[0].pair.cluster_count;
    let mut chains: Vec<Vec<RigidTransform>> = vec![Vec::new(); cluster_count0];

    for c0 in 0..cluster_count0 {
        let mut cumulative = RigidTransform::identity();
        // Target cluster id carried into the next pair, None once broken.
        let mut carry: Option<usize> = Some(c0);
        for (j, est) in estimates.iter().enumerate() {
            let source = match carry {
                Some(prev) if j == 0 => Some(prev),
                Some(prev) => vote_continuation(&estimates[j - 1], est, prev),
                None => None,
            };
            let step = match source {
                Some(m) if est.assignment.is_matched(m) => {
                    carry = est.assignment.target_of(m);
                    est.assignment.transform_of(m).compose(&est.ego)
                }
                _ => {
                    carry = None;
                    est.ego
                }
            };
            cumulative = step.compose(&cumulative);
            chains[c0].push(cumulative);
        }
    }

    TrackGraph {
        estimates,
        ego_chain,
        chains,
    }
}

/// Finds the source cluster of `next` that overlaps the most points with
/// target cluster `prev_target` of `prev`, both labelings mapped back onto
/// the shared full scan. Ties go to the smaller id.
fn vote_continuation(
    prev: &PairEstimate,
    next: &PairEstimate,
    prev_target: usize,
) -> Option<usize> {
    let shared_len = prev
        .kept_t2
        .iter()
        .chain(next.kept_t.iter())
        .max()
        .map_or(0, |m| m + 1);
    let mut prev_label: Vec<ClusterLabel> = vec![None; shared_len];
    for (ki, &full) in prev.kept_t2.iter().enumerate() {
        prev_label[full] = prev.pair.labels_t2[ki];
    }

    let mut votes = vec![0usize; next.pair.cluster_count];
    for (ki, &full) in next.kept_t.iter().enumerate() {
        if prev_label.get(full) == Some(&Some(prev_target)) {
            if let Some(m) = next.pair.labels_t[ki] {
                votes[m] += 1;
            }
        }
    }
    votes
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .max_by(|(ia, va), (ib, vb)| va.cmp(vb).then(ib.cmp(ia)))
        .map(|(i, _)| i)
}
