//! Deterministic synthetic scene generator with exact ground-truth flow.
//!
//! Scenes are a flat ground plane plus rigidly moving cuboids sampled on
//! their surfaces, the way a scanner sees shells rather than volumes. Every
//! quantity is derived from a seeded RNG, so a spec generates bit-identical
//! samples on every run.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::geometry::{best_rigid_fit, NeighborIndex, PointCloud, RigidTransform};

/// Ground points stay below, object points above this z in every frame;
/// used both by generation and by sample verification.
pub const FG_BOUNDARY_Z: f64 = 0.3;

/// Object bases sit in this z band, far enough above [`FG_BOUNDARY_Z`]
/// that sampling noise cannot push points across it.
const OBJECT_BASE_Z: (f64, f64) = (0.5, 0.8);

/// Required surface-to-surface gap between objects over all frame pairs:
/// more than twice the default clustering eps, so each object is its own
/// density component.
const SEPARATION_GAP: f64 = 1.6;

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_objects: usize,
    /// Object x-extent range (meters).
    pub length_range: (f64, f64),
    /// Object y-extent range (meters).
    pub width_range: (f64, f64),
    /// Object z-extent range (meters).
    pub height_range: (f64, f64),
    /// Object speed range (m/s); capped at 33.3 so histogram search ranges
    /// cover every motion.
    pub speed_range: (f64, f64),
    /// Yaw rate range (deg/s), about the object's own center.
    pub yaw_rate_range: (f64, f64),
    pub ground_half_extent: f64,
    /// Ground points per m².
    pub ground_density: f64,
    /// Object surface points per m².
    pub surface_density: f64,
    /// Isotropic Gaussian noise on point positions (meters).
    pub noise_sigma: f64,
    pub dt: f64,
    pub n_frames: usize,
    /// Ego velocity along +x (m/s); poses are sensor-to-world.
    pub ego_speed: f64,
    /// Resample surfaces each frame; false is mirror mode (frames are exact
    /// rigid transforms of the frame-0 points, for exact-recovery tests).
    pub resample: bool,
    /// Sample only faces whose outward normal points toward the sensor,
    /// mimicking partial views.
    pub view_culling: bool,
    /// Adds a near-duplicate of object 0 nearby and routes the last object
    /// out of the sensed range mid-clip.
    pub hard_mode: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_objects: 4,
            length_range: (3.5, 5.5),
            width_range: (1.6, 2.2),
            height_range: (1.2, 1.8),
            speed_range: (0.0, 15.0),
            yaw_rate_range: (0.0, 20.0),
            ground_half_extent: 30.0,
            ground_density: 3.0,
            surface_density: 60.0,
            noise_sigma: 0.02,
            dt: 0.1,
            n_frames: 2,
            ego_speed: 0.0,
            resample: true,
            view_culling: false,
            hard_mode: false,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("length", self.length_range),
            ("width", self.width_range),
            ("height", self.height_range),
            ("speed", self.speed_range),
            ("yaw-rate", self.yaw_rate_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidSpec(format!(
                    "{name} range ({lo}, {hi}) is not a valid interval"
                )));
            }
        }
        for (name, (lo, _)) in &ranges[..3] {
            if *lo <= 0.0 {
                return Err(Error::InvalidSpec(format!("{name} must be positive")));
            }
        }
        if self.speed_range.0 < 0.0 || self.speed_range.1 > 33.3 {
            return Err(Error::InvalidSpec(
                "speeds must stay within [0, 33.3] m/s".into(),
            ));
        }
        if !(self.ground_half_extent.is_finite() && self.ground_half_extent > 0.0) {
            return Err(Error::InvalidSpec("ground half extent must be positive".into()));
        }
        if self.ground_density <= 0.0 || self.surface_density <= 0.0 {
            return Err(Error::InvalidSpec("densities must be positive".into()));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidSpec("noise sigma must be non-negative".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidSpec("dt must be positive".into()));
        }
        if self.n_frames < 1 {
            return Err(Error::InvalidSpec("need at least one frame".into()));
        }
        if !self.ego_speed.is_finite() {
            return Err(Error::InvalidSpec("ego speed must be finite".into()));
        }
        Ok(())
    }
}

/// Exact per-object and per-point ground truth, available for in-memory
/// samples (file reloads reconstruct geometry-only checks instead).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    /// Per frame, per point: the object id, or `None` for ground.
    pub object_ids: Vec<Vec<Option<usize>>>,
    /// motions[o][k]: sensor-frame motion of object o from frame 0 to k.
    pub motions: Vec<Vec<RigidTransform>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub scans: Vec<PointCloud>,
    /// Sensor-to-world pose per frame.
    pub poses: Vec<RigidTransform>,
    /// Ground-truth flow frame-0 → frame-k, aligned with scans[0];
    /// flows[k-1] covers frame k.
    pub flows: Vec<FlowField>,
    /// Per frame, per point: annotated foreground (object) flag.
    pub fg_masks: Vec<Vec<bool>>,
    pub truth: Option<SceneTruth>,
}

#[derive(Debug, Clone)]
struct ObjectState {
    dims: (f64, f64, f64),
    center: Point3<f64>,
    yaw: f64,
    velocity: Vector3<f64>,
    yaw_rate: f64,
    /// Circumscribed xy radius, all yaws covered.
    radius: f64,
    /// Frames in which the object is inside the sensed range.
    visible: Vec<bool>,
}

impl ObjectState {
    fn center_at(&self, k: usize, dt: f64) -> Point3<f64> {
        self.center + self.velocity * (k as f64 * dt)
    }

    /// World-frame rigid motion carrying frame-0 object points to frame k.
    fn world_motion(&self, k: usize, dt: f64) -> RigidTransform {
        let rot = RigidTransform::rotation_z(self.yaw_rate * k as f64 * dt);
        let c0 = self.center.coords;
        let ck = self.center_at(k, dt).coords;
        RigidTransform::from_translation(ck)
            .compose(&rot)
            .compose(&RigidTransform::from_translation(-c0))
    }
}

pub fn generate(spec: &SceneSpec) -> Result<SceneSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let objects = place_objects(spec, &mut rng)?;
    let poses: Vec<RigidTransform> = (0..spec.n_frames)
        .map(|k| {
            RigidTransform::from_translation(Vector3::new(
                spec.ego_speed * k as f64 * spec.dt,
                0.0,
                0.0,
            ))
        })
        .collect();

    // World-frame geometry per frame.
    let mut scans = Vec::with_capacity(spec.n_frames);
    let mut fg_masks = Vec::with_capacity(spec.n_frames);
    let mut object_ids: Vec<Vec<Option<usize>>> = Vec::with_capacity(spec.n_frames);

    // Mirror mode reuses the frame-0 world points and transforms them.
    let ground_base = sample_ground(spec, &mut rng);
    let object_base: Vec<Vec<Point3<f64>>> = objects
        .iter()
        .map(|o| sample_object_world(spec, o, 0, &poses[0], &mut rng))
        .collect();

    for k in 0..spec.n_frames {
        let mut world: Vec<Point3<f64>> = Vec::new();
        let mut ids: Vec<Option<usize>> = Vec::new();

        if spec.resample && k > 0 {
            world.extend(sample_ground(spec, &mut rng));
        } else {
            world.extend_from_slice(&ground_base);
        }
        ids.resize(world.len(), None);

        for (oi, obj) in objects.iter().enumerate() {
            if !obj.visible[k] {
                continue;
            }
            let pts: Vec<Point3<f64>> = if spec.resample && k > 0 {
                sample_object_world(spec, obj, k, &poses[k], &mut rng)
            } else {
                let motion = obj.world_motion(k, spec.dt);
                object_base[oi].iter().map(|p| motion.apply_point(p)).collect()
            };
            ids.extend(std::iter::repeat_n(Some(oi), pts.len()));
            world.extend(pts);
        }

        let to_sensor = poses[k].invert();
        let sensor_pts: Vec<Point3<f64>> =
            world.iter().map(|p| to_sensor.apply_point(p)).collect();
        fg_masks.push(ids.iter().map(|i| i.is_some()).collect());
        scans.push(PointCloud::new(sensor_pts, k as f64 * spec.dt));
        object_ids.push(ids);
    }

    // Sensor-frame motions frame-0 → frame-k per object, and the flows.
    let motions: Vec<Vec<RigidTransform>> = objects
        .iter()
        .map(|obj| {
            (0..spec.n_frames)
                .map(|k| {
                    poses[k]
                        .invert()
                        .compose(&obj.world_motion(k, spec.dt))
                        .compose(&poses[0])
                })
                .collect()
        })
        .collect();

    let mut flows = Vec::with_capacity(spec.n_frames.saturating_sub(1));
    for k in 1..spec.n_frames {
        let ego_rel = poses[k].invert().compose(&poses[0]);
        let vectors: Vec<Vector3<f64>> = scans[0]
            .iter()
            .zip(&object_ids[0])
            .map(|(x, id)| {
                let t = match id {
                    Some(o) => &motions[*o][k],
                    None => &ego_rel,
                };
                t.apply_point(x) - x
            })
            .collect();
        flows.push(FlowField::new(vectors));
    }

    Ok(SceneSample {
        scans,
        poses,
        flows,
        fg_masks,
        truth: Some(SceneTruth {
            object_ids,
            motions,
        }),
    })
}

fn place_objects(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Vec<ObjectState>> {
    let mut objects: Vec<ObjectState> = Vec::new();
    let horizon = spec.dt * (spec.n_frames.saturating_sub(1)) as f64;

    for _ in 0..spec.n_objects {
        let mut placed = false;
        for _attempt in 0..200 {
            let dims = (
                rng.random_range(spec.length_range.0..=spec.length_range.1),
                rng.random_range(spec.width_range.0..=spec.width_range.1),
                rng.random_range(spec.height_range.0..=spec.height_range.1),
            );
            let radius = 0.5 * (dims.0 * dims.0 + dims.1 * dims.1).sqrt();
            let margin = radius + 0.5;
            let speed = rng.random_range(spec.speed_range.0..=spec.speed_range.1);
            let heading = rng.random_range(0.0..std::f64::consts::TAU);
            let reach = margin + speed * horizon;
            if reach >= spec.ground_half_extent {
                continue;
            }
            let lo = -(spec.ground_half_extent - reach);
            let hi = spec.ground_half_extent - reach;
            let base_z = rng.random_range(OBJECT_BASE_Z.0..=OBJECT_BASE_Z.1);
            let candidate = ObjectState {
                dims,
                center: Point3::new(
                    rng.random_range(lo..=hi),
                    rng.random_range(lo..=hi),
                    base_z + dims.2 / 2.0,
                ),
                yaw: rng.random_range(0.0..std::f64::consts::TAU),
                velocity: Vector3::new(heading.cos(), heading.sin(), 0.0) * speed,
                yaw_rate: rng.random_range(spec.yaw_rate_range.0..=spec.yaw_rate_range.1).to_radians(),
                radius,
                visible: vec![true; spec.n_frames],
            };
            if separated_everywhere(&candidate, &objects, spec) {
                objects.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidSpec(format!(
                "could not place {} objects with the required separation inside ±{} m",
                spec.n_objects, spec.ground_half_extent
            )));
        }
    }

    if spec.hard_mode && !objects.is_empty() {
        objects.push(near_duplicate(&objects[0], spec));
        let escaper = escape_object(spec, rng);
        objects.push(escaper);
    }
    Ok(objects)
}

/// Surface gap above [`SEPARATION_GAP`] between every pair of objects over
/// every pair of frames, so fused clustering over any two frames keeps the
/// objects apart.
fn separated_everywhere(candidate: &ObjectState, placed: &[ObjectState], spec: &SceneSpec) -> bool {
    for other in placed {
        for ka in 0..spec.n_frames {
            let ca = candidate.center_at(ka, spec.dt);
            for kb in 0..spec.n_frames {
                let cb = other.center_at(kb, spec.dt);
                let dist = (ca.xy() - cb.xy()).norm();
                if dist <= candidate.radius + other.radius + SEPARATION_GAP {
                    return false;
                }
            }
        }
    }
    true
}

fn near_duplicate(original: &ObjectState, spec: &SceneSpec) -> ObjectState {
    let mut dup = original.clone();
    let heading = if original.velocity.norm() > 1e-9 {
        original.velocity.normalize()
    } else {
        Vector3::x()
    };
    let lateral = Vector3::new(-heading.y, heading.x, 0.0);
    let offset = 2.0 * original.radius + SEPARATION_GAP + 0.5;
    dup.center += lateral * offset;
    let _ = spec;
    dup
}

/// Fast object heading straight out of the sensed range; it drops out of
/// the scans once its center crosses the extent.
fn escape_object(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> ObjectState {
    let dims = (spec.length_range.1, spec.width_range.1, spec.height_range.1);
    let radius = 0.5 * (dims.0 * dims.0 + dims.1 * dims.1).sqrt();
    let start_x = spec.ground_half_extent - radius - 0.5;
    // Fast enough to cross the extent before the clip ends, capped at the
    // physical bound the search ranges were designed for.
    let horizon = spec.dt * spec.n_frames.saturating_sub(1).max(1) as f64;
    let speed = ((radius + 1.0) / horizon).min(33.3);
    let base_z = OBJECT_BASE_Z.0;
    let mut obj = ObjectState {
        dims,
        center: Point3::new(start_x, -(spec.ground_half_extent - radius - 1.0), base_z + dims.2 / 2.0),
        yaw: 0.0,
        velocity: Vector3::new(speed, 0.0, 0.0),
        yaw_rate: 0.0,
        radius,
        visible: vec![true; spec.n_frames],
    };
    let _ = rng;
    for k in 0..spec.n_frames {
        let c = obj.center_at(k, spec.dt);
        if c.x.abs() > spec.ground_half_extent || c.y.abs() > spec.ground_half_extent {
            obj.visible[k] = false;
        }
    }
    obj
}

fn sample_ground(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    let area = (2.0 * spec.ground_half_extent) * (2.0 * spec.ground_half_extent);
    let count = (spec.ground_density * area).round() as usize;
    let noise = noise_dist(spec.noise_sigma);
    (0..count)
        .map(|_| {
            let mut p = Point3::new(
                rng.random_range(-spec.ground_half_extent..spec.ground_half_extent),
                rng.random_range(-spec.ground_half_extent..spec.ground_half_extent),
                0.0,
            );
            add_noise(&mut p, &noise, rng);
            p
        })
        .collect()
}

/// Samples an object's surface at its frame-k world placement. Faces are
/// weighted by area; with view culling only sensor-facing faces emit points.
fn sample_object_world(
    spec: &SceneSpec,
    obj: &ObjectState,
    k: usize,
    pose_k: &RigidTransform,
    rng: &mut ChaCha8Rng,
) -> Vec<Point3<f64>> {
    let (l, w, h) = obj.dims;
    let areas = [w * h, w * h, l * h, l * h, l * w, l * w];
    let total_area: f64 = areas.iter().sum();
    let count = (spec.surface_density * total_area).round() as usize;

    let yaw_k = obj.yaw + obj.yaw_rate * k as f64 * spec.dt;
    let rot = RigidTransform::rotation_z(yaw_k);
    let center_k = obj.center_at(k, spec.dt);
    let sensor = pose_k.apply_point(&Point3::origin());
    let noise = noise_dist(spec.noise_sigma);

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.random_range(0.0..total_area);
        let mut face = 5;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                face = i;
                break;
            }
            pick -= a;
        }
        let (u, v) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let (local, normal): (Vector3<f64>, Vector3<f64>) = match face {
            0 => (Vector3::new(-l / 2.0, u * w, v * h), -Vector3::x()),
            1 => (Vector3::new(l / 2.0, u * w, v * h), Vector3::x()),
            2 => (Vector3::new(u * l, -w / 2.0, v * h), -Vector3::y()),
            3 => (Vector3::new(u * l, w / 2.0, v * h), Vector3::y()),
            4 => (Vector3::new(u * l, v * w, -h / 2.0), -Vector3::z()),
            _ => (Vector3::new(u * l, v * w, h / 2.0), Vector3::z()),
        };
        let mut p = Point3::from(center_k.coords + rot.apply_vector(&local));
        if spec.view_culling {
            let n_world = rot.apply_vector(&normal);
            if n_world.dot(&(sensor - p)) <= 0.0 {
                continue;
            }
        }
        add_noise(&mut p, &noise, rng);
        out.push(p);
    }
    out
}

fn noise_dist(sigma: f64) -> Option<Normal<f64>> {
    if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("sigma validated"))
    } else {
        None
    }
}

fn add_noise(p: &mut Point3<f64>, dist: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) {
    if let Some(d) = dist {
        p.x += d.sample(rng);
        p.y += d.sample(rng);
        p.z += d.sample(rng);
    }
}

/// Checks the sample invariants: length coherence, finiteness, the fg/bg
/// z-boundary, and that every flow is exactly rigid per object (via the
/// recorded truth when present, otherwise via rigid fits on connectivity
/// groups). Used as a test oracle.
pub fn verify_sample(sample: &SceneSample) -> bool {
    let tol = if sample.truth.is_some() { 1e-9 } else { 1e-4 };
    verify_sample_with_tol(sample, tol)
}

pub fn verify_sample_with_tol(sample: &SceneSample, tol: f64) -> bool {
    let n_frames = sample.scans.len();
    if n_frames == 0
        || sample.poses.len() != n_frames
        || sample.fg_masks.len() != n_frames
        || sample.flows.len() + 1 != n_frames
    {
        return false;
    }
    for k in 0..n_frames {
        if sample.fg_masks[k].len() != sample.scans[k].len() {
            return false;
        }
        if !sample.scans[k].iter().all(|p| p.coords.iter().all(|v| v.is_finite())) {
            return false;
        }
    }
    for flow in &sample.flows {
        if flow.len() != sample.scans[0].len() {
            return false;
        }
        if !flow.iter().all(|f| f.iter().all(|v| v.is_finite())) {
            return false;
        }
    }

    // Foreground/background are separated by the z boundary in every frame.
    for (scan, mask) in sample.scans.iter().zip(&sample.fg_masks) {
        for (p, &fg) in scan.iter().zip(mask) {
            if fg != (p.z > FG_BOUNDARY_Z) {
                return false;
            }
        }
    }

    match &sample.truth {
        Some(truth) => verify_against_truth(sample, truth, tol),
        None => verify_geometrically(sample, tol),
    }
}

fn verify_against_truth(sample: &SceneSample, truth: &SceneTruth, tol: f64) -> bool {
    if truth.object_ids.len() != sample.scans.len() {
        return false;
    }
    let ids0 = &truth.object_ids[0];
    if ids0.len() != sample.scans[0].len() {
        return false;
    }
    for (k, flow) in sample.flows.iter().enumerate() {
        let frame = k + 1;
        let ego_rel = sample.poses[frame].invert().compose(&sample.poses[0]);
        for ((x, id), f) in sample.scans[0].iter().zip(ids0).zip(flow.iter()) {
            let t = match id {
                Some(o) => &truth.motions[*o][frame],
                None => &ego_rel,
            };
            if (t.apply_point(x) - x - f).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Without recorded truth: foreground points are grouped by connectivity
/// (objects are generated well-separated) and each group's flow must fit a
/// single rigid motion; background flow must equal the ego-relative motion.
fn verify_geometrically(sample: &SceneSample, tol: f64) -> bool {
    let scan0 = &sample.scans[0];
    let fg0 = &sample.fg_masks[0];
    let fg_idx: Vec<usize> = (0..scan0.len()).filter(|&i| fg0[i]).collect();
    let groups = connectivity_groups(scan0, &fg_idx, 0.75);

    for (k, flow) in sample.flows.iter().enumerate() {
        let frame = k + 1;
        let ego_rel = sample.poses[frame].invert().compose(&sample.poses[0]);
        for (i, p) in scan0.iter().enumerate() {
            if fg0[i] {
                continue;
            }
            if (ego_rel.apply_point(p) - p - flow.get(i)).norm() > tol {
                return false;
            }
        }
        for group in &groups {
            if group.len() < 3 {
                continue;
            }
            let src: Vec<Point3<f64>> = group.iter().map(|&i| scan0.points[i]).collect();
            let dst: Vec<Point3<f64>> = group.iter().map(|&i| scan0.points[i] + flow.get(i)).collect();
            match best_rigid_fit(&src, &dst) {
                Ok(fit) => {
                    let worst = src
                        .iter()
                        .zip(&dst)
                        .map(|(s, d)| (fit.apply_point(s) - d).norm())
                        .fold(0.0f64, f64::max);
                    if worst > tol {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
    }
    true
}

fn connectivity_groups(scan: &PointCloud, subset: &[usize], radius: f64) -> Vec<Vec<usize>> {
    if subset.is_empty() {
        return Vec::new();
    }
    let pts: Vec<Point3<f64>> = subset.iter().map(|&i| scan.points[i]).collect();
    let index = NeighborIndex::build(&pts).expect("non-empty");
    let mut group_of = vec![usize::MAX; pts.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..pts.len() {
        if group_of[start] != usize::MAX {
            continue;
        }
        let gid = groups.len();
        groups.push(Vec::new());
        let mut queue = vec![start];
        group_of[start] = gid;
        while let Some(i) = queue.pop() {
            groups[gid].push(subset[i]);
            for j in index.within_radius(&pts[i], radius) {
                if group_of[j] == usize::MAX {
                    group_of[j] = gid;
                    queue.push(j);
                }
            }
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scene_is_all_ground() {
        let spec = SceneSpec {
            n_objects: 0,
            ground_half_extent: 10.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        assert!(sample.fg_masks[0].iter().all(|&fg| !fg));
        // Static world, static ego: zero flow.
        assert!(sample.flows[0].iter().all(|f| f.norm() == 0.0));
        assert!(verify_sample(&sample));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SceneSpec {
            n_objects: 3,
            n_frames: 3,
            ground_half_extent: 20.0,
            ..SceneSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flow_norm_tracks_object_speed() {
        let spec = SceneSpec {
            seed: 3,
            n_objects: 1,
            speed_range: (10.0, 10.0),
            yaw_rate_range: (0.0, 0.0),
            ground_half_extent: 25.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        let truth = sample.truth.as_ref().unwrap();
        let mut norms = Vec::new();
        for (i, id) in truth.object_ids[0].iter().enumerate() {
            if id.is_some() {
                norms.push(sample.flows[0].get(i).norm());
            }
        }
        assert!(!norms.is_empty());
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean flow {mean}");
    }

    #[test]
    fn ground_truth_is_rigid_per_object() {
        let spec = SceneSpec {
            seed: 7,
            n_objects: 3,
            n_frames: 3,
            yaw_rate_range: (5.0, 30.0),
            ground_half_extent: 25.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        let truth = sample.truth.as_ref().unwrap();
        for k in 1..spec.n_frames {
            for o in 0..3 {
                let idx: Vec<usize> = truth.object_ids[0]
                    .iter()
                    .enumerate()
                    .filter(|(_, id)| **id == Some(o))
                    .map(|(i, _)| i)
                    .collect();
                if idx.len() < 3 {
                    continue;
                }
                let src: Vec<Point3<f64>> = idx.iter().map(|&i| sample.scans[0].points[i]).collect();
                let dst: Vec<Point3<f64>> = idx
                    .iter()
                    .map(|&i| sample.scans[0].points[i] + sample.flows[k - 1].get(i))
                    .collect();
                let fit = best_rigid_fit(&src, &dst).unwrap();
                let worst = src
                    .iter()
                    .zip(&dst)
                    .map(|(s, d)| (fit.apply_point(s) - d).norm())
                    .fold(0.0f64, f64::max);
                assert!(worst < 1e-9, "object {o} frame {k}: residual {worst}");
            }
        }
    }

    #[test]
    fn verify_detects_tampering() {
        let spec = SceneSpec {
            seed: 11,
            n_objects: 2,
            ground_half_extent: 20.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        assert!(verify_sample(&sample));

        let mut tampered = sample.clone();
        let mut vectors: Vec<Vector3<f64>> = tampered.flows[0].iter().copied().collect();
        vectors[0].x += 1e-3;
        tampered.flows[0] = FlowField::new(vectors);
        assert!(!verify_sample(&tampered));

        let mut flipped = sample.clone();
        let ground_idx = flipped.fg_masks[0].iter().position(|&fg| !fg).unwrap();
        flipped.fg_masks[0][ground_idx] = true;
        assert!(!verify_sample(&flipped));
    }

    #[test]
    fn geometric_verification_works_without_truth() {
        let spec = SceneSpec {
            seed: 13,
            n_objects: 2,
            n_frames: 3,
            ground_half_extent: 20.0,
            ..SceneSpec::default()
        };
        let mut sample = generate(&spec).unwrap();
        sample.truth = None;
        assert!(verify_sample(&sample));

        let mut vectors: Vec<Vector3<f64>> = sample.flows[0].iter().copied().collect();
        let fg_idx = sample.fg_masks[0].iter().position(|&fg| fg).unwrap();
        vectors[fg_idx].y += 1e-3;
        sample.flows[0] = FlowField::new(vectors);
        assert!(!verify_sample(&sample));
    }

    #[test]
    fn clustering_recovers_exactly_n_objects_per_frame() {
        use crate::preprocess::{cluster_fused, remove_ground};
        let spec = SceneSpec {
            seed: 17,
            n_objects: 5,
            n_frames: 2,
            ground_half_extent: 25.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        for scan in &sample.scans {
            let (ng, _) = remove_ground(scan, 0.3);
            let pair = cluster_fused(&ng, &PointCloud::new(Vec::new(), 0.0), 0.75, 5, 20);
            assert_eq!(pair.cluster_count, 5);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SceneSpec::default();
        spec.speed_range = (0.0, 50.0);
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));

        let mut spec = SceneSpec::default();
        spec.n_frames = 0;
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));

        // Too many objects for the area must fail placement, not hang.
        let spec = SceneSpec {
            n_objects: 200,
            ground_half_extent: 10.0,
            ..SceneSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn mirror_mode_transforms_the_same_points() {
        let spec = SceneSpec {
            seed: 19,
            n_objects: 1,
            n_frames: 2,
            resample: false,
            noise_sigma: 0.0,
            speed_range: (5.0, 5.0),
            yaw_rate_range: (0.0, 0.0),
            ground_half_extent: 20.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        let truth = sample.truth.as_ref().unwrap();
        // Every frame-0 point plus its flow must coincide with a frame-1
        // point exactly.
        let index = NeighborIndex::build(&sample.scans[1].points).unwrap();
        for (i, p) in sample.scans[0].iter().enumerate() {
            let moved = p + sample.flows[0].get(i);
            let (_, d) = index.nearest(&moved);
            assert!(d < 1e-9, "point {i}: nearest {d}");
        }
        assert_eq!(truth.object_ids[0], truth.object_ids[1]);
    }

    #[test]
    fn hard_mode_adds_duplicate_and_escape() {
        let spec = SceneSpec {
            seed: 23,
            n_objects: 2,
            n_frames: 4,
            hard_mode: true,
            speed_range: (3.0, 8.0),
            ground_half_extent: 25.0,
            ..SceneSpec::default()
        };
        let sample = generate(&spec).unwrap();
        let truth = sample.truth.as_ref().unwrap();
        assert_eq!(truth.motions.len(), 4); // 2 + duplicate + escaper
        // The escaper leaves: its id must vanish from a later frame.
        let escaper = 3;
        let present_last = truth.object_ids.last().unwrap().iter().any(|id| *id == Some(escaper));
        let present_first = truth.object_ids[0].iter().any(|id| *id == Some(escaper));
        assert!(present_first);
        assert!(!present_last);
        assert!(verify_sample(&sample));
    }
}
