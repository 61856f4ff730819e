//! Rigid-transform algebra, closed-form rigid alignment, and exact
//! nearest-neighbor search. Everything here is pure and immutable after
//! construction, so values can be shared freely across threads.

pub(crate) mod fit;
mod kdtree;

pub use fit::best_rigid_fit;
pub use kdtree::NeighborIndex;

use nalgebra::{Matrix3, Matrix4, Point3, Vector3};

use crate::error::{Error, Result};

/// Orthonormality residual above which a composed rotation is re-projected
/// onto SO(3). Keeps long composition chains (trackers) well-conditioned.
const RENORMALIZE_THRESHOLD: f64 = 1e-7;

/// An element of SE(3): proper rotation plus translation, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds from parts without validation. Intended for constructors that
    /// produce orthonormal rotations by construction (axis rotations, SVD
    /// output, compositions of valid transforms).
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Validates the SE(3) invariants: RᵀR = I within `tol` per entry and
    /// det(R) = +1 within `tol`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let t = Self {
            rotation,
            translation,
        };
        if !t.is_valid(1e-9) {
            return Err(Error::InvalidConfig(format!(
                "rotation is not a proper orthonormal matrix (residual {:.3e}, det {:.12})",
                t.orthonormality_residual(),
                rotation.determinant()
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite translation".into()));
        }
        Ok(t)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about the z axis by `angle` radians (counter-clockwise
    /// looking down the +z axis).
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `angle` radians about an arbitrary axis through the origin.
    pub fn rotation_axis(axis: Vector3<f64>, angle: f64) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(axis),
            angle,
        );
        Self {
            rotation: rot.into_inner(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Max absolute entry of RᵀR − I.
    pub fn orthonormality_residual(&self) -> f64 {
        let r = self.rotation.transpose() * self.rotation - Matrix3::identity();
        r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.rotation.iter().all(|v| v.is_finite())
            && self.orthonormality_residual() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// The transform equal to applying `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut out = Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        };
        if out.orthonormality_residual() > RENORMALIZE_THRESHOLD {
            out.rotation = renormalize_rotation(&out.rotation);
        }
        out
    }

    pub fn invert(&self) -> RigidTransform {
        let rot_t = self.rotation.transpose();
        Self {
            rotation: rot_t,
            translation: -(rot_t * self.translation),
        }
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Applies the transform to every point; length and order preserved.
    pub fn apply(&self, pc: &PointCloud) -> PointCloud {
        PointCloud {
            points: pc.points.iter().map(|p| self.apply_point(p)).collect(),
            timestamp: pc.timestamp,
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Parses a row-major 4×4 homogeneous matrix. The bottom row must be
    /// (0, 0, 0, 1) within 1e-9; the rotation block must be orthonormal
    /// within 1e-6 and is re-projected onto SO(3) afterwards.
    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)] - 1.0];
        if bottom.iter().any(|v| v.abs() > 1e-9) {
            return Err(Error::InvalidConfig(
                "homogeneous matrix bottom row is not (0, 0, 0, 1)".into(),
            ));
        }
        let rotation: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let translation: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into();
        let candidate = Self {
            rotation,
            translation,
        };
        if !candidate.is_valid(1e-6) {
            return Err(Error::InvalidConfig(
                "homogeneous matrix rotation block is not a proper rotation".into(),
            ));
        }
        Ok(Self {
            rotation: renormalize_rotation(&rotation),
            translation,
        })
    }
}

/// Projects a near-orthonormal matrix onto SO(3) via SVD.
fn renormalize_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fixed = u;
        u_fixed.column_mut(2).neg_mut();
        r = u_fixed * v_t;
    }
    r
}

/// A timestamped, ordered set of 3D points in meters. Index i always refers
/// to the same physical return.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, timestamp: f64) -> Self {
        Self { points, timestamp }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3<f64>> {
        self.points.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_transform_eq(a: &RigidTransform, b: &RigidTransform, tol: f64) {
        for (x, y) in a.rotation().iter().zip(b.rotation().iter()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
        for (x, y) in a.translation().iter().zip(b.translation().iter()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    fn random_transform(rng: &mut impl rand::Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0f64),
        );
        let axis = if axis.norm() < 1e-6 {
            Vector3::x()
        } else {
            axis
        };
        let angle = rng.random_range(-3.0..3.0);
        let t = Vector3::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        RigidTransform::rotation_axis(axis, angle).compose(&RigidTransform::from_translation(t))
    }

    #[test]
    fn compose_identity_is_neutral() {
        let t = RigidTransform::rotation_z(0.7)
            .compose(&RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0)));
        assert_transform_eq(&RigidTransform::identity().compose(&t), &t, 0.0);
        assert_transform_eq(&t.compose(&RigidTransform::identity()), &t, 0.0);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        use rand::SeedableRng;
        for _ in 0..100 {
            let t = random_transform(&mut rng);
            assert_transform_eq(&t.compose(&t.invert()), &RigidTransform::identity(), 1e-9);
            assert_transform_eq(&t.invert().compose(&t), &RigidTransform::identity(), 1e-9);
        }
    }

    #[test]
    fn rotation_angles_add_under_composition() {
        let a = RigidTransform::rotation_z(30f64.to_radians());
        let b = RigidTransform::rotation_z(60f64.to_radians());
        let expected = RigidTransform::rotation_z(90f64.to_radians());
        assert_transform_eq(&a.compose(&b), &expected, 1e-12);
    }

    #[test]
    fn invert_pure_translation() {
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let inv = t.invert();
        assert_transform_eq(
            &inv,
            &RigidTransform::from_translation(Vector3::new(-1.0, -2.0, -3.0)),
            0.0,
        );
        assert_transform_eq(
            &RigidTransform::identity().invert(),
            &RigidTransform::identity(),
            0.0,
        );
    }

    #[test]
    fn double_inverse_is_identity_map() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t = random_transform(&mut rng);
            assert_transform_eq(&t.invert().invert(), &t, 1e-9);
        }
    }

    #[test]
    fn apply_identity_and_translation() {
        let pc = PointCloud::new(vec![Point3::origin(), Point3::new(1.0, 2.0, 3.0)], 0.0);
        assert_eq!(RigidTransform::identity().apply(&pc), pc);

        let t = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let moved = t.apply(&PointCloud::new(vec![Point3::origin()], 0.0));
        assert_eq!(moved.points, vec![Point3::new(0.0, 0.0, 1.0)]);
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut acc = RigidTransform::identity();
        for _ in 0..10_000 {
            acc = acc.compose(&random_transform(&mut rng));
        }
        assert!(acc.orthonormality_residual() < 1e-9);
        assert_abs_diff_eq!(acc.rotation().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn homogeneous_round_trip_and_validation() {
        let t = RigidTransform::rotation_z(0.4)
            .compose(&RigidTransform::from_translation(Vector3::new(4.0, -2.0, 0.5)));
        let m = t.to_homogeneous();
        let back = RigidTransform::from_homogeneous(&m).unwrap();
        assert_transform_eq(&t, &back, 1e-12);

        let mut bad = m;
        bad[(3, 0)] = 1e-6;
        assert!(RigidTransform::from_homogeneous(&bad).is_err());
    }

    proptest! {
        #[test]
        fn apply_round_trip(seed in 0u64..1000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = random_transform(&mut rng);
            let pc = PointCloud::new(
                (0..20)
                    .map(|_| Point3::new(
                        rng.random_range(-50.0..50.0),
                        rng.random_range(-50.0..50.0),
                        rng.random_range(-50.0..50.0),
                    ))
                    .collect(),
                0.0,
            );
            let back = t.apply(&t.invert().apply(&pc));
            for (a, b) in back.iter().zip(pc.iter()) {
                prop_assert!((a - b).norm() < 1e-9);
            }
        }

        #[test]
        fn compose_is_associative(seed in 0u64..1000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (
                random_transform(&mut rng),
                random_transform(&mut rng),
                random_transform(&mut rng),
            );
            let lhs = a.compose(&b).compose(&c);
            let rhs = a.compose(&b.compose(&c));
            for (x, y) in lhs.rotation().iter().zip(rhs.rotation().iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in lhs.translation().iter().zip(rhs.translation().iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn apply_preserves_pairwise_distances(seed in 0u64..1000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = random_transform(&mut rng);
            let p = Point3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            let q = Point3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            let before = (p - q).norm();
            let after = (t.apply_point(&p) - t.apply_point(&q)).norm();
            prop_assert!((before - after).abs() < 1e-9);
        }
    }
}
