//! Closed-form least-squares rigid alignment of corresponded point sets.

use nalgebra::{Matrix3, Point3, Vector3};

use super::RigidTransform;
use crate::error::{Error, Result};

/// Returns the proper rigid transform minimizing Σ‖T∘src_i − dst_i‖² over
/// the given correspondences, via SVD of the centered cross-covariance with
/// determinant correction so det(R) = +1 always (never a reflection).
///
/// Fails with `DegenerateInput` when fewer than 3 pairs are given or the
/// cross-covariance has rank < 2 (e.g. collinear points); callers fall back
/// to a translation-only fit (dst centroid − src centroid).
pub fn best_rigid_fit(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch {
            context: "best_rigid_fit correspondences",
            expected: src.len(),
            actual: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::DegenerateInput);
    }

    let n = src.len() as f64;
    let src_centroid: Vector3<f64> = src.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let dst_centroid: Vector3<f64> = dst.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;

    let mut covariance = Matrix3::<f64>::zeros();
    for (s, d) in src.iter().zip(dst.iter()) {
        covariance += (s.coords - src_centroid) * (d.coords - dst_centroid).transpose();
    }

    let svd = covariance.svd(true, true);
    let sv = &svd.singular_values;
    // Rank < 2 leaves the rotation about the dominant axis unconstrained.
    if sv[0] <= 0.0 || sv[1] <= sv[0] * 1e-9 {
        return Err(Error::DegenerateInput);
    }
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");

    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = dst_centroid - rotation * src_centroid;

    Ok(RigidTransform::from_parts(rotation, translation))
}

/// Residual-only fallback: translation aligning the centroids.
pub(crate) fn centroid_translation(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Vector3<f64> {
    if src.is_empty() || dst.is_empty() {
        return Vector3::zeros();
    }
    let sc: Vector3<f64> = src.iter().map(|p| p.coords).sum::<Vector3<f64>>() / src.len() as f64;
    let dc: Vector3<f64> = dst.iter().map(|p| p.coords).sum::<Vector3<f64>>() / dst.len() as f64;
    dc - sc
}
