//! Similarity alignment between point sets.
//!
//! Rotations are estimated with the closed-form quaternion method: the
//! optimal rotation is the unit eigenvector of the largest eigenvalue of a
//! symmetric 4×4 matrix built from the cross-covariance. The eigenproblem is
//! solved with cyclic Jacobi sweeps, which always yields a proper rotation
//! (det = +1) even when the unconstrained optimum is a reflection.

use nalgebra::{Matrix3, Matrix4, SMatrix, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::model::{axis_angle_to_matrix, INDEX_MCP, WRIST};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 50;

/// `p' = scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param(format!("scale must be positive, got {scale}")));
        }
        check_rotation(&rotation, 1e-6)?;
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    pub fn apply(&self, pts: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        pts.iter().map(|p| self.apply_point(p)).collect()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation * self.scale + self.translation,
            scale: self.scale * inner.scale,
        }
    }

    /// 4×4 homogeneous matrix. The top-left block is `scale · rotation`
    /// (the rotation itself when the scale is 1), the top-right column is
    /// the translation and the bottom row is `(0, 0, 0, 1)`.
    pub fn as_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.rotation * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Applies `t` to every point.
pub fn apply(t: &RigidTransform, pts: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    t.apply(pts)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    let det = r.determinant();
    if !(ortho <= tol) || !((det - 1.0).abs() <= tol) {
        return Err(Error::param(format!(
            "not a rotation matrix (orthonormality error {ortho:e}, det {det})"
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and eigenvectors (as columns), unsorted.
pub(crate) fn jacobi_eigen<const N: usize>(
    a: &SMatrix<f64, N, N>,
) -> (SMatrix<f64, N, 1>, SMatrix<f64, N, N>) {
    let mut a = *a;
    let mut v = SMatrix::<f64, N, N>::identity();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..N {
            for q in (p + 1)..N {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

fn centroid(pts: &[Vector3<f64>]) -> Vector3<f64> {
    pts.iter().sum::<Vector3<f64>>() / pts.len() as f64
}

fn check_pair(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<()> {
    if src.len() != dst.len() {
        return Err(Error::param(format!(
            "point count mismatch: {} source vs {} target",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::param(format!(
            "need at least 3 correspondences, got {}",
            src.len()
        )));
    }
    if src
        .iter()
        .chain(dst)
        .any(|p| !p.iter().all(|v| v.is_finite()))
    {
        return Err(Error::Numeric("non-finite input point".into()));
    }
    Ok(())
}

fn check_not_collinear(pts: &[Vector3<f64>], c: &Vector3<f64>, which: &str) -> Result<()> {
    let scatter: Matrix3<f64> = pts.iter().map(|p| (p - c) * (p - c).transpose()).sum();
    let (vals, _) = jacobi_eigen(&scatter);
    let mut sorted = [vals[0], vals[1], vals[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= 1e-12 * sorted[0] {
        return Err(Error::Degenerate(format!(
            "{which} points are coincident or collinear"
        )));
    }
    Ok(())
}

/// Rotation maximising `Σ (R a_i)·b_i` over centred point pairs.
fn optimal_rotation(src_c: &[Vector3<f64>], dst_c: &[Vector3<f64>]) -> Matrix3<f64> {
    let s: Matrix3<f64> = src_c
        .iter()
        .zip(dst_c)
        .map(|(a, b)| a * b.transpose())
        .sum();
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    let n = Matrix4::new(
        sxx + syy + szz,
        syz - szy,
        szx - sxz,
        sxy - syx,
        syz - szy,
        sxx - syy - szz,
        sxy + syx,
        szx + sxz,
        szx - sxz,
        sxy + syx,
        -sxx + syy - szz,
        syz + szy,
        sxy - syx,
        szx + sxz,
        syz + szy,
        -sxx - syy + szz,
    );
    let (vals, vecs) = jacobi_eigen(&n);
    let best = vals.imax();
    let q: Vector4<f64> = vecs.column(best).normalize();
    quaternion_to_matrix(q[0], q[1], q[2], q[3])
}

fn quaternion_to_matrix(w: f64, x: f64, y: f64, z: f64) -> Matrix3<f64> {
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// Least-squares rotation and translation (scale 1) mapping `src` onto `dst`.
pub fn estimate_rigid(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<RigidTransform> {
    check_pair(src, dst)?;
    let cs = centroid(src);
    let cd = centroid(dst);
    check_not_collinear(src, &cs, "source")?;
    check_not_collinear(dst, &cd, "target")?;
    let src_c: Vec<_> = src.iter().map(|p| p - cs).collect();
    let dst_c: Vec<_> = dst.iter().map(|p| p - cd).collect();
    let rotation = optimal_rotation(&src_c, &dst_c);
    Ok(RigidTransform {
        rotation,
        translation: cd - rotation * cs,
        scale: 1.0,
    })
}

/// Least-squares similarity (rotation, translation and uniform scale).
pub fn estimate_similarity(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<RigidTransform> {
    let rigid = estimate_rigid(src, dst)?;
    let cs = centroid(src);
    let cd = centroid(dst);
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let ra = rigid.rotation * (a - cs);
        num += ra.dot(&(b - cd));
        den += (a - cs).norm_squared();
    }
    let scale = num / den;
    if !(scale > 0.0) {
        return Err(Error::Degenerate(format!(
            "least-squares scale is not positive ({scale})"
        )));
    }
    Ok(RigidTransform {
        rotation: rigid.rotation,
        translation: cd - rigid.rotation * cs * scale,
        scale,
    })
}

/// Ratio of the wrist → index-MCP distance in `dst` to that in `src`.
///
/// Both slices are full 21-keypoint sets.
pub fn estimate_scale(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<f64> {
    if src.len() <= INDEX_MCP || dst.len() <= INDEX_MCP {
        return Err(Error::param(
            "keypoint sets must contain the wrist and index MCP",
        ));
    }
    let ds = (src[INDEX_MCP] - src[WRIST]).norm();
    let dd = (dst[INDEX_MCP] - dst[WRIST]).norm();
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(Error::Degenerate(
            "source wrist-to-MCP distance is zero".into(),
        ));
    }
    if !(dd > 0.0) || !dd.is_finite() {
        return Err(Error::Degenerate(
            "target wrist-to-MCP distance is zero".into(),
        ));
    }
    Ok(dd / ds)
}

/// Axis-angle vector of a rotation matrix, with angle in `[0, π]`.
pub fn matrix_to_axis_angle(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    check_rotation(r, 1e-6)?;
    // 2 sin(angle) · axis
    let vee = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = (0.5 * vee.norm()).atan2(cos);
    if angle < 1e-6 {
        // sin(t)/t ≈ 1 - t²/6
        return Ok(vee * 0.5 * (1.0 + angle * angle / 6.0));
    }
    if angle < std::f64::consts::PI - 1e-4 {
        return Ok(vee * (angle / (2.0 * angle.sin())));
    }
    // Near a half turn: (R + Rᵀ)/2 − cos·I = (1 − cos) a aᵀ.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos;
    let k = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = b.column(k).into();
    axis /= axis.norm();
    if axis.dot(&vee) < 0.0 {
        axis = -axis;
    }
    // Refine the axis for angles slightly below π with the antisymmetric part.
    let refined = axis_angle_to_matrix(&(axis * angle));
    if (refined - r).amax() > (axis_angle_to_matrix(&(-axis * angle)) - r).amax() {
        axis = -axis;
    }
    Ok(axis * angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(-1.0..1.0)
    }

    fn random_vec(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::from_fn(|_, _| uniform(rng))
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        axis_angle_to_matrix(&(random_vec(rng) * 1.8))
    }

    fn square() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.1),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.3, 0.4, 1.0),
        ]
    }

    #[test]
    fn identity_for_equal_sets() {
        let pts = square();
        let t = estimate_rigid(&pts, &pts).unwrap();
        assert!((t.rotation - Matrix3::identity()).amax() < 1e-14);
        assert!(t.translation.norm() < 1e-14);
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn recovers_known_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q = random_rotation(&mut rng);
            let u = random_vec(&mut rng) * 10.0;
            let src: Vec<_> = (0..6).map(|_| random_vec(&mut rng)).collect();
            let dst: Vec<_> = src.iter().map(|p| q * p + u).collect();
            let t = estimate_rigid(&src, &dst).unwrap();
            assert!((t.rotation - q).norm() < 1e-9);
            assert!((t.translation - u).norm() < 1e-9);
        }
    }

    #[test]
    fn mirrored_target_gives_best_proper_rotation() {
        let src = square();
        let dst: Vec<_> = src.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let t = estimate_rigid(&src, &dst).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-12);

        let cost = |r: &Matrix3<f64>| -> f64 {
            let cs = centroid(&src);
            let cd = centroid(&dst);
            src.iter()
                .zip(&dst)
                .map(|(a, b)| (r * (a - cs) - (b - cd)).norm_squared())
                .sum()
        };
        let ours = cost(&t.rotation);
        // Brute force over a grid of axis-angle vectors inside the π-ball.
        let steps = 24;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let v = Vector3::new(
                        -PI + 2.0 * PI * i as f64 / steps as f64,
                        -PI + 2.0 * PI * j as f64 / steps as f64,
                        -PI + 2.0 * PI * k as f64 / steps as f64,
                    );
                    if v.norm() <= PI {
                        best = best.min(cost(&axis_angle_to_matrix(&v)));
                    }
                }
            }
        }
        assert!(ours <= best + 1e-12, "ours {ours} grid best {best}");
    }

    #[test]
    fn collinear_source_is_degenerate() {
        let src: Vec<_> = (0..5)
            .map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0))
            .collect();
        assert!(matches!(
            estimate_rigid(&src, &src),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn count_mismatch_is_parameter_error() {
        let a = square();
        assert!(matches!(
            estimate_rigid(&a, &a[..3]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn scale_ratios() {
        let a: Vec<_> = (0..21)
            .map(|i| Vector3::new(i as f64 * 0.01, 0.02, 0.0))
            .collect();
        assert_eq!(estimate_scale(&a, &a).unwrap(), 1.0);
        let b: Vec<_> = a.iter().map(|p| p * 2.0).collect();
        assert!((estimate_scale(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        let mm: Vec<_> = a.iter().map(|p| p * 1000.0).collect();
        assert!((estimate_scale(&a, &mm).unwrap() - 1000.0).abs() < 1e-9);
        let flat = vec![Vector3::zeros(); 21];
        assert!(matches!(
            estimate_scale(&flat, &a),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn apply_and_invert() {
        let pts = square();
        assert_eq!(RigidTransform::identity().apply(&pts), pts);
        let t = RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 2.0,
        };
        assert_eq!(t.inverse().scale, 0.5);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = RigidTransform::new(
                random_rotation(&mut rng),
                random_vec(&mut rng) * 100.0,
                0.5 + uniform(&mut rng).abs() * 3.0,
            )
            .unwrap();
            let p = random_vec(&mut rng);
            let back = t.inverse().apply_point(&t.apply_point(&p));
            assert!((back - p).norm() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t1 = RigidTransform::new(random_rotation(&mut rng), random_vec(&mut rng), 1.7).unwrap();
        let t2 = RigidTransform::new(random_rotation(&mut rng), random_vec(&mut rng), 0.3).unwrap();
        let lhs = t2.as_homogeneous() * t1.as_homogeneous();
        assert!((lhs - t2.compose(&t1).as_homogeneous()).amax() < 1e-14);
        let h = RigidTransform::identity().as_homogeneous();
        assert_eq!(h, Matrix4::identity());
    }

    #[test]
    fn axis_angle_special_cases() {
        assert_eq!(
            matrix_to_axis_angle(&Matrix3::identity()).unwrap(),
            Vector3::zeros()
        );
        let rz = axis_angle_to_matrix(&Vector3::new(0.0, 0.0, PI));
        let v = matrix_to_axis_angle(&rz).unwrap();
        assert!((v - Vector3::new(0.0, 0.0, PI)).norm() < 1e-12);
        let bad = Matrix3::identity() * 2.0;
        assert!(matches!(
            matrix_to_axis_angle(&bad),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn axis_angle_round_trips_including_half_turns() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for i in 0..200 {
            let axis = random_vec(&mut rng).normalize();
            let angle = match i % 4 {
                0 => PI,
                1 => PI - 1e-7,
                2 => 1e-9,
                _ => uniform(&mut rng).abs() * PI,
            };
            let r = axis_angle_to_matrix(&(axis * angle));
            let v = matrix_to_axis_angle(&r).unwrap();
            assert!(v.norm() <= PI + 1e-12);
            assert!(
                (axis_angle_to_matrix(&v) - r).amax() < 1e-9,
                "angle {angle}"
            );
        }
    }
}
