//! Vectors, rotations, rigid transforms, grasps, point clouds and the pinhole
//! camera model. The camera frame is the world frame for all scene data.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, DepthImage};
use crate::scalar::Real;

/// Tolerance for `RᵀR = I` and `det R = 1` on ingest.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(
    from = "[T; 3]",
    into = "[T; 3]",
    bound(serialize = "T: Copy + Serialize", deserialize = "T: Copy + Deserialize<'de>")
)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Copy> From<[T; 3]> for Vec3<T> {
    fn from(a: [T; 3]) -> Self {
        Vec3 { x: a[0], y: a[1], z: a[2] }
    }
}

impl<T> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> T {
        (*self - *o).norm()
    }

    /// Unit vector in the same direction, or `None` for a zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > T::zero() && n.is_finite()).then(|| *self * (T::one() / n))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()), U::lit(self.z.as_f64()))
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthogonal(&self) -> Self {
        let a = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Self::unit_x()
        } else if self.y.abs() <= self.z.abs() {
            Self::unit_y()
        } else {
            Self::unit_z()
        };
        self.cross(&a).normalized().expect("non-zero input vector")
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// 3×3 rotation matrix, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rot3<T> {
    pub rows: [[T; 3]; 3],
}

impl<T: Real> Rot3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Rot3 {
            rows: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    /// Wraps a matrix without checking it.
    pub const fn from_rows_unchecked(rows: [[T; 3]; 3]) -> Self {
        Rot3 { rows }
    }

    /// Wraps a matrix, rejecting it unless it is a proper rotation within
    /// [`ORTHONORMAL_TOL`].
    pub fn from_rows(rows: [[T; 3]; 3]) -> Result<Self> {
        let r = Rot3 { rows };
        r.validate()?;
        Ok(r)
    }

    /// Matrix whose columns are the given axes.
    pub fn from_columns(x: Vec3<T>, y: Vec3<T>, z: Vec3<T>) -> Self {
        Rot3 {
            rows: [[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]],
        }
    }

    /// Rodrigues rotation about a (not necessarily unit) axis.
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let Some(k) = axis.normalized() else {
            return Self::identity();
        };
        let (s, c) = angle.sin_cos();
        let t = T::one() - c;
        Rot3 {
            rows: [
                [c + k.x * k.x * t, k.x * k.y * t - k.z * s, k.x * k.z * t + k.y * s],
                [k.y * k.x * t + k.z * s, c + k.y * k.y * t, k.y * k.z * t - k.x * s],
                [k.z * k.x * t - k.y * s, k.z * k.y * t + k.x * s, c + k.z * k.z * t],
            ],
        }
    }

    #[inline]
    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.rows[0][j], self.rows[1][j], self.rows[2][j])
    }

    /// Third column, `R·(0,0,1)`.
    #[inline]
    pub fn z_axis(&self) -> Vec3<T> {
        self.column(2)
    }

    #[inline]
    pub fn apply(&self, v: &Vec3<T>) -> Vec3<T> {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn compose(&self, o: &Self) -> Self {
        let mut rows = [[T::zero(); 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Rot3 { rows }
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Rot3 {
            rows: [
                [r[0][0], r[1][0], r[2][0]],
                [r[0][1], r[1][1], r[2][1]],
                [r[0][2], r[1][2], r[2][2]],
            ],
        }
    }

    pub fn det(&self) -> T {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Largest entry-wise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> T {
        let p = self.transpose().compose(self);
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((p.rows[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.rows.iter().flatten().all(|v| v.is_finite());
        let dev = self.orthonormality_error();
        let det = self.det();
        let tol = T::lit(ORTHONORMAL_TOL);
        if !finite || dev > tol || (det - T::one()).abs() > tol {
            return Err(Error::NonOrthonormal {
                deviation: dev.as_f64(),
                det: det.as_f64(),
            });
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Rot3<U> {
        Rot3 {
            rows: self.rows.map(|r| r.map(|v| U::lit(v.as_f64()))),
        }
    }
}

/// Proper rigid motion `p ↦ R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform<T> {
    rotation: Rot3<T>,
    translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn new(rotation: Rot3<T>, translation: Vec3<T>) -> Result<Self> {
        rotation.validate()?;
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Rot3::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn translation(t: Vec3<T>) -> Self {
        Self {
            rotation: Rot3::identity(),
            translation: t,
        }
    }

    pub fn rotation_part(&self) -> &Rot3<T> {
        &self.rotation
    }

    pub fn translation_part(&self) -> &Vec3<T> {
        &self.translation
    }

    #[inline]
    pub fn apply_point(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.apply(p) + self.translation
    }

    #[inline]
    pub fn apply_direction(&self, d: &Vec3<T>) -> Vec3<T> {
        self.rotation.apply(d)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -rt.apply(&self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.apply_point(&other.translation),
        }
    }
}

/// Types that can be moved by a rigid transform.
pub trait RigidMotion<T: Real> {
    fn transformed(&self, tf: &RigidTransform<T>) -> Self;
}

impl<T: Real> RigidMotion<T> for Vec3<T> {
    fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        tf.apply_point(self)
    }
}

impl<T: Real, M: RigidMotion<T>> RigidMotion<T> for Vec<M> {
    fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        self.iter().map(|m| m.transformed(tf)).collect()
    }
}

/// Validates `(rotation, translation)` and applies it to `target`.
pub fn apply_rigid<T: Real, M: RigidMotion<T>>(rotation: Rot3<T>, translation: Vec3<T>, target: &M) -> Result<M> {
    let tf = RigidTransform::new(rotation, translation)?;
    Ok(target.transformed(&tf))
}

/// One 6-DoF grasp hypothesis in the camera frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Copy + Deserialize<'de>"))]
pub struct GraspCandidate<T> {
    pub id: usize,
    pub rotation: Rot3<T>,
    /// Grasp point in meters.
    pub translation: Vec3<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<T>,
}

impl<T: Real> GraspCandidate<T> {
    pub fn new(id: usize, rotation: Rot3<T>, translation: Vec3<T>) -> Self {
        Self {
            id,
            rotation,
            translation,
            confidence: None,
        }
    }

    /// Gripper approach direction, the rotated z-axis.
    #[inline]
    pub fn approach(&self) -> Vec3<T> {
        self.rotation.z_axis()
    }
}

impl<T: Real> RigidMotion<T> for GraspCandidate<T> {
    fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self {
            id: self.id,
            rotation: tf.rotation.compose(&self.rotation),
            translation: tf.apply_point(&self.translation),
            confidence: self.confidence,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<Vec3<T>>,
    /// Source pixel `(u, v)` of each point, when known.
    pub pixels: Option<Vec<(u32, u32)>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Self {
        Self { points, pixels: None }
    }

    pub fn with_pixels(points: Vec<Vec3<T>>, pixels: Vec<(u32, u32)>) -> Result<Self> {
        if points.len() != pixels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} pixel coordinates",
                points.len(),
                pixels.len()
            )));
        }
        Ok(Self {
            points,
            pixels: Some(pixels),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl<T: Real> RigidMotion<T> for PointCloud<T> {
    fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self {
            points: self.points.transformed(tf),
            pixels: self.pixels.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > T::zero() && self.fx.is_finite()) {
            return Err(Error::field("intrinsics.fx", "must be positive"));
        }
        if !(self.fy > T::zero() && self.fy.is_finite()) {
            return Err(Error::field("intrinsics.fy", "must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::field("intrinsics.width/height", "must be at least 1"));
        }
        if !(self.cx >= T::zero() && self.cx < T::from_usize_lossy(self.width)) {
            return Err(Error::field("intrinsics.cx", "must lie in [0, width)"));
        }
        if !(self.cy >= T::zero() && self.cy < T::from_usize_lossy(self.height)) {
            return Err(Error::field("intrinsics.cy", "must lie in [0, height)"));
        }
        Ok(())
    }

    /// Continuous image coordinates of a point in front of the camera.
    pub fn project(&self, p: &Vec3<T>) -> Option<(T, T)> {
        (p.z > T::zero()).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Integer pixel hit by `p`, if inside the image.
    pub fn project_pixel(&self, p: &Vec3<T>) -> Option<(u32, u32)> {
        let (u, v) = self.project(p)?;
        let (u, v) = (u.round(), v.round());
        let inside = u >= T::zero() && v >= T::zero() && u < T::from_usize_lossy(self.width) && v < T::from_usize_lossy(self.height);
        inside.then(|| (u.to_u32().unwrap_or(0), v.to_u32().unwrap_or(0)))
    }

    #[inline]
    pub fn backproject(&self, u: T, v: T, z: T) -> Vec3<T> {
        Vec3::new(z * (u - self.cx) / self.fx, z * (v - self.cy) / self.fy, z)
    }
}

/// Back-projects every pixel with positive depth. Zero depth is missing data.
pub fn depth_to_pointcloud<T: Real>(depth: &DepthImage, k: &CameraIntrinsics<T>, scale: T) -> Result<PointCloud<T>> {
    if depth.width != k.width || depth.height != k.height {
        return Err(Error::DimensionMismatch(format!(
            "depth is {}x{} but intrinsics expect {}x{}",
            depth.width, depth.height, k.width, k.height
        )));
    }
    if !(scale > T::zero() && scale.is_finite()) {
        return Err(Error::param("depth_scale", "must be positive"));
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if d == 0 {
                continue;
            }
            let z = T::from_u16(d).unwrap_or_else(T::zero) * scale;
            points.push(k.backproject(T::from_usize_lossy(u), T::from_usize_lossy(v), z));
            pixels.push((u as u32, v as u32));
        }
    }
    Ok(PointCloud {
        points,
        pixels: Some(pixels),
    })
}

/// Keeps the points whose source pixel is set in `mask`, in order.
pub fn filter_cloud_by_mask<T: Real>(cloud: &PointCloud<T>, mask: &BinaryMask) -> Result<PointCloud<T>> {
    let pixels = cloud.pixels.as_ref().ok_or(Error::MissingPixels)?;
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (p, &(u, v)) in cloud.points.iter().zip(pixels) {
        let (u_, v_) = (u as usize, v as usize);
        if u_ >= mask.width || v_ >= mask.height {
            return Err(Error::DimensionMismatch(format!(
                "pixel ({u}, {v}) outside {}x{} mask",
                mask.width, mask.height
            )));
        }
        if mask.get(u_, v_) {
            points.push(*p);
            kept.push((u, v));
        }
    }
    Ok(PointCloud {
        points,
        pixels: Some(kept),
    })
}

/// Fraction of `points` strictly on the positive side of the plane through
/// `origin` with normal `normal`. Points on the plane do not count.
pub fn plane_side_fraction<T: Real>(points: &[Vec3<T>], origin: &Vec3<T>, normal: &Vec3<T>) -> Result<T> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    let n = normal.normalized().ok_or(Error::ZeroNormal)?;
    let above = points.iter().filter(|q| (**q - *origin).dot(&n) > T::zero()).count();
    Ok(T::from_usize_lossy(above) / T::from_usize_lossy(points.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rot3<f64> {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Rot3::from_axis_angle(axis, rng.random_range(-3.1..3.1))
    }

    fn intrinsics_4x4() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 2.0, 2.0, 4, 4).unwrap()
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let mut depth = DepthImage::new(4, 4);
        depth.set(2, 2, 1000);
        let cloud = depth_to_pointcloud(&depth, &intrinsics_4x4(), 0.001).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0], Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(cloud.pixels.as_ref().unwrap()[0], (2, 2));
    }

    #[test]
    fn zero_depth_gives_empty_cloud() {
        let cloud = depth_to_pointcloud(&DepthImage::new(4, 4), &intrinsics_4x4(), 0.001).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn depth_ramp_matches_per_pixel_arithmetic() {
        let mut depth = DepthImage::new(4, 4);
        for v in 0..4 {
            for u in 0..4 {
                depth.set(u, v, (500 + 100 * (v * 4 + u)) as u16);
            }
        }
        let cloud = depth_to_pointcloud(&depth, &intrinsics_4x4(), 0.001).unwrap();
        assert_eq!(cloud.len(), 16);
        let mut i = 0;
        for v in 0..4 {
            for u in 0..4 {
                let z = (500.0 + 100.0 * (v * 4 + u) as f64) * 0.001;
                let expect = [z * (u as f64 - 2.0) / 100.0, z * (v as f64 - 2.0) / 100.0, z];
                let got = cloud.points[i];
                assert!((got.x - expect[0]).abs() < 1e-15);
                assert!((got.y - expect[1]).abs() < 1e-15);
                assert!((got.z - expect[2]).abs() < 1e-15);
                i += 1;
            }
        }
    }

    #[test]
    fn depth_errors() {
        let k = intrinsics_4x4();
        assert!(matches!(
            depth_to_pointcloud(&DepthImage::new(3, 4), &k, 0.001),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(depth_to_pointcloud(&DepthImage::new(4, 4), &k, 0.0).is_err());
        assert!(depth_to_pointcloud(&DepthImage::new(4, 4), &k, -1.0).is_err());
    }

    fn full_cloud() -> PointCloud<f64> {
        let mut depth = DepthImage::new(4, 4);
        depth.data.iter_mut().for_each(|d| *d = 700);
        depth_to_pointcloud(&depth, &intrinsics_4x4(), 0.001).unwrap()
    }

    #[test]
    fn mask_filter_trivial_cases() {
        let cloud = full_cloud();
        assert_eq!(filter_cloud_by_mask(&cloud, &BinaryMask::new(4, 4, true)).unwrap(), cloud);
        assert!(filter_cloud_by_mask(&cloud, &BinaryMask::new(4, 4, false)).unwrap().is_empty());
        assert!(matches!(
            filter_cloud_by_mask(&PointCloud::new(cloud.points.clone()), &BinaryMask::new(4, 4, true)),
            Err(Error::MissingPixels)
        ));
    }

    #[test]
    fn checkerboard_mask_keeps_true_cells() {
        let cloud = full_cloud();
        let mut mask = BinaryMask::new(4, 4, false);
        for v in 0..4 {
            for u in 0..4 {
                mask.set(u, v, (u + v) % 2 == 0);
            }
        }
        let out = filter_cloud_by_mask(&cloud, &mask).unwrap();
        let expected: Vec<_> = cloud
            .points
            .iter()
            .zip(cloud.pixels.as_ref().unwrap())
            .filter(|(_, (u, v))| (u + v) % 2 == 0)
            .map(|(p, _)| *p)
            .collect();
        assert_eq!(out.len(), 8);
        assert_eq!(out.points, expected);
    }

    #[test]
    fn plane_side_trivial() {
        let pts = vec![Vec3::new(0.0, 0.0, 1.0); 5];
        let o = Vec3::zero();
        assert_eq!(plane_side_fraction(&pts, &o, &Vec3::new(0.0, 0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(plane_side_fraction(&pts, &o, &Vec3::new(0.0, 0.0, -1.0)).unwrap(), 0.0);
        assert!(matches!(plane_side_fraction::<f64>(&[], &o, &Vec3::unit_z()), Err(Error::Empty(_))));
        assert!(matches!(plane_side_fraction(&pts, &o, &Vec3::zero()), Err(Error::ZeroNormal)));
    }

    #[test]
    fn points_on_plane_are_not_positive() {
        let pts = vec![Vec3::new(1.0, 2.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        assert_eq!(plane_side_fraction(&pts, &Vec3::zero(), &Vec3::unit_z()).unwrap(), 0.5);
        assert_eq!(plane_side_fraction(&pts, &Vec3::zero(), &-Vec3::unit_z()).unwrap(), 0.0);
    }

    #[test]
    fn plane_side_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3<f64>> = (0..100)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let o = Vec3::new(0.1, -0.2, 0.05);
        let n = Vec3::new(0.3, 0.4, -0.5);
        let len = (0.09f64 + 0.16 + 0.25).sqrt();
        let mut count = 0;
        for q in &pts {
            let s = (q.x - o.x) * 0.3 / len + (q.y - o.y) * 0.4 / len + (q.z - o.z) * -0.5 / len;
            if s > 0.0 {
                count += 1;
            }
        }
        let got = plane_side_fraction(&pts, &o, &n).unwrap();
        assert!((got - count as f64 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn rigid_identity_and_translation() {
        let g = GraspCandidate::new(3, Rot3::identity(), Vec3::zero());
        assert_eq!(apply_rigid(Rot3::identity(), Vec3::zero(), &g).unwrap(), g);
        let moved = apply_rigid(Rot3::identity(), Vec3::new(0.0, 0.0, 1.0), &g).unwrap();
        assert_eq!(moved.translation, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(moved.rotation, g.rotation);
    }

    #[test]
    fn rigid_rejects_non_rotation() {
        let bad = Rot3::from_rows_unchecked([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert!(matches!(
            apply_rigid(bad, Vec3::zero(), &Vec3::unit_x()),
            Err(Error::NonOrthonormal { .. })
        ));
        let skew = Rot3::from_rows_unchecked([[1.0, 0.01, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(skew.validate().is_err());
    }

    #[test]
    fn transform_composed_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let tf = RigidTransform::new(
                random_rotation(&mut rng),
                Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ),
            )
            .unwrap();
            let id = tf.compose(&tf.inverse());
            let r = id.rotation_part();
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((r.rows[i][j] - e).abs() < 1e-9);
                }
            }
            assert!(id.translation_part().norm() < 1e-9);
        }
    }

    #[test]
    fn rigid_preserves_distances_and_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tf = RigidTransform::new(random_rotation(&mut rng), Vec3::new(0.3, -1.0, 2.0)).unwrap();
        let a = GraspCandidate::new(0, random_rotation(&mut rng), Vec3::new(0.1, 0.2, 0.3));
        let b = GraspCandidate::new(1, random_rotation(&mut rng), Vec3::new(-0.4, 0.0, 0.9));
        let (ta, tb) = (a.transformed(&tf), b.transformed(&tf));
        assert!((a.translation.distance(&b.translation) - ta.translation.distance(&tb.translation)).abs() < 1e-9);
        assert!((a.approach().dot(&b.approach()) - ta.approach().dot(&tb.approach())).abs() < 1e-9);
    }

    #[test]
    fn works_in_single_precision() {
        let pts = vec![Vec3::<f32>::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)];
        let f = plane_side_fraction(&pts, &Vec3::zero(), &Vec3::unit_z()).unwrap();
        assert_eq!(f, 0.5f32);
        let r = Rot3::<f32>::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.7);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
    }
}
