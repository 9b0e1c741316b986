//! Rigid transforms, the Euler-angle extrinsic parametrization and camera
//! projection models.
//!
//! Extrinsics map LiDAR-frame points into the camera frame: `p_C = R p_L + t`
//! with `R = Rx(θx) · Ry(θy) · Rz(θz)`. Angles are degrees at every public
//! boundary and radians internally.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Smallest accepted depth (pinhole) or projection denominator (double sphere).
pub const NEAR_PLANE_EPS: f64 = 1e-6;

/// The six calibration parameters: Euler angles in degrees, translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtrinsicParams {
    pub theta_x: f64,
    pub theta_y: f64,
    pub theta_z: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub t_z: f64,
}

impl ExtrinsicParams {
    pub const NAMES: [&'static str; 6] = ["theta_x", "theta_y", "theta_z", "t_x", "t_y", "t_z"];

    pub fn new(angles_deg: [f64; 3], translation: [f64; 3]) -> Self {
        Self::from_array([
            angles_deg[0],
            angles_deg[1],
            angles_deg[2],
            translation[0],
            translation[1],
            translation[2],
        ])
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            theta_x: v[0],
            theta_y: v[1],
            theta_z: v[2],
            t_x: v[3],
            t_y: v[4],
            t_z: v[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.theta_x,
            self.theta_y,
            self.theta_z,
            self.t_x,
            self.t_y,
            self.t_z,
        ]
    }

    pub fn angles_deg(&self) -> Vec3 {
        Vec3::new(self.theta_x, self.theta_y, self.theta_z)
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.t_x, self.t_y, self.t_z)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Componentwise sum.
    pub fn add(&self, other: &ExtrinsicParams) -> ExtrinsicParams {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }

    /// Componentwise difference `self - other`.
    pub fn sub(&self, other: &ExtrinsicParams) -> ExtrinsicParams {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }

    /// Parameter index by name, accepting the short aliases `rx, ry, rz, tx, ty, tz`.
    pub fn index_of(name: &str) -> Option<usize> {
        let short = ["rx", "ry", "rz", "tx", "ty", "tz"];
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .or_else(|| short.iter().position(|n| *n == name))
    }
}

/// Rotation plus translation, acting as `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

pub fn rot_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn params_to_transform(params: &ExtrinsicParams) -> RigidTransform {
    RigidTransform {
        rotation: rot_x(params.theta_x) * rot_y(params.theta_y) * rot_z(params.theta_z),
        translation: params.translation(),
    }
}

pub fn transform_point(t: &RigidTransform, p: &Vec3) -> Vec3 {
    t.apply(p)
}

/// Geodesic angle between two rotations in degrees, in `[0, 180]`.
pub fn rotation_error_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a.transpose() * b;
    let sin = Vec3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    )
    .norm()
        / 2.0;
    let cos = (r.trace() - 1.0) / 2.0;
    sin.atan2(cos).to_degrees()
}

/// `n` points of the Fibonacci lattice on the unit sphere, `z_i = 1 - (2i+1)/n`.
pub fn fibonacci_sphere(n: usize) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(Error::invalid("fibonacci_sphere needs at least one point"));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pinhole,
    DoubleSphere { xi: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub projection: Projection,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        Self {
            projection: Projection::Pinhole,
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        }
        .validated()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn double_sphere(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        xi: f64,
        alpha: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        Self {
            projection: Projection::DoubleSphere { xi, alpha },
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::invalid(format!(
                "focal lengths must be finite and positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if let Projection::DoubleSphere { xi, alpha } = self.projection {
            if !xi.is_finite() || !(0.0..=1.0).contains(&alpha) {
                return Err(Error::invalid(format!(
                    "double sphere needs finite xi and alpha in [0, 1] (xi={xi}, alpha={alpha})"
                )));
            }
        }
        Ok(self)
    }

    /// Projection without the image-bounds check. Still rejects points behind
    /// the near plane or outside the double-sphere validity region.
    pub fn project_unbounded(&self, p: &Vec3) -> Option<PixelCoord> {
        let (x, y, z) = (p.x, p.y, p.z);
        let denom = match self.projection {
            Projection::Pinhole => z,
            Projection::DoubleSphere { xi, alpha } => {
                let d1 = (x * x + y * y + z * z).sqrt();
                let k = xi * d1 + z;
                let d2 = (x * x + y * y + k * k).sqrt();
                let w1 = if alpha <= 0.5 {
                    alpha / (1.0 - alpha)
                } else {
                    (1.0 - alpha) / alpha
                };
                let w2 = (w1 + xi) / (2.0 * w1 * xi + xi * xi + 1.0).sqrt();
                if z <= -w2 * d1 {
                    return None;
                }
                alpha * d2 + (1.0 - alpha) * k
            }
        };
        if !(denom > NEAR_PLANE_EPS) {
            return None;
        }
        Some(PixelCoord {
            u: self.fx * x / denom + self.cx,
            v: self.fy * y / denom + self.cy,
        })
    }

    /// Projects a camera-frame point; `None` when out of the field of view.
    pub fn project(&self, p: &Vec3) -> Option<PixelCoord> {
        self.project_unbounded(p).filter(|px| self.contains(px))
    }

    pub fn contains(&self, px: &PixelCoord) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < self.width as f64 && px.v < self.height as f64
    }

    /// Unit ray through a pixel position. Pinhole only; used by the renderer.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Option<Vec3> {
        match self.projection {
            Projection::Pinhole => {
                Some(Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize())
            }
            Projection::DoubleSphere { xi, alpha } => {
                let mx = (u - self.cx) / self.fx;
                let my = (v - self.cy) / self.fy;
                let r2 = mx * mx + my * my;
                let disc = 1.0 - (2.0 * alpha - 1.0) * r2;
                if disc < 0.0 {
                    return None;
                }
                let mz = (1.0 - alpha * alpha * r2) / (alpha * disc.sqrt() + 1.0 - alpha);
                let mz2 = mz * mz;
                let scale = (mz * xi + (mz2 + (1.0 - xi * xi) * r2).sqrt()) / (mz2 + r2);
                let ray = Vec3::new(scale * mx, scale * my, scale * mz - xi);
                Some(ray.normalize())
            }
        }
    }
}

/// Pixel under a projected coordinate: round half up.
pub fn nearest_pixel(px: &PixelCoord) -> (i64, i64) {
    ((px.u + 0.5).floor() as i64, (px.v + 0.5).floor() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_identity() {
        let t = params_to_transform(&ExtrinsicParams::default());
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.translation, Vec3::zeros());
    }

    #[test]
    fn rx_90_maps_y_to_z() {
        let t = params_to_transform(&ExtrinsicParams::new([90.0, 0.0, 0.0], [0.0; 3]));
        let p = transform_point(&t, &Vec3::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(p, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn composition_matches_explicit_product() {
        // Rx(90) = [[1,0,0],[0,0,-1],[0,1,0]], Ry(90) = [[0,0,1],[0,1,0],[-1,0,0]]
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        let ry = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        let expected = rx * ry;
        let t = params_to_transform(&ExtrinsicParams::new([90.0, 90.0, 0.0], [0.0; 3]));
        assert_abs_diff_eq!(t.rotation, expected, epsilon = 1e-12);
    }

    #[test]
    fn pure_translation_keeps_exact_identity() {
        let t = params_to_transform(&ExtrinsicParams::new([0.0; 3], [1.5, -2.0, 0.25]));
        assert_eq!(t.rotation, Matrix3::identity());
    }

    #[test]
    fn transform_point_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&RigidTransform::identity(), &p), p);
        let shift = RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::new(0.0, 0.0, 5.0),
        };
        assert_eq!(
            transform_point(&shift, &Vec3::new(1.0, 1.0, 1.0)),
            Vec3::new(1.0, 1.0, 6.0)
        );
    }

    #[test]
    fn pinhole_examples() {
        let cam = CameraModel::pinhole(1.0, 1.0, 0.0, 0.0, 1, 1).unwrap();
        let px = cam.project_unbounded(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((px.u, px.v), (0.0, 0.0));

        let cam = CameraModel::pinhole(100.0, 100.0, 50.0, 50.0, 200, 200).unwrap();
        let px = cam.project(&Vec3::new(1.0, 2.0, 2.0)).unwrap();
        assert_abs_diff_eq!(px.u, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px.v, 150.0, epsilon = 1e-12);
    }

    #[test]
    fn pinhole_rejects_behind_near_plane_and_out_of_image() {
        let cam = CameraModel::pinhole(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        assert!(cam.project(&Vec3::new(0.0, 0.0, -1.0)).is_none());
        assert!(cam.project(&Vec3::new(0.0, 0.0, 1e-7)).is_none());
        assert!(cam.project(&Vec3::new(1.0, 0.0, 1.0)).is_none());
        // the right edge u == width is excluded
        assert!(cam.project(&Vec3::new(0.5, 0.0, 1.0)).is_none());
        assert!(cam.project(&Vec3::new(0.49, 0.0, 1.0)).is_some());
    }

    #[test]
    fn double_sphere_reduces_to_pinhole() {
        let pin = CameraModel::pinhole(320.0, 310.0, 300.0, 100.0, 600, 200).unwrap();
        let ds =
            CameraModel::double_sphere(320.0, 310.0, 300.0, 100.0, 0.0, 0.0, 600, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = Vec3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(0.1..20.0),
            );
            let a = pin.project_unbounded(&p).unwrap();
            let b = ds.project_unbounded(&p).unwrap();
            assert!((a.u - b.u).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9);
        }
    }

    #[test]
    fn double_sphere_sees_beyond_ninety_degrees() {
        let ds =
            CameraModel::double_sphere(300.0, 300.0, 700.0, 700.0, -0.2, 0.6, 1400, 1400).unwrap();
        // slightly behind the image plane, still inside a >180° field of view
        assert!(ds.project_unbounded(&Vec3::new(1.0, 0.0, -0.05)).is_some());
        assert!(ds.project_unbounded(&Vec3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn double_sphere_pixel_ray_inverts_projection() {
        let ds =
            CameraModel::double_sphere(350.0, 350.0, 700.0, 700.0, -0.2, 0.6, 1400, 1400).unwrap();
        let p = Vec3::new(0.4, -0.3, 1.0).normalize();
        let px = ds.project_unbounded(&p).unwrap();
        let ray = ds.pixel_ray(px.u, px.v).unwrap();
        assert_abs_diff_eq!(ray, p, epsilon = 1e-9);
    }

    #[test]
    fn invalid_cameras_are_rejected() {
        assert!(CameraModel::pinhole(0.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(CameraModel::pinhole(1.0, 1.0, 0.0, 0.0, 0, 10).is_err());
        assert!(CameraModel::double_sphere(1.0, 1.0, 0.0, 0.0, 0.1, 1.5, 10, 10).is_err());
    }

    #[test]
    fn rotation_error_examples() {
        let ra = rot_z(33.0) * rot_y(-12.0);
        assert_abs_diff_eq!(rotation_error_angle(&ra, &ra), 0.0, epsilon = 1e-6);
        let rb = ra * rot_x(10.0);
        assert_abs_diff_eq!(rotation_error_angle(&ra, &rb), 10.0, epsilon = 1e-6);
        assert_abs_diff_eq!(
            rotation_error_angle(&Matrix3::identity(), &rot_y(180.0)),
            180.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn fibonacci_examples() {
        assert!(fibonacci_sphere(0).is_err());
        let one = fibonacci_sphere(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_abs_diff_eq!(one[0].norm(), 1.0, epsilon = 1e-12);

        let pts = fibonacci_sphere(200).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-12);
        }
        let mean = pts.iter().sum::<Vec3>() / 200.0;
        assert!(mean.norm() < 0.05, "mean {mean:?}");
        assert_eq!(pts, fibonacci_sphere(200).unwrap());
    }

    #[test]
    fn fibonacci_points_are_distinct() {
        for n in [2usize, 13, 200, 1000] {
            let pts = fibonacci_sphere(n).unwrap();
            for i in 0..n {
                for j in (i + 1)..n {
                    assert!((pts[i] - pts[j]).norm() > 1e-6, "n={n} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    #[ignore = "O(n^2) over 10k points; run with --ignored"]
    fn fibonacci_points_distinct_10k() {
        let pts = fibonacci_sphere(10_000).unwrap();
        let min = (0..pts.len())
            .flat_map(|i| ((i + 1)..pts.len()).map(move |j| (i, j)))
            .map(|(i, j)| pts[i].dot(&pts[j]))
            .fold(f64::MIN, f64::max);
        assert!(min < 1.0);
    }

    #[test]
    fn random_rotations_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let p =
                ExtrinsicParams::from_array(std::array::from_fn(|_| rng.gen_range(-720.0..720.0)));
            let r = params_to_transform(&p).rotation;
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    fn arb_params() -> impl Strategy<Value = ExtrinsicParams> {
        (
            prop::array::uniform3(-180.0f64..180.0),
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_map(|(a, t)| ExtrinsicParams::new(a, t))
    }

    proptest! {
        #[test]
        fn inverse_round_trip(params in arb_params(), p in prop::array::uniform3(-50.0f64..50.0)) {
            let t = params_to_transform(&params);
            let p = Vec3::from(p);
            let back = transform_point(&t.inverse(), &transform_point(&t, &p));
            prop_assert!((back - p).norm() < 1e-9);
        }

        #[test]
        fn rotation_error_is_symmetric(a in arb_params(), b in arb_params()) {
            let ra = params_to_transform(&a).rotation;
            let rb = params_to_transform(&b).rotation;
            let d = rotation_error_angle(&ra, &rb) - rotation_error_angle(&rb, &ra);
            prop_assert!(d.abs() < 1e-9);
        }

        #[test]
        fn pinhole_is_scale_invariant_along_rays(
            p in prop::array::uniform3(-5.0f64..5.0),
            lambda in 0.01f64..100.0,
        ) {
            let cam = CameraModel::pinhole(500.0, 480.0, 320.0, 240.0, 640, 480).unwrap();
            let p = Vec3::new(p[0], p[1], p[2].abs() + 0.5);
            let a = cam.project_unbounded(&p).unwrap();
            let b = cam.project_unbounded(&(p * lambda)).unwrap();
            prop_assert!((a.u - b.u).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9);
        }

        #[test]
        fn projecting_transformed_point_matches_pretransformed(
            params in arb_params(),
            p in prop::array::uniform3(-20.0f64..20.0),
        ) {
            let cam = CameraModel::pinhole(500.0, 480.0, 320.0, 240.0, 640, 480).unwrap();
            let t = params_to_transform(&params);
            let p = Vec3::from(p);
            let pre = t.rotation * p + t.translation;
            prop_assert_eq!(cam.project(&transform_point(&t, &p)), cam.project(&pre));
        }
    }
}
