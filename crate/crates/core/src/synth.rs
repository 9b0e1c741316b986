//! Ray-cast synthetic scenes: a LiDAR scan and camera depth/intensity images
//! rendered from the same geometry with known extrinsics.
//!
//! Frames: LiDAR x forward, y left, z up; camera z forward, x right, y down.
//! Camera depth images store the range from the camera center along each
//! pixel ray, the camera-side analogue of LiDAR range.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureImage, FeatureKind, FeatureMode, Frame, PointCloud};
use crate::geometry::{
    params_to_transform, rot_z, CameraModel, ExtrinsicParams, RigidTransform, Vec3,
};

const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Diffuse reflectance seen by the camera, in `[0, 1]`.
    pub albedo: f64,
    /// Near-infrared reflectivity seen by the LiDAR, in `[0, 1]`.
    pub reflectivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Infinite plane through `point` with unit `normal`.
    Plane { point: Vec3, normal: Vec3 },
    /// Axis-aligned box.
    Box { min: Vec3, max: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    pub shape: Shape,
    pub material: Material,
}

impl Surface {
    pub fn plane(point: Vec3, normal: Vec3, material: Material) -> Self {
        Self {
            shape: Shape::Plane {
                point,
                normal: normal.normalize(),
            },
            material,
        }
    }

    pub fn cuboid(center: Vec3, size: Vec3, material: Material) -> Self {
        Self {
            shape: Shape::Box {
                min: center - size / 2.0,
                max: center + size / 2.0,
            },
            material,
        }
    }

    /// Distance along the unit ray and the surface normal at the hit.
    fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3)> {
        match self.shape {
            Shape::Plane { point, normal } => {
                let denom = dir.dot(&normal);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (point - origin).dot(&normal) / denom;
                (t > HIT_EPS).then_some((t, normal))
            }
            Shape::Box { min, max } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                let mut axis = 0;
                for i in 0..3 {
                    if dir[i].abs() < 1e-15 {
                        if origin[i] < min[i] || origin[i] > max[i] {
                            return None;
                        }
                        continue;
                    }
                    let a = (min[i] - origin[i]) / dir[i];
                    let b = (max[i] - origin[i]) / dir[i];
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    if lo > t_near {
                        t_near = lo;
                        axis = i;
                    }
                    t_far = t_far.min(hi);
                }
                if t_near > t_far || t_near <= HIT_EPS {
                    // rays starting inside a box see nothing of it
                    return None;
                }
                let mut normal = Vec3::zeros();
                normal[axis] = -dir[axis].signum();
                Some((t_near, normal))
            }
        }
    }
}

/// Solid noise texture modulating albedo and reflectivity around each
/// surface's mean. The camera and LiDAR fields share a fraction of their
/// variation given by `correlation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    pub amplitude: f64,
    /// Lattice spacing in meters.
    pub cell: f64,
    pub correlation: f64,
    pub seed: u64,
}

impl Default for Texture {
    fn default() -> Self {
        Self {
            amplitude: 0.25,
            cell: 0.3,
            correlation: 0.5,
            seed: 0,
        }
    }
}

impl Texture {
    pub fn none() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn albedo(&self, mat: &Material, p: &Vec3) -> f64 {
        if self.amplitude == 0.0 {
            return mat.albedo;
        }
        (mat.albedo + self.amplitude * value_noise(p, self.cell, self.seed)).clamp(0.0, 1.0)
    }

    pub fn reflectivity(&self, mat: &Material, p: &Vec3) -> f64 {
        if self.amplitude == 0.0 {
            return mat.reflectivity;
        }
        let c = self.correlation.clamp(-1.0, 1.0);
        let shared = value_noise(p, self.cell, self.seed);
        let own = value_noise(p, self.cell, self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let n = c * shared + (1.0 - c * c).sqrt() * own;
        (mat.reflectivity + self.amplitude * n).clamp(0.0, 1.0)
    }
}

fn lattice_value(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    // splitmix64 finalizer over the packed lattice coordinates
    let mut z = seed
        ^ (ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f)
        ^ (iz as u64).wrapping_mul(0x1656_67b1_9e37_79f9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Smooth value noise in `[-1, 1]` on a cubic lattice.
fn value_noise(p: &Vec3, cell: f64, seed: u64) -> f64 {
    let q = p / cell;
    let base = q.map(f64::floor);
    let f = q - base;
    let u = f.map(|t| t * t * (3.0 - 2.0 * t));
    let (ix, iy, iz) = (base.x as i64, base.y as i64, base.z as i64);
    let mut acc = 0.0;
    for dx in 0..2 {
        for dy in 0..2 {
            for dz in 0..2 {
                let w = (if dx == 1 { u.x } else { 1.0 - u.x })
                    * (if dy == 1 { u.y } else { 1.0 - u.y })
                    * (if dz == 1 { u.z } else { 1.0 - u.z });
                acc += w * lattice_value(ix + dx, iy + dy, iz + dz, seed);
            }
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPattern {
    pub azimuth_steps: usize,
    pub elevations_deg: Vec<f64>,
    pub max_range: f64,
}

impl Default for ScanPattern {
    /// 64 rings over [-24°, +2°], 900 azimuth steps, 80 m range.
    fn default() -> Self {
        Self {
            azimuth_steps: 900,
            elevations_deg: (0..64).map(|i| -24.0 + 26.0 * i as f64 / 63.0).collect(),
            max_range: 80.0,
        }
    }
}

impl ScanPattern {
    /// Unit ray directions in ring-major order, azimuth 0 pointing along +x.
    pub fn directions(&self) -> Vec<Vec3> {
        let mut dirs = Vec::with_capacity(self.elevations_deg.len() * self.azimuth_steps);
        for el in &self.elevations_deg {
            let (se, ce) = el.to_radians().sin_cos();
            for a in 0..self.azimuth_steps {
                let az = 2.0 * PI * a as f64 / self.azimuth_steps as f64;
                dirs.push(Vec3::new(ce * az.cos(), ce * az.sin(), se));
            }
        }
        dirs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Gaussian range noise in meters.
    pub depth_sigma: f64,
    pub dropout: f64,
    /// Gaussian noise on LiDAR intensity.
    pub intensity_sigma: f64,
    /// Relative Gaussian error of camera depth, as left by depth estimation.
    pub camera_depth_rel_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            depth_sigma: 0.02,
            dropout: 0.01,
            intensity_sigma: 0.05,
            camera_depth_rel_sigma: 0.03,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            depth_sigma: 0.0,
            dropout: 0.0,
            intensity_sigma: 0.0,
            camera_depth_rel_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub surfaces: Vec<Surface>,
    /// LiDAR pose in the world: maps LiDAR-frame points to world points.
    pub lidar_pose: RigidTransform,
    pub scan: ScanPattern,
    pub noise: NoiseConfig,
    pub texture: Texture,
    /// Unit direction towards the light source, for camera shading.
    pub sun: Vec3,
}

impl SyntheticScene {
    pub fn new(surfaces: Vec<Surface>, lidar_pose: RigidTransform) -> Self {
        Self {
            surfaces,
            lidar_pose,
            scan: ScanPattern::default(),
            noise: NoiseConfig::default(),
            texture: Texture::default(),
            sun: Vec3::new(0.3, 0.5, 0.8).normalize(),
        }
    }

    /// Nearest hit: distance, normal and material.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3, Material)> {
        self.surfaces
            .iter()
            .filter_map(|s| s.intersect(origin, dir).map(|(t, n)| (t, n, s.material)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// Ray caster specialized to rays leaving `origin`.
    pub fn caster(&self, origin: Vec3) -> Caster<'_> {
        Caster::new(&self.surfaces, origin)
    }

    /// Camera pose in the world for camera-from-LiDAR extrinsics.
    pub fn camera_pose(&self, extrinsics: &ExtrinsicParams) -> RigidTransform {
        self.lidar_pose
            .compose(&params_to_transform(extrinsics).inverse())
    }
}

const AZIMUTH_BUCKETS: usize = 720;

/// Casts rays from a fixed origin, testing only the boxes whose azimuth
/// interval around the origin covers the ray. Results equal a brute-force
/// nearest-hit search over all surfaces.
pub struct Caster<'a> {
    surfaces: &'a [Surface],
    origin: Vec3,
    always: Vec<usize>,
    buckets: Vec<Vec<usize>>,
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn azimuth_bucket(angle: f64) -> i64 {
    (angle.rem_euclid(2.0 * PI) / (2.0 * PI) * AZIMUTH_BUCKETS as f64).floor() as i64
}

impl<'a> Caster<'a> {
    pub fn new(surfaces: &'a [Surface], origin: Vec3) -> Self {
        let mut always = Vec::new();
        let mut buckets = vec![Vec::new(); AZIMUTH_BUCKETS];
        for (i, s) in surfaces.iter().enumerate() {
            let Shape::Box { min, max } = s.shape else {
                always.push(i);
                continue;
            };
            let margin = 1e-6;
            if origin.x >= min.x - margin
                && origin.x <= max.x + margin
                && origin.y >= min.y - margin
                && origin.y <= max.y + margin
            {
                always.push(i);
                continue;
            }
            let center = (min + max) / 2.0;
            let mid = (center.y - origin.y).atan2(center.x - origin.x);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for x in [min.x, max.x] {
                for y in [min.y, max.y] {
                    let d = wrap_angle((y - origin.y).atan2(x - origin.x) - mid);
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            let first = azimuth_bucket(mid + lo) - 1;
            let mut last = azimuth_bucket(mid + hi) + 1;
            if last < first {
                last += AZIMUTH_BUCKETS as i64;
            }
            if last - first + 1 >= AZIMUTH_BUCKETS as i64 {
                always.push(i);
                continue;
            }
            for b in first..=last {
                buckets[b.rem_euclid(AZIMUTH_BUCKETS as i64) as usize].push(i);
            }
        }
        Self {
            surfaces,
            origin,
            always,
            buckets,
        }
    }

    /// Nearest hit: distance, normal and material.
    pub fn cast(&self, dir: &Vec3) -> Option<(f64, Vec3, Material)> {
        let bucket = if dir.x == 0.0 && dir.y == 0.0 {
            None
        } else {
            Some(&self.buckets[azimuth_bucket(dir.y.atan2(dir.x)) as usize])
        };
        let mut best: Option<(usize, f64, Vec3)> = None;
        let mut test = |i: usize| {
            if let Some((t, n)) = self.surfaces[i].intersect(&self.origin, dir) {
                let better = match best {
                    None => true,
                    Some((j, bt, _)) => t < bt || (t == bt && i < j),
                };
                if better {
                    best = Some((i, t, n));
                }
            }
        };
        match bucket {
            Some(b) => {
                self.always.iter().for_each(|&i| test(i));
                b.iter().for_each(|&i| test(i));
            }
            None => (0..self.surfaces.len()).for_each(&mut test),
        }
        best.map(|(i, t, n)| (t, n, self.surfaces[i].material))
    }
}

/// One rendered time step with both camera feature images.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub id: String,
    pub cloud: PointCloud,
    pub depth: FeatureImage,
    pub intensity: FeatureImage,
}

impl RenderedFrame {
    /// The frame used by a feature mode: depth image for D2D, intensity for I2I.
    pub fn frame(&self, mode: FeatureMode) -> Frame {
        Frame {
            id: self.id.clone(),
            cloud: self.cloud.clone(),
            image: match mode {
                FeatureMode::DepthToDepth => self.depth.clone(),
                FeatureMode::IntensityToIntensity => self.intensity.clone(),
            },
        }
    }
}

/// Values are rounded to `f32` so rendered frames survive a save/load cycle.
fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

pub fn render_synthetic(
    scene: &SyntheticScene,
    extrinsics: &ExtrinsicParams,
    cam: &CameraModel,
    seed: u64,
) -> RenderedFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth_noise = Normal::new(0.0, scene.noise.depth_sigma.max(0.0)).expect("finite sigma");
    let intensity_noise =
        Normal::new(0.0, scene.noise.intensity_sigma.max(0.0)).expect("finite sigma");

    let rotation = scene.lidar_pose.rotation;
    let origin = scene.lidar_pose.translation;
    let lidar_caster = scene.caster(origin);
    let mut points = Vec::new();
    let mut intensity = Vec::new();
    for dir_l in scene.scan.directions() {
        // the draws happen for every ray so that the noise sequence does not
        // depend on which rays hit
        let drop = rng.gen::<f64>() < scene.noise.dropout;
        let dn = depth_noise.sample(&mut rng);
        let inoise = intensity_noise.sample(&mut rng);
        let dir_w = rotation * dir_l;
        let Some((t, normal, mat)) = lidar_caster.cast(&dir_w) else {
            continue;
        };
        if drop || t > scene.scan.max_range {
            continue;
        }
        let range = (t + dn).max(0.0);
        let p = dir_l * range;
        points.push(Vec3::new(f32_exact(p.x), f32_exact(p.y), f32_exact(p.z)));
        let incidence = normal.dot(&dir_w).abs();
        let reflectivity = scene.texture.reflectivity(&mat, &(origin + dir_w * t));
        intensity.push(f32_exact(
            (reflectivity * incidence + inoise).clamp(0.0, 1.0),
        ));
    }

    let cam_pose = scene.camera_pose(extrinsics);
    let camera_caster = scene.caster(cam_pose.translation);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..h)
        .into_par_iter()
        .map(|row| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(row as u64 + 1);
            let rel = Normal::new(0.0, scene.noise.camera_depth_rel_sigma.max(0.0))
                .expect("finite sigma");
            let mut depth = vec![f32::NAN; w];
            let mut shade = vec![f32::NAN; w];
            for col in 0..w {
                let Some(ray_c) = cam.pixel_ray(col as f64, row as f64) else {
                    continue;
                };
                let dir_w = cam_pose.rotation * ray_c;
                if let Some((t, normal, mat)) = camera_caster.cast(&dir_w) {
                    if t <= scene.scan.max_range {
                        depth[col] = (t * (1.0 + rel.sample(&mut rng)).max(0.0)) as f32;
                        let light = 0.3 + 0.7 * normal.dot(&scene.sun).max(0.0);
                        let albedo = scene
                            .texture
                            .albedo(&mat, &(cam_pose.translation + dir_w * t));
                        shade[col] = (albedo * light).clamp(0.0, 1.0) as f32;
                    }
                }
            }
            (depth, shade)
        })
        .collect();
    let (depth, shade): (Vec<_>, Vec<_>) = rows.into_iter().unzip();

    RenderedFrame {
        id: format!("{seed}"),
        cloud: PointCloud {
            points,
            intensity: Some(intensity),
        },
        depth: FeatureImage {
            width: cam.width,
            height: cam.height,
            kind: FeatureKind::MetricDepth,
            values: depth.concat(),
        },
        intensity: FeatureImage {
            width: cam.width,
            height: cam.height,
            kind: FeatureKind::Intensity,
            values: shade.concat(),
        },
    }
}

pub const PRESETS: [&str; 2] = ["boxes", "street-canyon"];

/// Camera-from-LiDAR extrinsics used by the presets: a forward-looking camera
/// mounted slightly below and behind the LiDAR.
pub fn preset_ground_truth() -> ExtrinsicParams {
    ExtrinsicParams::new([90.4, -0.3, 89.6], [0.06, -0.08, -0.27])
}

/// Pinhole camera used by the presets (77° x 28° field of view).
pub fn preset_camera() -> CameraModel {
    CameraModel::pinhole(400.0, 400.0, 320.0, 100.0, 640, 200).expect("valid preset camera")
}

fn random_material(rng: &mut ChaCha8Rng) -> Material {
    // drawn independently of geometry and of each other
    let albedo = rng.gen_range(0.05..0.95);
    let reflectivity = rng.gen_range(0.05..0.95);
    Material {
        albedo,
        reflectivity,
    }
}

fn rig_pose(x: f64, y: f64, yaw_deg: f64) -> RigidTransform {
    RigidTransform {
        rotation: rot_z(yaw_deg),
        translation: Vec3::new(x, y, 1.73),
    }
}

/// Static world geometry of a preset.
pub fn preset_world(name: &str, seed: u64) -> Result<Vec<Surface>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut surfaces = vec![Surface::plane(
        Vec3::zeros(),
        Vec3::z(),
        random_material(&mut rng),
    )];
    match name {
        "boxes" => {
            for _ in 0..140 {
                let x: f64 = rng.gen_range(-10.0..120.0);
                let y: f64 = rng.gen_range(-25.0..25.0);
                if y.abs() < 3.0 {
                    continue;
                }
                let size = Vec3::new(
                    rng.gen_range(0.5..5.0),
                    rng.gen_range(0.5..5.0),
                    rng.gen_range(0.5..6.0),
                );
                surfaces.push(Surface::cuboid(
                    Vec3::new(x, y, size.z / 2.0),
                    size,
                    random_material(&mut rng),
                ));
            }
        }
        "street-canyon" => {
            for side in [-1.0, 1.0] {
                // facades made of blocks with varying setbacks and heights
                let mut x = -20.0;
                while x < 130.0 {
                    let len = rng.gen_range(4.0..14.0);
                    let depth = 10.0;
                    let setback = rng.gen_range(0.0..2.5);
                    let height = rng.gen_range(6.0..20.0);
                    let y = side * (9.0 + setback + depth / 2.0);
                    surfaces.push(Surface::cuboid(
                        Vec3::new(x + len / 2.0, y, height / 2.0),
                        Vec3::new(len, depth, height),
                        random_material(&mut rng),
                    ));
                    x += len;
                }
                // parked cars and poles along the curb
                let mut x = -15.0;
                while x < 125.0 {
                    x += rng.gen_range(3.0..12.0);
                    if rng.gen_bool(0.6) {
                        surfaces.push(Surface::cuboid(
                            Vec3::new(x, side * rng.gen_range(4.5..5.5), 0.75),
                            Vec3::new(4.2, 1.8, 1.5),
                            random_material(&mut rng),
                        ));
                        x += 4.5;
                    } else {
                        surfaces.push(Surface::cuboid(
                            Vec3::new(x, side * rng.gen_range(6.0..7.5), 2.0),
                            Vec3::new(0.3, 0.3, 4.0),
                            random_material(&mut rng),
                        ));
                    }
                }
            }
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(surfaces)
}

/// `frames` scenes sharing one world, with the rig driving along +x.
pub fn preset_sequence(name: &str, seed: u64, frames: usize) -> Result<Vec<SyntheticScene>> {
    if frames == 0 {
        return Err(Error::invalid("frame count must be positive"));
    }
    let surfaces = preset_world(name, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    Ok((0..frames)
        .map(|i| {
            let x = 4.0 * i as f64 * 25.0 / frames.max(25) as f64;
            let y = rng.gen_range(-1.0..1.0);
            let yaw = rng.gen_range(-4.0..4.0);
            let mut scene = SyntheticScene::new(surfaces.clone(), rig_pose(x, y, yaw));
            scene.texture.seed = seed;
            scene
        })
        .collect())
}

/// Renders every scene of a sequence; frame ids are zero-padded indices.
pub fn render_sequence(
    scenes: &[SyntheticScene],
    extrinsics: &ExtrinsicParams,
    cam: &CameraModel,
    seed: u64,
) -> Vec<RenderedFrame> {
    scenes
        .iter()
        .enumerate()
        .map(|(i, scene)| {
            let mut frame = render_synthetic(scene, extrinsics, cam, seed.wrapping_add(i as u64));
            frame.id = format!("{i:06}");
            frame
        })
        .collect()
}

/// Rotation taking LiDAR axes to camera axes without any mounting offsets.
pub fn nominal_camera_rotation() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_error_angle;

    fn wall_scene() -> SyntheticScene {
        let mut scene = SyntheticScene::new(
            vec![Surface::plane(
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(-1.0, 0.0, 0.0),
                Material {
                    albedo: 0.5,
                    reflectivity: 0.5,
                },
            )],
            RigidTransform::identity(),
        );
        scene.noise = NoiseConfig::none();
        scene.scan = ScanPattern {
            azimuth_steps: 8,
            elevations_deg: vec![0.0],
            max_range: 80.0,
        };
        scene
    }

    #[test]
    fn forward_ray_hits_wall_at_ten_meters() {
        let scene = wall_scene();
        let cam = CameraModel::pinhole(100.0, 100.0, 50.0, 50.0, 101, 101).unwrap();
        let ext = ExtrinsicParams::new([90.0, 0.0, 90.0], [0.0; 3]);
        let frame = render_synthetic(&scene, &ext, &cam, 1);
        // azimuths 0 and ±45° hit the wall; the forward ray comes first
        assert_eq!(frame.cloud.points.len(), 3);
        assert!((frame.cloud.points[0].norm() - 10.0).abs() < 1e-9);
        assert!(frame.cloud.points[0].y.abs() < 1e-12);
        // the camera looks along LiDAR +x, so its center pixel sees the wall at 10 m
        assert!((frame.depth.get(50, 50).unwrap() - 10.0).abs() < 1e-5);
    }

    #[test]
    fn preset_extrinsics_are_close_to_the_nominal_mount() {
        let r = params_to_transform(&preset_ground_truth()).rotation;
        assert!(rotation_error_angle(&r, &nominal_camera_rotation()) < 1.0);
        let exact = params_to_transform(&ExtrinsicParams::new([90.0, 0.0, 90.0], [0.0; 3]));
        assert!(rotation_error_angle(&exact.rotation, &nominal_camera_rotation()) < 1e-9);
    }

    #[test]
    fn box_intersection_reports_entry_face() {
        let s = Surface::cuboid(
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(2.0, 2.0, 2.0),
            Material {
                albedo: 0.1,
                reflectivity: 0.1,
            },
        );
        let (t, n) = s.intersect(&Vec3::zeros(), &Vec3::x()).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert_eq!(n, Vec3::new(-1.0, 0.0, 0.0));
        assert!(s.intersect(&Vec3::zeros(), &-Vec3::x()).is_none());
        assert!(s.intersect(&Vec3::new(5.0, 0.0, 0.0), &Vec3::x()).is_none());
    }

    #[test]
    fn rendering_is_reproducible() {
        let scenes = preset_sequence("boxes", 3, 2).unwrap();
        let cam = preset_camera();
        let a = render_sequence(&scenes, &preset_ground_truth(), &cam, 10);
        let b = render_sequence(&scenes, &preset_ground_truth(), &cam, 10);
        let bits = |f: &[RenderedFrame]| -> Vec<u32> {
            f.iter()
                .flat_map(|r| r.depth.values.iter().chain(&r.intensity.values))
                .map(|v| v.to_bits())
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a[0].cloud, b[0].cloud);
        assert!(a[0].cloud.len() > 10_000);
        let c = render_sequence(&scenes, &preset_ground_truth(), &cam, 11);
        assert_ne!(a[0].cloud, c[0].cloud);
    }

    #[test]
    fn caster_matches_brute_force() {
        let world = preset_world("street-canyon", 4).unwrap();
        let scene = SyntheticScene::new(world, rig_pose(3.0, 0.5, 2.0));
        let origin = Vec3::new(3.0, 0.5, 1.73);
        let caster = scene.caster(origin);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20_000 {
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.3),
            )
            .normalize();
            assert_eq!(caster.cast(&d), scene.cast(&origin, &d));
        }
    }

    #[test]
    fn value_noise_is_bounded_and_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let p = Vec3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-5.0..5.0),
            );
            let v = value_noise(&p, 0.3, 7);
            assert!((-1.0..=1.0).contains(&v));
            let q = p + Vec3::new(1e-7, -1e-7, 1e-7);
            assert!((value_noise(&q, 0.3, 7) - v).abs() < 1e-4);
        }
        let mat = Material {
            albedo: 0.5,
            reflectivity: 0.2,
        };
        let p = Vec3::new(1.0, 2.0, 0.5);
        assert_eq!(Texture::none().albedo(&mat, &p), 0.5);
        assert_eq!(Texture::none().reflectivity(&mat, &p), 0.2);
    }

    #[test]
    fn unknown_preset_lists_the_known_ones() {
        let err = preset_world("forest", 1).unwrap_err().to_string();
        assert!(err.contains("boxes") && err.contains("street-canyon"));
        assert!(preset_sequence("boxes", 1, 0).is_err());
    }
}
