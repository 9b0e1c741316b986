//! Camera–LiDAR correspondences: project each LiDAR point and pair its
//! feature with the image feature under the nearest pixel.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{nearest_pixel, CameraModel, RigidTransform, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Return intensity in `[0, 1]`, one per point when present.
    pub intensity: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, intensity: Option<Vec<f64>>) -> Result<Self> {
        if let Some(i) = &intensity {
            if i.len() != points.len() {
                return Err(Error::invalid(format!(
                    "intensity length {} does not match point count {}",
                    i.len(),
                    points.len()
                )));
            }
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(
                "point cloud contains non-finite coordinates",
            ));
        }
        Ok(Self { points, intensity })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// What the per-pixel values of a [`FeatureImage`] measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Range in meters.
    MetricDepth,
    /// Relative or inverse depth with arbitrary scale.
    RelativeDepth,
    /// Grayscale intensity in `[0, 1]`.
    Intensity,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::MetricDepth => 0,
            FeatureKind::RelativeDepth => 1,
            FeatureKind::Intensity => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::MetricDepth),
            1 => Some(FeatureKind::RelativeDepth),
            2 => Some(FeatureKind::Intensity),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::MetricDepth => "metric",
            FeatureKind::RelativeDepth => "relative",
            FeatureKind::Intensity => "intensity",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metric" => Ok(FeatureKind::MetricDepth),
            "relative" => Ok(FeatureKind::RelativeDepth),
            "intensity" => Ok(FeatureKind::Intensity),
            other => Err(Error::invalid(format!(
                "unknown feature kind '{other}' (expected metric, relative or intensity)"
            ))),
        }
    }
}

/// Dense per-pixel feature grid, row-major. NaN marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub width: u32,
    pub height: u32,
    pub kind: FeatureKind,
    pub values: Vec<f32>,
}

impl FeatureImage {
    pub fn new(width: u32, height: u32, kind: FeatureKind, values: Vec<f32>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "{}x{} feature image needs {} values, got {}",
                width,
                height,
                width as usize * height as usize,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            kind,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, kind: FeatureKind, value: f32) -> Self {
        Self {
            width,
            height,
            kind,
            values: vec![value; width as usize * height as usize],
        }
    }

    /// Value at a pixel, `None` when outside the grid or masked invalid.
    pub fn get(&self, col: i64, row: i64) -> Option<f64> {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return None;
        }
        let v = self.values[row as usize * self.width as usize + col as usize];
        v.is_finite().then_some(v as f64)
    }

    pub fn is_valid(&self, col: i64, row: i64) -> bool {
        self.get(col, row).is_some()
    }

    /// Min and max over valid pixels.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| {
                let v = v as f64;
                Some(match acc {
                    None => (v, v),
                    Some((lo, hi)) => (f64::min(lo, v), f64::max(hi, v)),
                })
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub cloud: PointCloud,
    pub image: FeatureImage,
}

/// Matched features: `lidar[i]` corresponds to `camera[i]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeaturePairs {
    pub lidar: Vec<f64>,
    pub camera: Vec<f64>,
}

impl FeaturePairs {
    pub fn len(&self) -> usize {
        self.lidar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lidar.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lidar.iter().copied().zip(self.camera.iter().copied())
    }
}

/// Which pair of features is matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// LiDAR range against camera depth.
    DepthToDepth,
    /// LiDAR return intensity against camera intensity.
    IntensityToIntensity,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::DepthToDepth => "d2d",
            FeatureMode::IntensityToIntensity => "i2i",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d2d" => Ok(FeatureMode::DepthToDepth),
            "i2i" => Ok(FeatureMode::IntensityToIntensity),
            other => Err(Error::invalid(format!(
                "unknown mode '{other}' (d2d or i2i)"
            ))),
        }
    }
}

/// Range of a LiDAR point from the LiDAR origin.
pub fn point_depth(p: &Vec3) -> f64 {
    p.norm()
}

pub fn get_matches(
    transform: &RigidTransform,
    cam: &CameraModel,
    frame: &Frame,
    mode: FeatureMode,
) -> Result<FeaturePairs> {
    let image = &frame.image;
    if image.width != cam.width || image.height != cam.height {
        return Err(Error::invalid(format!(
            "frame {}: feature image is {}x{} but camera is {}x{}",
            frame.id, image.width, image.height, cam.width, cam.height
        )));
    }
    let intensity = match mode {
        FeatureMode::DepthToDepth => None,
        FeatureMode::IntensityToIntensity => {
            Some(frame.cloud.intensity.as_deref().ok_or_else(|| {
                Error::invalid(format!(
                    "frame {}: i2i mode needs LiDAR intensity",
                    frame.id
                ))
            })?)
        }
    };

    let mut pairs = FeaturePairs::default();
    for (i, p) in frame.cloud.points.iter().enumerate() {
        let Some(px) = cam.project(&transform.apply(p)) else {
            continue;
        };
        let (col, row) = nearest_pixel(&px);
        let Some(image_feature) = image.get(col, row) else {
            continue;
        };
        let lidar_feature = match intensity {
            None => point_depth(p),
            Some(values) => values[i],
        };
        pairs.lidar.push(lidar_feature);
        pairs.camera.push(image_feature);
    }
    Ok(pairs)
}
