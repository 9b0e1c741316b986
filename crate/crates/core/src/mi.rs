//! Histogram-based entropy and mutual information, and the frame-averaged
//! calibration objective.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{get_matches, FeatureKind, FeatureMode, FeaturePairs, Frame};
use crate::geometry::{params_to_transform, CameraModel, ExtrinsicParams, RigidTransform};

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_DEPTH_RANGE: (f64, f64) = (0.5, 80.0);
pub const DEFAULT_MIN_MATCHES: usize = 100;
/// Objective value when no frame yields enough matches.
pub const DEGENERATE_OBJECTIVE: f64 = -1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningConfig {
    pub bins: usize,
    pub lidar_range: (f64, f64),
    pub camera_range: (f64, f64),
}

impl BinningConfig {
    pub fn new(bins: usize, lidar_range: (f64, f64), camera_range: (f64, f64)) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
        }
        for (name, (lo, hi)) in [("lidar", lidar_range), ("camera", camera_range)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!(
                    "{name} range [{lo}, {hi}] must be finite with hi > lo"
                )));
            }
        }
        Ok(Self {
            bins,
            lidar_range,
            camera_range,
        })
    }

    /// Defaults for a feature mode and camera feature kind. Relative depth is
    /// min-max normalized per frame, so its camera axis spans `[0, 1]`.
    pub fn default_for(mode: FeatureMode, kind: FeatureKind) -> Self {
        let unit = (0.0, 1.0);
        let (lidar_range, camera_range) = match (mode, kind) {
            (FeatureMode::IntensityToIntensity, _) => (unit, unit),
            (FeatureMode::DepthToDepth, FeatureKind::RelativeDepth) => (DEFAULT_DEPTH_RANGE, unit),
            (FeatureMode::DepthToDepth, _) => (DEFAULT_DEPTH_RANGE, DEFAULT_DEPTH_RANGE),
        };
        Self {
            bins: DEFAULT_BINS,
            lidar_range,
            camera_range,
        }
    }

    /// Bin of `value`, clamping out-of-range values into the edge bins.
    fn bin(&self, value: f64, (lo, hi): (f64, f64)) -> usize {
        let pos = (value - lo) / (hi - lo) * self.bins as f64;
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(self.bins - 1)
        }
    }

    pub fn lidar_bin(&self, value: f64) -> usize {
        self.bin(value, self.lidar_range)
    }

    pub fn camera_bin(&self, value: f64) -> usize {
        self.bin(value, self.camera_range)
    }

    fn edges((lo, hi): (f64, f64), bins: usize) -> Vec<f64> {
        (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect()
    }
}

/// Joint counts; row index is the LiDAR bin, column the camera bin.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    counts: Vec<f64>,
    rows: usize,
    cols: usize,
    total: f64,
    config: Option<BinningConfig>,
}

impl JointHistogram {
    /// Histogram from an explicit row-major count matrix.
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || counts.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} histogram needs {} counts, got {}",
                rows * cols,
                counts.len()
            )));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid(
                "histogram counts must be finite and non-negative",
            ));
        }
        let total = counts.iter().sum::<f64>();
        if total <= 0.0 {
            return Err(Error::EmptyInput("histogram has no mass".into()));
        }
        Ok(Self {
            counts,
            rows,
            cols,
            total,
            config: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn config(&self) -> Option<&BinningConfig> {
        self.config.as_ref()
    }

    pub fn count(&self, row: usize, col: usize) -> f64 {
        self.counts[row * self.cols + col]
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn transposed(&self) -> Self {
        let mut counts = vec![0.0; self.counts.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                counts[c * self.rows + r] = self.count(r, c);
            }
        }
        Self {
            counts,
            rows: self.cols,
            cols: self.rows,
            total: self.total,
            config: self.config.map(|c| BinningConfig {
                bins: c.bins,
                lidar_range: c.camera_range,
                camera_range: c.lidar_range,
            }),
        }
    }

    pub fn joint_distribution(&self) -> Vec<f64> {
        self.counts.iter().map(|c| c / self.total).collect()
    }

    /// Marginal over rows (LiDAR feature).
    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                self.counts[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .sum::<f64>()
                    / self.total
            })
            .collect()
    }

    /// Marginal over columns (camera feature).
    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (c, acc) in m.iter_mut().enumerate() {
                *acc += self.count(r, c);
            }
        }
        m.iter_mut().for_each(|v| *v /= self.total);
        m
    }

    /// CSV with bin edges and counts, one row per joint bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (row_edges, col_edges) = match self.config {
            Some(c) => (
                BinningConfig::edges(c.lidar_range, c.bins),
                BinningConfig::edges(c.camera_range, c.bins),
            ),
            None => (
                (0..=self.rows).map(|i| i as f64).collect(),
                (0..=self.cols).map(|i| i as f64).collect(),
            ),
        };
        writeln!(
            out,
            "lidar_bin,camera_bin,lidar_lo,lidar_hi,camera_lo,camera_hi,count"
        )?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                writeln!(
                    out,
                    "{r},{c},{},{},{},{},{}",
                    row_edges[r],
                    row_edges[r + 1],
                    col_edges[c],
                    col_edges[c + 1],
                    self.count(r, c)
                )?;
            }
        }
        Ok(())
    }
}

pub fn build_joint_histogram(
    pairs: &FeaturePairs,
    config: &BinningConfig,
) -> Result<JointHistogram> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no feature pairs to bin".into()));
    }
    let n = config.bins;
    let mut counts = vec![0.0; n * n];
    for (l, c) in pairs.iter() {
        counts[config.lidar_bin(l) * n + config.camera_bin(c)] += 1.0;
    }
    Ok(JointHistogram {
        counts,
        rows: n,
        cols: n,
        total: pairs.len() as f64,
        config: Some(*config),
    })
}

/// Shannon entropy in nats of a normalized histogram of any shape (flattened).
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(
            "probabilities must be finite and non-negative",
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `I(X;Y) = H(X) + H(Y) - H(X,Y)` in nats.
pub fn mutual_information(joint: &JointHistogram) -> f64 {
    entropy_unchecked(&joint.row_marginal()) + entropy_unchecked(&joint.col_marginal())
        - entropy_unchecked(&joint.joint_distribution())
}

/// Frames, camera and estimator settings for evaluating the objective.
#[derive(Debug, Clone)]
pub struct MiContext {
    frames: Vec<Frame>,
    cam: CameraModel,
    mode: FeatureMode,
    binning: BinningConfig,
    min_matches: usize,
    camera_norm: Vec<Option<(f64, f64)>>,
}

impl MiContext {
    pub fn new(
        frames: Vec<Frame>,
        cam: CameraModel,
        mode: FeatureMode,
        binning: BinningConfig,
        min_matches: usize,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("objective needs at least one frame"));
        }
        if min_matches == 0 {
            return Err(Error::invalid("min_matches must be positive"));
        }
        let mut camera_norm = Vec::with_capacity(frames.len());
        for frame in &frames {
            let img = &frame.image;
            if img.width != cam.width || img.height != cam.height {
                return Err(Error::invalid(format!(
                    "frame {}: image is {}x{}, camera expects {}x{}",
                    frame.id, img.width, img.height, cam.width, cam.height
                )));
            }
            let compatible = match mode {
                FeatureMode::DepthToDepth => img.kind != FeatureKind::Intensity,
                FeatureMode::IntensityToIntensity => {
                    if frame.cloud.intensity.is_none() {
                        return Err(Error::invalid(format!(
                            "frame {}: i2i mode needs LiDAR intensity",
                            frame.id
                        )));
                    }
                    img.kind == FeatureKind::Intensity
                }
            };
            if !compatible {
                return Err(Error::invalid(format!(
                    "frame {}: {} image cannot be used in {mode} mode",
                    frame.id, img.kind
                )));
            }
            camera_norm.push(match img.kind {
                FeatureKind::RelativeDepth => img.value_range().filter(|(lo, hi)| hi > lo),
                _ => None,
            });
        }
        Ok(Self {
            frames,
            cam,
            mode,
            binning,
            min_matches,
            camera_norm,
        })
    }

    /// Context with default binning for the frames' feature kind.
    pub fn with_defaults(frames: Vec<Frame>, cam: CameraModel, mode: FeatureMode) -> Result<Self> {
        let kind = frames
            .first()
            .map(|f| f.image.kind)
            .ok_or_else(|| Error::invalid("objective needs at least one frame"))?;
        Self::new(
            frames,
            cam,
            mode,
            BinningConfig::default_for(mode, kind),
            DEFAULT_MIN_MATCHES,
        )
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn camera(&self) -> &CameraModel {
        &self.cam
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn binning(&self) -> &BinningConfig {
        &self.binning
    }

    pub fn min_matches(&self) -> usize {
        self.min_matches
    }

    /// Matched pairs of frame `index`, with relative depth normalized.
    pub fn frame_pairs(&self, transform: &RigidTransform, index: usize) -> Result<FeaturePairs> {
        let mut pairs = get_matches(transform, &self.cam, &self.frames[index], self.mode)?;
        if let Some((lo, hi)) = self.camera_norm[index] {
            pairs
                .camera
                .iter_mut()
                .for_each(|v| *v = (*v - lo) / (hi - lo));
        }
        Ok(pairs)
    }

    pub fn frame_histogram(
        &self,
        transform: &RigidTransform,
        index: usize,
    ) -> Result<Option<JointHistogram>> {
        let pairs = self.frame_pairs(transform, index)?;
        if pairs.len() < self.min_matches {
            return Ok(None);
        }
        build_joint_histogram(&pairs, &self.binning).map(Some)
    }
}

/// MI of one frame, or `None` when fewer than `min_matches` points match.
pub fn calc_frame_mi(transform: &RigidTransform, ctx: &MiContext, index: usize) -> Option<f64> {
    // contexts are validated at construction, so matching cannot fail here
    match ctx.frame_histogram(transform, index) {
        Ok(Some(h)) => Some(mutual_information(&h)),
        _ => None,
    }
}

/// Per-frame MI values in frame order, evaluated in parallel.
pub fn frame_mi_values(transform: &RigidTransform, ctx: &MiContext) -> Vec<Option<f64>> {
    (0..ctx.frames.len())
        .into_par_iter()
        .map(|i| calc_frame_mi(transform, ctx, i))
        .collect()
}

/// Mean MI over non-degenerate frames; [`DEGENERATE_OBJECTIVE`] if none qualify.
pub fn objective(params: &ExtrinsicParams, ctx: &MiContext) -> f64 {
    let values = frame_mi_values(&params_to_transform(params), ctx);
    let (sum, n) = values
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        DEGENERATE_OBJECTIVE
    } else {
        sum / n as f64
    }
}
