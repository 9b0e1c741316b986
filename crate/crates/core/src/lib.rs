//! Target-free camera–LiDAR extrinsic calibration by maximizing the mutual
//! information between LiDAR range and camera depth.
//!
//! The pipeline: [`features::get_matches`] projects a scan into the image and
//! pairs features, [`mi`] turns the pairs into a joint histogram and averages
//! per-frame mutual information over a frame set, and [`optimizer::maximize`]
//! searches the extrinsics without derivatives. [`experiments`] runs the
//! perturbation/recovery protocol and [`synth`] provides scenes with known
//! ground truth.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod features;
pub mod geometry;
pub mod mi;
pub mod optimizer;
pub mod plot;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureImage, FeatureKind, FeatureMode, FeaturePairs, Frame, PointCloud};
pub use geometry::{
    params_to_transform, CameraModel, ExtrinsicParams, PixelCoord, RigidTransform, Vec3,
};
pub use mi::{objective, BinningConfig, JointHistogram, MiContext};
pub use optimizer::{maximize, Bounds, OptimizationResult, OptimizerConfig, ParamScaling};
