//! Perturbation/recovery experiments: perturb the ground truth along
//! Fibonacci-sphere directions, calibrate from each perturbed guess, and
//! summarize how often and how precisely the ground truth is recovered.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    fibonacci_sphere, params_to_transform, rotation_error_angle, ExtrinsicParams, Vec3,
};
use crate::mi::{objective, MiContext};
use crate::optimizer::{
    maximize, Bounds, OptimizationResult, OptimizerConfig, ParamScaling, Termination,
};
use crate::plot;

pub const HIT_ROTATION_DEG: f64 = 0.5;
pub const HIT_TRANSLATION_M: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dof {
    /// Rotation only; translation stays at its initial value.
    Three,
    Six,
}

impl Dof {
    pub fn count(self) -> usize {
        match self {
            Dof::Three => 3,
            Dof::Six => 6,
        }
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count())
    }
}

impl FromStr for Dof {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3" => Ok(Dof::Three),
            "6" => Ok(Dof::Six),
            other => Err(Error::invalid(format!("dof must be 3 or 6, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBatch {
    pub dof: Dof,
    pub rotation_magnitude: f64,
    /// Meters; zero for rotation-only batches.
    pub translation_magnitude: f64,
    pub directions: Vec<Vec3>,
    pub perturbations: Vec<ExtrinsicParams>,
}

/// Scaled Fibonacci directions added to the Euler angles; 6-DoF batches reuse
/// the same direction for the translation delta.
pub fn generate_perturbations(
    dof: Dof,
    rot_deg: f64,
    trans_m: f64,
    n: usize,
) -> Result<PerturbationBatch> {
    if !(rot_deg >= 0.0 && rot_deg.is_finite()) {
        return Err(Error::invalid(format!(
            "rotation error must be a non-negative number, got {rot_deg}"
        )));
    }
    let trans_m = match dof {
        Dof::Three => 0.0,
        Dof::Six if trans_m >= 0.0 && trans_m.is_finite() => trans_m,
        Dof::Six => {
            return Err(Error::invalid(format!(
                "translation error must be a non-negative number, got {trans_m}"
            )))
        }
    };
    let directions = fibonacci_sphere(n)?;
    let perturbations = directions
        .iter()
        .map(|d| {
            let r = d * rot_deg;
            let t = d * trans_m;
            ExtrinsicParams::new([r.x, r.y, r.z], [t.x, t.y, t.z])
        })
        .collect();
    Ok(PerturbationBatch {
        dof,
        rotation_magnitude: rot_deg,
        translation_magnitude: trans_m,
        directions,
        perturbations,
    })
}

pub fn apply_perturbation(gt: &ExtrinsicParams, delta: &ExtrinsicParams) -> ExtrinsicParams {
    gt.add(delta)
}

/// Geodesic rotation error below 0.5° and translation error below 20 cm.
pub fn hit_metric(optimized: &ExtrinsicParams, gt: &ExtrinsicParams) -> bool {
    let a = params_to_transform(optimized);
    let b = params_to_transform(gt);
    rotation_error_angle(&a.rotation, &b.rotation) < HIT_ROTATION_DEG
        && (a.translation - b.translation).norm() < HIT_TRANSLATION_M
}

/// Optimizer settings for a calibration run. Parameters are optimized in
/// scaled units; the search box has half-width `bound_radius` scaled units
/// around the initial guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSetup {
    pub optimizer: OptimizerConfig,
    pub scaling: ParamScaling,
    pub bound_radius: f64,
}

impl Default for CalibrationSetup {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            scaling: ParamScaling::default(),
            bound_radius: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: ExtrinsicParams,
    pub result: OptimizationResult,
}

impl Calibration {
    /// True when no frame had enough matches at the returned parameters.
    pub fn is_degenerate(&self) -> bool {
        self.result.best_value <= crate::mi::DEGENERATE_OBJECTIVE
    }
}

/// Maximizes the objective from `initial`, over all six parameters or over the
/// rotation only.
pub fn calibrate(
    ctx: &MiContext,
    initial: &ExtrinsicParams,
    dof: Dof,
    setup: &CalibrationSetup,
) -> Result<Calibration> {
    if !initial.is_finite() {
        return Err(Error::invalid("initial guess must be finite"));
    }
    let scaled = setup.scaling.scale(initial);
    let k = dof.count();
    let x0 = &scaled[..k];
    let bounds = Bounds::around(x0, setup.bound_radius)?;
    let to_params = |x: &[f64]| {
        let mut full = scaled;
        full[..k].copy_from_slice(x);
        setup.scaling.unscale(&full)
    };
    let result = maximize(
        |x| objective(&to_params(x), ctx),
        x0,
        &bounds,
        &setup.optimizer,
    )?;
    Ok(Calibration {
        params: to_params(&result.best_params),
        result,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub initial: ExtrinsicParams,
    pub optimized: ExtrinsicParams,
    pub ground_truth: ExtrinsicParams,
    pub best_mi: f64,
    pub evaluations: usize,
    /// `None` when the run failed before producing a result.
    pub termination: Option<Termination>,
    pub hit: bool,
}

impl RunRecord {
    /// Signed residual, optimized minus ground truth, per parameter.
    pub fn residual(&self) -> [f64; 6] {
        self.optimized.sub(&self.ground_truth).to_array()
    }

    pub fn initial_residual(&self) -> [f64; 6] {
        self.initial.sub(&self.ground_truth).to_array()
    }
}

fn run_one(
    ctx: &MiContext,
    gt: &ExtrinsicParams,
    delta: &ExtrinsicParams,
    setup: &CalibrationSetup,
    dof: Dof,
) -> RunRecord {
    let initial = apply_perturbation(gt, delta);
    match calibrate(ctx, &initial, dof, setup) {
        Ok(cal) => RunRecord {
            initial,
            optimized: cal.params,
            ground_truth: *gt,
            best_mi: cal.result.best_value,
            evaluations: cal.result.evaluations_used,
            termination: Some(cal.result.termination),
            hit: hit_metric(&cal.params, gt),
        },
        Err(_) => RunRecord {
            initial,
            optimized: initial,
            ground_truth: *gt,
            best_mi: objective(&initial, ctx),
            evaluations: 0,
            termination: None,
            hit: false,
        },
    }
}

/// One calibration per perturbation; records come back in batch order
/// regardless of how runs are scheduled.
pub fn run_batch(
    ctx: &MiContext,
    gt: &ExtrinsicParams,
    batch: &PerturbationBatch,
    setup: &CalibrationSetup,
    dof: Dof,
) -> Vec<RunRecord> {
    batch
        .perturbations
        .par_iter()
        .map(|delta| run_one(ctx, gt, delta, setup, dof))
        .collect()
}

/// Same as [`run_batch`] on the calling thread only.
pub fn run_batch_serial(
    ctx: &MiContext,
    gt: &ExtrinsicParams,
    batch: &PerturbationBatch,
    setup: &CalibrationSetup,
    dof: Dof,
) -> Vec<RunRecord> {
    batch
        .perturbations
        .iter()
        .map(|delta| run_one(ctx, gt, delta, setup, dof))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStatistics {
    pub runs: usize,
    pub hits: usize,
    pub hit_rate: f64,
    /// Mean signed residual over hits; absent without hits.
    pub mean: [Option<f64>; 6],
    /// Sample standard deviation over hits; absent with fewer than two hits.
    pub std: [Option<f64>; 6],
}

pub fn batch_statistics(records: &[RunRecord]) -> BatchStatistics {
    let hits: Vec<[f64; 6]> = records
        .iter()
        .filter(|r| r.hit)
        .map(RunRecord::residual)
        .collect();
    let n = hits.len();
    let mean: [Option<f64>; 6] =
        std::array::from_fn(|i| (n > 0).then(|| hits.iter().map(|r| r[i]).sum::<f64>() / n as f64));
    let std = std::array::from_fn(|i| {
        (n > 1).then(|| {
            let m = mean[i].unwrap_or(0.0);
            (hits.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        })
    });
    BatchStatistics {
        runs: records.len(),
        hits: n,
        hit_rate: if records.is_empty() {
            0.0
        } else {
            n as f64 / records.len() as f64
        },
        mean,
        std,
    }
}

fn params_header(prefix: &str) -> String {
    ExtrinsicParams::NAMES
        .iter()
        .map(|n| format!("{prefix}_{n}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn params_fields(p: &ExtrinsicParams) -> String {
    p.to_array()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_records_csv<W: Write>(records: &[RunRecord], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "run,{},{},{},mi,evaluations,termination,hit",
        params_header("initial"),
        params_header("optimized"),
        params_header("gt")
    )?;
    for (i, r) in records.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            params_fields(&r.initial),
            params_fields(&r.optimized),
            params_fields(&r.ground_truth),
            r.best_mi,
            r.evaluations,
            r.termination
                .map_or_else(|| "failed".to_string(), |t| t.to_string()),
            u8::from(r.hit)
        )?;
    }
    Ok(())
}

/// One statistics row per error level, absent values written as `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStatistics {
    pub rotation_deg: f64,
    pub translation_m: f64,
    pub dof: Dof,
    pub stats: BatchStatistics,
}

pub fn write_statistics_csv<W: Write>(rows: &[LevelStatistics], mut out: W) -> std::io::Result<()> {
    let mut header = vec!["error_deg", "error_m", "dof", "runs", "hits", "hit_rate"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for n in ExtrinsicParams::NAMES {
        header.push(format!("mean_{n}"));
        header.push(format!("std_{n}"));
    }
    writeln!(out, "{}", header.join(","))?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    for row in rows {
        let s = &row.stats;
        let mut fields = vec![
            row.rotation_deg.to_string(),
            row.translation_m.to_string(),
            row.dof.to_string(),
            s.runs.to_string(),
            s.hits.to_string(),
            s.hit_rate.to_string(),
        ];
        for i in 0..6 {
            fields.push(opt(s.mean[i]));
            fields.push(opt(s.std[i]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Objective over a grid of offsets of two parameters around a center.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axes: (usize, usize),
    /// Offsets in scaled units (degrees, or translation times its scale factor).
    pub offsets: Vec<f64>,
    /// Row-major: `values[i * steps + j]` at offsets `(offsets[i], offsets[j])`.
    pub values: Vec<f64>,
}

impl SweepGrid {
    pub fn steps(&self) -> usize {
        self.offsets.len()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.steps() + j]
    }

    /// Grid node with the largest value, first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best / self.steps(), best % self.steps())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (a, b) = self.axes;
        writeln!(
            out,
            "i,j,d_{},d_{},mi",
            ExtrinsicParams::NAMES[a],
            ExtrinsicParams::NAMES[b]
        )?;
        for i in 0..self.steps() {
            for j in 0..self.steps() {
                writeln!(
                    out,
                    "{i},{j},{},{},{}",
                    self.offsets[i],
                    self.offsets[j],
                    self.value(i, j)
                )?;
            }
        }
        Ok(())
    }

    pub fn to_svg(&self) -> String {
        let (a, b) = self.axes;
        plot::heatmap_svg(
            &self.values,
            self.steps(),
            (self.offsets[0], self.offsets[self.steps() - 1]),
            (ExtrinsicParams::NAMES[a], ExtrinsicParams::NAMES[b]),
        )
    }
}

pub fn mi_surface_sweep(
    ctx: &MiContext,
    center: &ExtrinsicParams,
    axes: (usize, usize),
    range: f64,
    steps: usize,
    scaling: &ParamScaling,
) -> Result<SweepGrid> {
    if steps < 2 {
        return Err(Error::invalid(format!(
            "sweep needs at least 2 steps, got {steps}"
        )));
    }
    if axes.0 >= 6 || axes.1 >= 6 || axes.0 == axes.1 {
        return Err(Error::invalid(
            "sweep axes must be two distinct parameter indices",
        ));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid(format!(
            "sweep range must be positive, got {range}"
        )));
    }
    let offsets: Vec<f64> = (0..steps)
        .map(|i| -range + 2.0 * range * i as f64 / (steps - 1) as f64)
        .collect();
    let base = scaling.scale(center);
    let values = (0..steps * steps)
        .into_par_iter()
        .map(|k| {
            let mut x = base;
            x[axes.0] += offsets[k / steps];
            x[axes.1] += offsets[k % steps];
            objective(&scaling.unscale(&x), ctx)
        })
        .collect();
    Ok(SweepGrid {
        axes,
        offsets,
        values,
    })
}

/// Start and end of one run in a 2D residual projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BullseyeSegment {
    pub initial: (f64, f64),
    pub optimized: (f64, f64),
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bullseye {
    pub axes: (usize, usize),
    pub segments: Vec<BullseyeSegment>,
}

/// Residuals of each run projected onto two parameters, ground truth at the
/// origin.
pub fn emit_bullseye(records: &[RunRecord], axes: (usize, usize)) -> Result<Bullseye> {
    if axes.0 >= 6 || axes.1 >= 6 || axes.0 == axes.1 {
        return Err(Error::invalid(
            "bull's-eye axes must be two distinct parameter indices",
        ));
    }
    let segments = records
        .iter()
        .map(|r| {
            let a = r.initial_residual();
            let b = r.residual();
            BullseyeSegment {
                initial: (a[axes.0], a[axes.1]),
                optimized: (b[axes.0], b[axes.1]),
                hit: r.hit,
            }
        })
        .collect();
    Ok(Bullseye { axes, segments })
}

impl Bullseye {
    /// Two rows per run: its initial and its optimized residual.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "run,endpoint,x,y,hit")?;
        for (i, s) in self.segments.iter().enumerate() {
            let hit = u8::from(s.hit);
            writeln!(out, "{i},initial,{},{},{hit}", s.initial.0, s.initial.1)?;
            writeln!(
                out,
                "{i},optimized,{},{},{hit}",
                s.optimized.0, s.optimized.1
            )?;
        }
        Ok(())
    }

    pub fn to_svg(&self) -> String {
        let segments: Vec<_> = self
            .segments
            .iter()
            .map(|s| (s.initial, s.optimized, s.hit))
            .collect();
        plot::bullseye_svg(
            &segments,
            (
                ExtrinsicParams::NAMES[self.axes.0],
                ExtrinsicParams::NAMES[self.axes.1],
            ),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(residual: [f64; 6], hit: bool) -> RunRecord {
        let gt = ExtrinsicParams::new([90.0, 0.0, 90.0], [0.1, 0.2, 0.3]);
        RunRecord {
            initial: gt,
            optimized: gt.add(&ExtrinsicParams::from_array(residual)),
            ground_truth: gt,
            best_mi: 1.0,
            evaluations: 10,
            termination: Some(Termination::RadiusConverged),
            hit,
        }
    }

    #[test]
    fn perturbations_have_the_requested_norms() {
        let b = generate_perturbations(Dof::Three, 1.0, 0.5, 200).unwrap();
        assert_eq!(b.perturbations.len(), 200);
        assert_eq!(b.translation_magnitude, 0.0);
        for p in &b.perturbations {
            assert_abs_diff_eq!(p.angles_deg().norm(), 1.0, epsilon = 1e-9);
            assert_eq!(p.translation(), Vec3::zeros());
        }
        let b = generate_perturbations(Dof::Six, 0.5, 0.25, 50).unwrap();
        for (p, d) in b.perturbations.iter().zip(&b.directions) {
            assert_abs_diff_eq!(p.angles_deg().norm(), 0.5, epsilon = 1e-9);
            assert_abs_diff_eq!(p.translation().norm(), 0.25, epsilon = 1e-9);
            assert_abs_diff_eq!((p.translation() / 0.25 - d).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_magnitude_gives_identity_deltas() {
        let b = generate_perturbations(Dof::Six, 0.0, 0.0, 10).unwrap();
        assert!(b.perturbations.iter().all(|p| p.to_array() == [0.0; 6]));
    }

    #[test]
    fn perturbations_are_distinct_and_deterministic() {
        let a = generate_perturbations(Dof::Three, 10.0, 0.0, 200).unwrap();
        let b = generate_perturbations(Dof::Three, 10.0, 0.0, 200).unwrap();
        assert_eq!(a, b);
        for i in 0..200 {
            for j in i + 1..200 {
                assert_ne!(a.perturbations[i], a.perturbations[j]);
            }
        }
    }

    #[test]
    fn invalid_perturbation_arguments() {
        assert!(generate_perturbations(Dof::Three, 1.0, 0.0, 0).is_err());
        assert!(generate_perturbations(Dof::Three, -1.0, 0.0, 5).is_err());
        assert!(generate_perturbations(Dof::Six, 1.0, f64::NAN, 5).is_err());
    }

    #[test]
    fn apply_perturbation_is_additive() {
        let gt = ExtrinsicParams::default();
        let d = ExtrinsicParams::new([1.0, 0.0, 0.0], [0.0; 3]);
        assert_eq!(apply_perturbation(&gt, &d), d);
        let gt = ExtrinsicParams::new([90.3, -2.0, 45.0], [0.1, -0.3, 0.7]);
        assert_eq!(apply_perturbation(&gt, &ExtrinsicParams::default()), gt);
        let d = ExtrinsicParams::new([0.3, 1.7, -2.2], [0.05, 0.0, -0.11]);
        let back = apply_perturbation(&gt, &d).sub(&d);
        for (a, b) in back.to_array().iter().zip(gt.to_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn hit_metric_boundaries() {
        let gt = ExtrinsicParams::default();
        assert!(hit_metric(
            &ExtrinsicParams::new([0.4, 0.0, 0.0], [0.1, 0.0, 0.0]),
            &gt
        ));
        assert!(!hit_metric(
            &ExtrinsicParams::new([0.6, 0.0, 0.0], [0.0; 3]),
            &gt
        ));
        assert!(!hit_metric(
            &ExtrinsicParams::new([0.0, 0.5, 0.0], [0.0; 3]),
            &gt
        ));
        assert!(!hit_metric(
            &ExtrinsicParams::new([0.0, 0.0, 0.0], [0.0, 0.2, 0.0]),
            &gt
        ));
        assert!(hit_metric(
            &ExtrinsicParams::new([0.0, 0.0, 0.0], [0.0, 0.19999, 0.0]),
            &gt
        ));
    }

    #[test]
    fn statistics_without_hits_are_absent() {
        let s = batch_statistics(&[record([1.0; 6], false), record([2.0; 6], false)]);
        assert_eq!(s.hit_rate, 0.0);
        assert_eq!(s.mean, [None; 6]);
        assert_eq!(s.std, [None; 6]);
        let s = batch_statistics(&[]);
        assert_eq!((s.runs, s.hit_rate), (0, 0.0));
    }

    #[test]
    fn single_hit_has_mean_but_no_std() {
        let s = batch_statistics(&[
            record([0.1, 0.0, 0.0, 0.0, 0.0, 0.0], true),
            record([5.0; 6], false),
        ]);
        assert_eq!(s.hit_rate, 0.5);
        assert_abs_diff_eq!(s.mean[0].unwrap(), 0.1, epsilon = 1e-12);
        assert_eq!(s.std, [None; 6]);
    }

    #[test]
    fn statistics_match_hand_computation() {
        let rs = [
            record([0.1, -0.2, 0.0, 0.01, 0.0, 0.0], true),
            record([0.3, -0.2, 0.0, 0.03, 0.0, 0.0], true),
            record([-0.1, -0.2, 0.0, -0.01, 0.0, 0.0], true),
            record([0.5, -0.2, 0.0, 0.05, 0.0, 0.0], true),
            record([9.0; 6], false),
        ];
        let s = batch_statistics(&rs);
        assert_abs_diff_eq!(s.hit_rate, 0.8, epsilon = 1e-15);
        // values 0.1, 0.3, -0.1, 0.5: mean 0.2, squared deviations sum 0.2
        assert_abs_diff_eq!(s.mean[0].unwrap(), 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(s.std[0].unwrap(), (0.2f64 / 3.0).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(s.std[1].unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.mean[3].unwrap(), 0.02, epsilon = 1e-9);
    }

    #[test]
    fn csv_layouts() {
        let rs = [record([0.1; 6], true), record([0.0; 6], false)];
        let mut buf = Vec::new();
        write_records_csv(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert_eq!(lines[0].split(',').count(), 1 + 18 + 4);

        let bull = emit_bullseye(&rs, (0, 1)).unwrap();
        let mut buf = Vec::new();
        bull.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            1 + 2 * rs.len()
        );

        let mut buf = Vec::new();
        let row = LevelStatistics {
            rotation_deg: 1.0,
            translation_m: 0.0,
            dof: Dof::Three,
            stats: batch_statistics(&rs[1..]),
        };
        write_statistics_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",-,-"));
    }

    #[test]
    fn zero_residual_bullseye_sits_at_origin() {
        let bull = emit_bullseye(&[record([0.0; 6], true)], (0, 2)).unwrap();
        assert_eq!(bull.segments[0].initial, (0.0, 0.0));
        assert_eq!(bull.segments[0].optimized, (0.0, 0.0));
        assert!(emit_bullseye(&[], (1, 1)).is_err());
    }

    #[test]
    fn dof_parsing() {
        assert_eq!("3".parse::<Dof>().unwrap(), Dof::Three);
        assert_eq!("6".parse::<Dof>().unwrap(), Dof::Six);
        assert!("4".parse::<Dof>().is_err());
    }
}
