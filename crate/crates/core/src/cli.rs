//! Command-line front end: synthetic data generation, calibration, batch
//! evaluation and objective sweeps.
//!
//! Exit codes: 0 on success, 1 for usage or input errors, 2 when the
//! objective is degenerate (no frame has enough matches).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    sample_frames, save_depth_map, save_pointcloud_bin, DatasetManifest, FrameEntry,
};
use crate::error::{Error, Result};
use crate::experiments::{
    batch_statistics, calibrate, emit_bullseye, generate_perturbations, mi_surface_sweep,
    run_batch, write_records_csv, write_statistics_csv, CalibrationSetup, Dof, LevelStatistics,
};
use crate::features::{FeatureKind, FeatureMode};
use crate::geometry::{params_to_transform, ExtrinsicParams, Vec3};
use crate::mi::{BinningConfig, MiContext, DEGENERATE_OBJECTIVE};
use crate::optimizer::{OptimizerConfig, ParamScaling};
use crate::synth::{preset_camera, preset_ground_truth, preset_sequence, render_sequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mical",
    version,
    about = "Camera-LiDAR extrinsic calibration by mutual information"
)]
pub struct Cli {
    /// Output directory for every file a command writes.
    #[arg(long, global = true, env = "MICAL_OUT", default_value = "mical-out")]
    pub out: PathBuf,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic sequence with known extrinsics.
    Synth(SynthArgs),
    /// Calibrate from one initial guess.
    Calibrate(CalibrateArgs),
    /// Run perturbation/recovery batches per error level.
    Evaluate(EvaluateArgs),
    /// Evaluate the objective on a grid over two parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene preset: boxes or street-canyon.
    #[arg(long, default_value = "street-canyon")]
    pub preset: String,
    #[arg(long, default_value_t = 25)]
    pub frames: usize,
}

/// A `lo,hi` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range(pub f64, pub f64);

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("expected lo,hi but got '{s}'")))
        };
        match parts.as_slice() {
            [a, b] => Ok(Range(parse(a)?, parse(b)?)),
            _ => Err(Error::invalid(format!("expected lo,hi but got '{s}'"))),
        }
    }
}

/// A pair of parameter names such as `theta_x,theta_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisPair(pub usize, pub usize);

impl FromStr for AxisPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let names: Vec<&str> = s.split(',').map(str::trim).collect();
        let index = |n: &str| {
            ExtrinsicParams::index_of(n).ok_or_else(|| {
                Error::invalid(format!(
                    "unknown axis '{n}' (expected one of {})",
                    ExtrinsicParams::NAMES.join(", ")
                ))
            })
        };
        match names.as_slice() {
            [a, b] => {
                let pair = AxisPair(index(a)?, index(b)?);
                if pair.0 == pair.1 {
                    return Err(Error::invalid("axes must differ"));
                }
                Ok(pair)
            }
            _ => Err(Error::invalid(format!(
                "expected two comma-separated axes, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature pairing: d2d (depth) or i2i (intensity).
    #[arg(long, default_value = "d2d")]
    pub mode: FeatureMode,
    /// Number of frames sampled uniformly from the manifest.
    #[arg(long, default_value_t = 25)]
    pub frames: usize,
    /// Histogram bins per axis.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub lidar_range: Option<Range>,
    #[arg(long)]
    pub camera_range: Option<Range>,
    #[arg(long, default_value_t = crate::mi::DEFAULT_MIN_MATCHES)]
    pub min_matches: usize,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rho_begin: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub rho_end: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_evals: usize,
    /// Interpolation points; defaults to 2n+1.
    #[arg(long)]
    pub npt: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    /// Half-width of the search box in scaled units (1 = 1 deg = 5 cm).
    #[arg(long, default_value_t = 30.0)]
    pub bound_radius: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long, default_value = "6")]
    pub dof: Dof,
    /// Initial guess: theta_x theta_y theta_z (deg) t_x t_y t_z (m).
    #[arg(long, num_args = 6, allow_negative_numbers = true, conflicts_with_all = ["delta", "error_deg"])]
    pub init: Option<Vec<f64>>,
    /// Initial guess as an offset from the manifest ground truth.
    #[arg(
        long,
        num_args = 6,
        allow_negative_numbers = true,
        conflicts_with = "error_deg"
    )]
    pub delta: Option<Vec<f64>>,
    /// Rotation error of a seeded random initial guess around the ground truth.
    #[arg(long)]
    pub error_deg: Option<f64>,
    /// Translation error of the seeded random initial guess.
    #[arg(long, default_value_t = 0.0)]
    pub error_cm: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long, default_value = "3")]
    pub dof: Dof,
    /// Rotation error levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub error_deg: Vec<f64>,
    /// Translation error levels in cm: one per rotation level, or a single value.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub error_cm: Vec<f64>,
    /// Runs per error level.
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    #[arg(long, default_value = "theta_x,theta_y")]
    pub bullseye_axes: AxisPair,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "theta_x,theta_y")]
    pub axes: AxisPair,
    /// Half-width of the grid in scaled units (1 = 1 deg = 5 cm).
    #[arg(long, default_value_t = 10.0)]
    pub range: f64,
    #[arg(long, default_value_t = 21)]
    pub steps: usize,
    /// Grid center; defaults to the manifest ground truth.
    #[arg(long, num_args = 6, allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let pool = match cli.threads {
        Some(0) => return Err(Error::invalid("--threads must be positive")),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {n} worker threads: {e}")))?,
        ),
        None => None,
    };
    let mut buf = Vec::new();
    let task = |buf: &mut Vec<u8>| match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a, buf),
        Command::Calibrate(a) => cmd_calibrate(cli, a, buf),
        Command::Evaluate(a) => cmd_evaluate(cli, a, buf),
        Command::Sweep(a) => cmd_sweep(cli, a, buf),
    };
    let result = match pool {
        Some(pool) => pool.install(|| task(&mut buf)),
        None => task(&mut buf),
    };
    out.write_all(&buf).map_err(io_out)?;
    result
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_synth(cli: &Cli, args: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let scenes = preset_sequence(&args.preset, cli.seed, args.frames)?;
    let cam = preset_camera();
    let gt = preset_ground_truth();
    let rendered = render_sequence(&scenes, &gt, &cam, cli.seed);

    let dir = &cli.out;
    for sub in ["clouds", "depth", "intensity"] {
        create_out_dir(&dir.join(sub))?;
    }
    let mut depth_entries = Vec::new();
    let mut intensity_entries = Vec::new();
    for frame in &rendered {
        let cloud_path = dir.join("clouds").join(format!("{}.bin", frame.id));
        let depth_path = dir.join("depth").join(format!("{}.dmap", frame.id));
        let intensity_path = dir.join("intensity").join(format!("{}.dmap", frame.id));
        save_pointcloud_bin(&cloud_path, &frame.cloud)?;
        save_depth_map(&depth_path, &frame.depth)?;
        save_depth_map(&intensity_path, &frame.intensity)?;
        depth_entries.push(FrameEntry {
            id: frame.id.clone(),
            cloud_path: cloud_path.clone(),
            image_path: depth_path,
        });
        intensity_entries.push(FrameEntry {
            id: frame.id.clone(),
            cloud_path,
            image_path: intensity_path,
        });
    }
    let manifest = |frames, kind| DatasetManifest {
        frames,
        camera: cam,
        ground_truth: Some(gt),
        kind,
    };
    let depth_manifest = dir.join("manifest.txt");
    let intensity_manifest = dir.join("manifest_i2i.txt");
    manifest(depth_entries, FeatureKind::MetricDepth).save(&depth_manifest)?;
    manifest(intensity_entries, FeatureKind::Intensity).save(&intensity_manifest)?;
    writeln!(
        out,
        "rendered {} frames of '{}' (seed {})\n  d2d manifest: {}\n  i2i manifest: {}",
        rendered.len(),
        args.preset,
        cli.seed,
        depth_manifest.display(),
        intensity_manifest.display()
    )
    .map_err(io_out)?;
    Ok(EXIT_OK)
}

struct Loaded {
    manifest: DatasetManifest,
    ctx: MiContext,
}

fn load_context(args: &DataArgs) -> Result<Loaded> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    match (args.mode, manifest.kind) {
        (FeatureMode::IntensityToIntensity, FeatureKind::Intensity) => {}
        (FeatureMode::DepthToDepth, FeatureKind::MetricDepth | FeatureKind::RelativeDepth) => {}
        (mode, kind) => {
            return Err(Error::invalid(format!(
                "mode {mode} cannot use a manifest of {kind} images ({})",
                args.manifest.display()
            )))
        }
    }
    let frames = sample_frames(&manifest, args.frames)?;
    let defaults = BinningConfig::default_for(args.mode, manifest.kind);
    let binning = BinningConfig::new(
        args.bins.unwrap_or(defaults.bins),
        args.lidar_range
            .map_or(defaults.lidar_range, |r| (r.0, r.1)),
        args.camera_range
            .map_or(defaults.camera_range, |r| (r.0, r.1)),
    )?;
    let ctx = MiContext::new(
        frames,
        manifest.camera,
        args.mode,
        binning,
        args.min_matches,
    )?;
    Ok(Loaded { manifest, ctx })
}

fn setup(args: &OptimizerArgs) -> CalibrationSetup {
    CalibrationSetup {
        optimizer: OptimizerConfig {
            rho_begin: args.rho_begin,
            rho_end: args.rho_end,
            max_evaluations: args.max_evals,
            interpolation_points: args.npt,
            restarts: args.restarts,
        },
        scaling: ParamScaling::default(),
        bound_radius: args.bound_radius,
    }
}

fn ground_truth(manifest: &DatasetManifest, path: &Path) -> Result<ExtrinsicParams> {
    manifest
        .ground_truth
        .ok_or_else(|| Error::invalid(format!("{} has no 'gt' line", path.display())))
}

fn six(values: &[f64]) -> ExtrinsicParams {
    ExtrinsicParams::from_array(std::array::from_fn(|i| values[i]))
}

/// Uniformly random unit vector from the seeded generator.
fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn format_params(p: &ExtrinsicParams) -> String {
    let v = p.to_array();
    let mut s = String::new();
    for (i, name) in ExtrinsicParams::NAMES.iter().enumerate() {
        let unit = if i < 3 { "deg" } else { "m" };
        s.push_str(&format!("  {name:<8} {:>12.6} {unit}\n", v[i]));
    }
    s
}

pub fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs, out: &mut dyn Write) -> Result<i32> {
    let Loaded { manifest, ctx } = load_context(&args.data)?;
    let initial = if let Some(v) = &args.init {
        six(v)
    } else if let Some(v) = &args.delta {
        ground_truth(&manifest, &args.data.manifest)?.add(&six(v))
    } else if let Some(deg) = args.error_deg {
        let gt = ground_truth(&manifest, &args.data.manifest)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        let r = random_direction(&mut rng) * deg;
        let t = random_direction(&mut rng) * args.error_cm / 100.0;
        gt.add(&ExtrinsicParams::new([r.x, r.y, r.z], [t.x, t.y, t.z]))
    } else {
        return Err(Error::invalid(
            "an initial guess is required: --init, --delta or --error-deg",
        ));
    };
    let cal = calibrate(&ctx, &initial, args.dof, &setup(&args.optimizer))?;

    create_out_dir(&cli.out)?;
    let result_path = cli.out.join("result.csv");
    write_file(&result_path, |w| {
        writeln!(
            w,
            "{},mi,evaluations,termination",
            ExtrinsicParams::NAMES.join(",")
        )?;
        let v: Vec<String> = cal
            .params
            .to_array()
            .iter()
            .map(|x| x.to_string())
            .collect();
        writeln!(
            w,
            "{},{},{},{}",
            v.join(","),
            cal.result.best_value,
            cal.result.evaluations_used,
            cal.result.termination
        )
    })?;
    let hist_path = cli.out.join("histogram.csv");
    if let Ok(Some(h)) = ctx.frame_histogram(&params_to_transform(&cal.params), 0) {
        write_file(&hist_path, |w| h.write_csv(w))?;
    }

    write!(out, "initial guess\n{}", format_params(&initial)).map_err(io_out)?;
    write!(out, "optimized\n{}", format_params(&cal.params)).map_err(io_out)?;
    writeln!(
        out,
        "mi {}\nevaluations {} ({})\nresult written to {}",
        cal.result.best_value,
        cal.result.evaluations_used,
        cal.result.termination,
        result_path.display()
    )
    .map_err(io_out)?;
    if let Some(gt) = manifest.ground_truth {
        let hit = crate::experiments::hit_metric(&cal.params, &gt);
        writeln!(out, "ground truth hit: {}", if hit { "yes" } else { "no" }).map_err(io_out)?;
    }
    if cal.result.best_value <= DEGENERATE_OBJECTIVE {
        writeln!(out, "degenerate objective: no frame has enough matches").map_err(io_out)?;
        return Ok(EXIT_DEGENERATE);
    }
    Ok(EXIT_OK)
}

fn level_label(deg: f64, cm: f64) -> String {
    format!("{deg}deg_{cm}cm")
}

pub fn cmd_evaluate(_cli: &Cli, args: &EvaluateArgs, out: &mut dyn Write) -> Result<i32> {
    if args.runs == 0 {
        return Err(Error::invalid("--runs must be at least 1"));
    }
    let cms: Vec<f64> = match (args.error_cm.len(), args.error_deg.len()) {
        (1, n) => vec![args.error_cm[0]; n],
        (a, b) if a == b => args.error_cm.clone(),
        (a, b) => {
            return Err(Error::invalid(format!(
                "--error-cm has {a} levels but --error-deg has {b}"
            )))
        }
    };
    let Loaded { manifest, ctx } = load_context(&args.data)?;
    let gt = ground_truth(&manifest, &args.data.manifest)?;
    let setup = setup(&args.optimizer);
    create_out_dir(&_cli.out)?;

    let mut rows = Vec::new();
    for (&deg, &cm) in args.error_deg.iter().zip(&cms) {
        let batch = generate_perturbations(args.dof, deg, cm / 100.0, args.runs)?;
        let records = run_batch(&ctx, &gt, &batch, &setup, args.dof);
        let label = level_label(deg, cm);
        write_file(&_cli.out.join(format!("records_{label}.csv")), |w| {
            write_records_csv(&records, w)
        })?;
        let bull = emit_bullseye(&records, (args.bullseye_axes.0, args.bullseye_axes.1))?;
        write_file(&_cli.out.join(format!("bullseye_{label}.csv")), |w| {
            bull.write_csv(w)
        })?;
        write_file(&_cli.out.join(format!("bullseye_{label}.svg")), |w| {
            w.write_all(bull.to_svg().as_bytes())
        })?;
        let stats = batch_statistics(&records);
        writeln!(
            out,
            "{deg} deg / {cm} cm, {}-DoF: {}/{} hits ({:.1}%)",
            args.dof,
            stats.hits,
            stats.runs,
            100.0 * stats.hit_rate
        )
        .map_err(io_out)?;
        rows.push(LevelStatistics {
            rotation_deg: deg,
            translation_m: batch.translation_magnitude,
            dof: args.dof,
            stats,
        });
    }
    let stats_path = _cli.out.join("statistics.csv");
    write_file(&stats_path, |w| write_statistics_csv(&rows, w))?;
    writeln!(out, "statistics written to {}", stats_path.display()).map_err(io_out)?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(cli: &Cli, args: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    if args.steps < 2 {
        return Err(Error::invalid(format!(
            "--steps must be at least 2, got {}",
            args.steps
        )));
    }
    let Loaded { manifest, ctx } = load_context(&args.data)?;
    let center = match &args.center {
        Some(v) => six(v),
        None => ground_truth(&manifest, &args.data.manifest)?,
    };
    let grid = mi_surface_sweep(
        &ctx,
        &center,
        (args.axes.0, args.axes.1),
        args.range,
        args.steps,
        &ParamScaling::default(),
    )?;
    create_out_dir(&cli.out)?;
    let csv = cli.out.join("sweep.csv");
    write_file(&csv, |w| grid.write_csv(w))?;
    write_file(&cli.out.join("sweep.svg"), |w| {
        w.write_all(grid.to_svg().as_bytes())
    })?;
    let (i, j) = grid.argmax();
    writeln!(
        out,
        "argmax at d_{} = {}, d_{} = {} (mi {})\nsweep written to {}",
        ExtrinsicParams::NAMES[args.axes.0],
        grid.offsets[i],
        ExtrinsicParams::NAMES[args.axes.1],
        grid.offsets[j],
        grid.value(i, j),
        csv.display()
    )
    .map_err(io_out)?;
    if grid.values.iter().all(|v| *v <= DEGENERATE_OBJECTIVE) {
        return Ok(EXIT_DEGENERATE);
    }
    Ok(EXIT_OK)
}
