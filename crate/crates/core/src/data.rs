//! Dataset ingestion: KITTI Velodyne scans, DMAP feature images, the
//! line-oriented dataset manifest and uniform frame sampling.
//!
//! DMAP layout (little endian): `b"DMAP"`, `u32` width, `u32` height, `u8`
//! kind (0 metric depth, 1 relative depth, 2 intensity), then
//! `width * height` row-major `f32` values. NaN marks an invalid pixel.
//!
//! Manifest grammar, one directive per line, `#` starts a comment:
//!
//! ```text
//! camera pinhole <fx> <fy> <cx> <cy> <w> <h>
//! camera double_sphere <fx> <fy> <cx> <cy> <xi> <alpha> <w> <h>
//! kind metric|relative|intensity
//! gt <θx°> <θy°> <θz°> <tx m> <ty m> <tz m>
//! frame <id> <cloud_path> <image_path>
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{FeatureImage, FeatureKind, Frame, PointCloud};
use crate::geometry::{CameraModel, ExtrinsicParams, Projection, Vec3};

const POINT_RECORD_BYTES: usize = 16;
const DMAP_MAGIC: &[u8; 4] = b"DMAP";
const DMAP_HEADER_BYTES: usize = 13;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A parsed scan plus the number of records dropped for non-finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub skipped: usize,
}

pub fn load_pointcloud_bin(path: impl AsRef<Path>) -> Result<LoadedCloud> {
    let path = path.as_ref();
    parse_pointcloud_bin(&read_bytes(path)?, path)
}

/// Parses little-endian `f32` quadruples `(x, y, z, intensity)`.
pub fn parse_pointcloud_bin(bytes: &[u8], path: &Path) -> Result<LoadedCloud> {
    let whole = bytes.len() / POINT_RECORD_BYTES * POINT_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: whole as u64,
            message: format!(
                "truncated point record: {} trailing bytes",
                bytes.len() - whole
            ),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / POINT_RECORD_BYTES);
    let mut intensity = Vec::with_capacity(points.capacity());
    let mut skipped = 0;
    for record in bytes.chunks_exact(POINT_RECORD_BYTES) {
        let v: [f32; 4] = std::array::from_fn(|i| {
            f32::from_le_bytes(record[4 * i..4 * i + 4].try_into().expect("4-byte slice"))
        });
        if v.iter().any(|c| !c.is_finite()) {
            skipped += 1;
            continue;
        }
        points.push(Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64));
        intensity.push((v[3] as f64).clamp(0.0, 1.0));
    }
    Ok(LoadedCloud {
        cloud: PointCloud {
            points,
            intensity: Some(intensity),
        },
        skipped,
    })
}

/// Serializes a cloud in the Velodyne layout; missing intensity is written as 0.
pub fn encode_pointcloud_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_RECORD_BYTES);
    for (i, p) in cloud.points.iter().enumerate() {
        let intensity = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
        for c in [p.x, p.y, p.z, intensity] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_pointcloud_bin(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pointcloud_bin(cloud))
}

pub fn load_depth_map(path: impl AsRef<Path>) -> Result<FeatureImage> {
    let path = path.as_ref();
    parse_depth_map(&read_bytes(path)?, path)
}

pub fn parse_depth_map(bytes: &[u8], path: &Path) -> Result<FeatureImage> {
    let fail = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < DMAP_HEADER_BYTES {
        return Err(fail(
            bytes.len(),
            format!(
                "header needs {DMAP_HEADER_BYTES} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != DMAP_MAGIC {
        return Err(fail(0, "bad magic, expected \"DMAP\"".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let kind = FeatureKind::from_code(bytes[12])
        .ok_or_else(|| fail(12, format!("unknown kind code {}", bytes[12])))?;
    let count = width as usize * height as usize;
    let expected = DMAP_HEADER_BYTES + 4 * count;
    if bytes.len() != expected {
        return Err(fail(
            bytes.len().min(expected),
            format!(
                "{width}x{height} map needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let values = bytes[DMAP_HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FeatureImage::new(width, height, kind, values)
}

pub fn encode_depth_map(image: &FeatureImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(DMAP_HEADER_BYTES + 4 * image.values.len());
    out.extend_from_slice(DMAP_MAGIC);
    out.extend_from_slice(&image.width.to_le_bytes());
    out.extend_from_slice(&image.height.to_le_bytes());
    out.push(image.kind.code());
    for v in &image.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_depth_map(path: impl AsRef<Path>, image: &FeatureImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_depth_map(image))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub id: String,
    pub cloud_path: PathBuf,
    pub image_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub frames: Vec<FrameEntry>,
    pub camera: CameraModel,
    pub ground_truth: Option<ExtrinsicParams>,
    pub kind: FeatureKind,
}

impl DatasetManifest {
    /// Parses a manifest and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let manifest = Self::parse(&text, base, path)?;
        for entry in &manifest.frames {
            for p in [&entry.cloud_path, &entry.image_path] {
                if !p.exists() {
                    return Err(Error::io(
                        p.clone(),
                        std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "referenced file not found",
                        ),
                    ));
                }
            }
        }
        Ok(manifest)
    }

    /// Parses manifest text; `source` only labels errors.
    pub fn parse(text: &str, base: &Path, source: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Manifest {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut frames = Vec::new();
        let mut camera = None;
        let mut ground_truth = None;
        let mut kind = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let numbers = |from: usize, count: usize, what: &str| -> Result<Vec<f64>> {
                let args = &tokens[from..];
                if args.len() != count {
                    return Err(err(
                        line_no,
                        format!("{what} expects {count} values, found {}", args.len()),
                    ));
                }
                args.iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| {
                                err(line_no, format!("{what}: '{t}' is not a finite number"))
                            })
                    })
                    .collect()
            };
            let dims = |w: f64, h: f64| -> Result<(u32, u32)> {
                let ok = |v: f64| v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64;
                if ok(w) && ok(h) {
                    Ok((w as u32, h as u32))
                } else {
                    Err(err(
                        line_no,
                        format!("image size {w}x{h} must be positive integers"),
                    ))
                }
            };
            match tokens[0] {
                "frame" => {
                    if tokens.len() != 4 {
                        return Err(err(
                            line_no,
                            "frame expects <id> <cloud_path> <image_path>".into(),
                        ));
                    }
                    frames.push(FrameEntry {
                        id: tokens[1].to_string(),
                        cloud_path: base.join(tokens[2]),
                        image_path: base.join(tokens[3]),
                    });
                }
                "camera" => {
                    let model = tokens.get(1).copied().unwrap_or("");
                    let cam = match model {
                        "pinhole" => {
                            let v = numbers(2, 6, "camera pinhole")?;
                            let (w, h) = dims(v[4], v[5])?;
                            CameraModel::pinhole(v[0], v[1], v[2], v[3], w, h)
                        }
                        "double_sphere" => {
                            let v = numbers(2, 8, "camera double_sphere")?;
                            let (w, h) = dims(v[6], v[7])?;
                            CameraModel::double_sphere(v[0], v[1], v[2], v[3], v[4], v[5], w, h)
                        }
                        other => {
                            return Err(err(
                                line_no,
                                format!(
                                    "unknown camera model '{other}' (pinhole or double_sphere)"
                                ),
                            ))
                        }
                    }
                    .map_err(|e| err(line_no, e.to_string()))?;
                    camera = Some(cam);
                }
                "gt" => {
                    let v = numbers(1, 6, "gt")?;
                    ground_truth =
                        Some(ExtrinsicParams::from_array(v.try_into().expect("6 values")));
                }
                "kind" => {
                    let k = tokens
                        .get(1)
                        .ok_or_else(|| err(line_no, "kind expects a value".into()))?;
                    kind = Some(k.parse().map_err(|e: Error| err(line_no, e.to_string()))?);
                }
                other => return Err(err(line_no, format!("unknown directive '{other}'"))),
            }
        }
        let camera = camera.ok_or_else(|| err(0, "missing camera directive".into()))?;
        if frames.is_empty() {
            return Err(err(0, "manifest lists no frames".into()));
        }
        Ok(Self {
            frames,
            camera,
            ground_truth,
            kind: kind.unwrap_or(FeatureKind::MetricDepth),
        })
    }

    /// Manifest text; paths are written relative to `base` when possible.
    pub fn to_text(&self, base: &Path) -> String {
        let mut out = String::new();
        let c = &self.camera;
        match c.projection {
            Projection::Pinhole => writeln!(
                out,
                "camera pinhole {} {} {} {} {} {}",
                c.fx, c.fy, c.cx, c.cy, c.width, c.height
            ),
            Projection::DoubleSphere { xi, alpha } => writeln!(
                out,
                "camera double_sphere {} {} {} {} {} {} {} {}",
                c.fx, c.fy, c.cx, c.cy, xi, alpha, c.width, c.height
            ),
        }
        .expect("writing to a String");
        writeln!(out, "kind {}", self.kind).expect("writing to a String");
        if let Some(gt) = &self.ground_truth {
            let v: Vec<String> = gt.to_array().iter().map(|x| x.to_string()).collect();
            writeln!(out, "gt {}", v.join(" ")).expect("writing to a String");
        }
        for f in &self.frames {
            let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
            writeln!(
                out,
                "frame {} {} {}",
                f.id,
                rel(&f.cloud_path),
                rel(&f.image_path)
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        write_bytes(path, self.to_text(base).as_bytes())
    }

    /// Loads the frames at `indices`, checking image dimensions and kind.
    pub fn load_frames(&self, indices: &[usize]) -> Result<Vec<Frame>> {
        indices
            .iter()
            .map(|&i| {
                let entry = self.frames.get(i).ok_or_else(|| {
                    Error::invalid(format!(
                        "frame index {i} out of range ({})",
                        self.frames.len()
                    ))
                })?;
                let cloud = load_pointcloud_bin(&entry.cloud_path)?.cloud;
                let image = load_depth_map(&entry.image_path)?;
                if image.width != self.camera.width || image.height != self.camera.height {
                    return Err(Error::invalid(format!(
                        "{}: image is {}x{} but the camera is {}x{}",
                        entry.image_path.display(),
                        image.width,
                        image.height,
                        self.camera.width,
                        self.camera.height
                    )));
                }
                if image.kind != self.kind {
                    return Err(Error::invalid(format!(
                        "{}: image kind {} differs from manifest kind {}",
                        entry.image_path.display(),
                        image.kind,
                        self.kind
                    )));
                }
                Ok(Frame {
                    id: entry.id.clone(),
                    cloud,
                    image,
                })
            })
            .collect()
    }
}

/// Indices of `n` frames spread uniformly over `total`: `round(i (L-1) / (n-1))`.
pub fn uniform_indices(total: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("frame count must be positive"));
    }
    if n > total {
        return Err(Error::invalid(format!(
            "cannot sample {n} frames from a sequence of {total}"
        )));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    Ok((0..n)
        .map(|i| (i as f64 * (total - 1) as f64 / (n - 1) as f64).round() as usize)
        .collect())
}

pub fn sample_frames(manifest: &DatasetManifest, n: usize) -> Result<Vec<Frame>> {
    manifest.load_frames(&uniform_indices(manifest.frames.len(), n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn single_point_record() {
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let loaded = parse_pointcloud_bin(&bytes, p()).unwrap();
        assert_eq!(loaded.cloud.points, vec![Vec3::new(1.0, 2.0, 3.0)]);
        assert_eq!(loaded.cloud.intensity, Some(vec![0.5]));
        assert_eq!(loaded.skipped, 0);
    }

    #[test]
    fn empty_file_is_empty_cloud() {
        let loaded = parse_pointcloud_bin(&[], p()).unwrap();
        assert!(loaded.cloud.is_empty());
    }

    #[test]
    fn truncated_file_reports_offset() {
        let bytes = vec![0u8; 35];
        match parse_pointcloud_bin(&bytes, p()) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 32),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_records_are_skipped_and_counted() {
        let mut bytes = Vec::new();
        for v in [1.0f32, f32::NAN, 3.0, 0.5, 4.0, 5.0, 6.0, 7.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let loaded = parse_pointcloud_bin(&bytes, p()).unwrap();
        assert_eq!(loaded.skipped, 1);
        assert_eq!(loaded.cloud.points, vec![Vec3::new(4.0, 5.0, 6.0)]);
        // intensity is clamped into [0, 1]
        assert_eq!(loaded.cloud.intensity, Some(vec![1.0]));
    }

    #[test]
    fn random_cloud_round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bytes = Vec::new();
        for _ in 0..1000 {
            for v in [
                rng.gen_range(-80.0f32..80.0),
                rng.gen_range(-80.0f32..80.0),
                rng.gen_range(-3.0f32..3.0),
                rng.gen_range(0.0f32..1.0),
            ] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let cloud = parse_pointcloud_bin(&bytes, p()).unwrap().cloud;
        assert_eq!(cloud.len(), 1000);
        assert_eq!(encode_pointcloud_bin(&cloud), bytes);
    }

    #[test]
    fn two_pixel_map() {
        let img = FeatureImage::new(2, 1, FeatureKind::MetricDepth, vec![1.5, f32::NAN]).unwrap();
        let loaded = parse_depth_map(&encode_depth_map(&img), p()).unwrap();
        assert_eq!((loaded.width, loaded.height), (2, 1));
        assert_eq!(loaded.get(0, 0), Some(1.5));
        assert!(!loaded.is_valid(1, 0));
    }

    #[test]
    fn header_only_map_is_rejected() {
        let img = FeatureImage::filled(3, 2, FeatureKind::MetricDepth, 1.0);
        let bytes = encode_depth_map(&img);
        assert!(matches!(
            parse_depth_map(&bytes[..DMAP_HEADER_BYTES], p()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn bad_magic_and_kind_are_rejected() {
        let img = FeatureImage::filled(3, 2, FeatureKind::Intensity, 0.5);
        let mut bytes = encode_depth_map(&img);
        bytes[12] = 9;
        assert!(matches!(
            parse_depth_map(&bytes, p()),
            Err(Error::Format { offset: 12, .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(
            parse_depth_map(&bytes, p()),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(parse_depth_map(b"DMA", p()).is_err());
    }

    #[test]
    fn random_map_round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let values = (0..64 * 48)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    f32::NAN
                } else {
                    rng.gen_range(0.0f32..80.0)
                }
            })
            .collect();
        let img = FeatureImage::new(64, 48, FeatureKind::RelativeDepth, values).unwrap();
        let bytes = encode_depth_map(&img);
        let back = parse_depth_map(&bytes, p()).unwrap();
        assert_eq!(encode_depth_map(&back), bytes);
    }

    fn index_oracle(total: usize, n: usize) -> Vec<usize> {
        // exact integer round-half-up of i (L-1) / (n-1)
        (0..n)
            .map(|i| (2 * i * (total - 1) + (n - 1)) / (2 * (n - 1)))
            .collect()
    }

    #[test]
    fn uniform_sampling_examples() {
        let idx = uniform_indices(100, 25).unwrap();
        assert_eq!(idx, index_oracle(100, 25));
        assert_eq!(idx[0], 0);
        assert_eq!(idx[1], 4);
        assert_eq!(idx[2], 8);
        assert_eq!(*idx.last().unwrap(), 99);
        assert_eq!(uniform_indices(7, 7).unwrap(), (0..7).collect::<Vec<_>>());
        assert_eq!(uniform_indices(7, 1).unwrap(), vec![0]);
        assert!(uniform_indices(5, 6).is_err());
        assert!(uniform_indices(5, 0).is_err());
    }

    #[test]
    fn manifest_parses_all_directives() {
        let text = "\
# demo
camera double_sphere 300 300 320 240 -0.2 0.6 640 480
kind relative
gt 90 0 90 0.1 -0.2 0.3
frame a clouds/a.bin images/a.dmap
frame b /abs/b.bin images/b.dmap  # trailing comment
";
        let m = DatasetManifest::parse(text, Path::new("/data"), Path::new("m.txt")).unwrap();
        assert_eq!(m.frames.len(), 2);
        assert_eq!(m.frames[0].cloud_path, PathBuf::from("/data/clouds/a.bin"));
        assert_eq!(m.frames[1].cloud_path, PathBuf::from("/abs/b.bin"));
        assert_eq!(m.kind, FeatureKind::RelativeDepth);
        assert_eq!(
            m.ground_truth,
            Some(ExtrinsicParams::new([90.0, 0.0, 90.0], [0.1, -0.2, 0.3]))
        );
        assert!(matches!(
            m.camera.projection,
            Projection::DoubleSphere { xi, alpha } if xi == -0.2 && alpha == 0.6
        ));
        let again = DatasetManifest::parse(
            &m.to_text(Path::new("/data")),
            Path::new("/data"),
            Path::new("m"),
        )
        .unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn manifest_errors_name_the_line() {
        let cases = [
            ("camera pinhole 1 1 0 0 10\nframe a x y\n", 1),
            ("camera pinhole 1 1 0 0 10 10\nframe a x\n", 2),
            ("camera fisheye 1 1 0 0 10 10\n", 1),
            ("camera pinhole 1 1 0 0 10 10\nkind depth\nframe a x y\n", 2),
            ("camera pinhole 1 1 0 0 10 10\ngt 1 2 3\nframe a x y\n", 2),
            ("camera pinhole -1 1 0 0 10 10\nframe a x y\n", 1),
            ("camera pinhole 1 1 0 0 10 10\nbogus\n", 2),
        ];
        for (text, line) in cases {
            match DatasetManifest::parse(text, Path::new("."), Path::new("m")) {
                Err(Error::Manifest { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(DatasetManifest::parse("frame a x y\n", Path::new("."), Path::new("m")).is_err());
    }

    #[test]
    fn missing_files_are_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("m.txt");
        fs::write(
            &manifest,
            "camera pinhole 1 1 0 0 4 4\nframe a nope.bin nope.dmap\n",
        )
        .unwrap();
        let err = DatasetManifest::load(&manifest).unwrap_err();
        assert!(err.to_string().contains("nope.bin"), "{err}");
    }
}
