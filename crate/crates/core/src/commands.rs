//! Directory-level pipeline stages behind the `flowmask` binary.
//!
//! Every stage reads numbered files from a directory and orders them by file
//! name (plain byte-wise lexicographic order), so `frame_000010` sorts after
//! `frame_000009` only when names are zero-padded.

use std::ffi::{OsStr, OsString};
use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::flow_io::{parse_flo_with, write_flo, FlowField, ParseOptions};
use crate::image_io::{
    mask_from_image, mask_to_image, read_pgm, read_png_gray, write_pgm, BinaryMask,
    GrayscaleImage,
};
use crate::magnitude::{magnitude_method, threshold_sweep, MagnitudeParams, SweepRow};
use crate::metrics::{
    confusion, fmt_real, write_report_csv, write_report_json, ClipReport, FrameMetrics,
    SummaryTable,
};
use crate::reference_flow::{estimate_clip_flows, HsParams};
use crate::segmentation::{artifact_candidates, combine_masks, ArtifactRegion, Connectivity};
use crate::visualization::{
    colorize_confusion, colorize_flow, colorize_flow_fixed_scale, write_png_rgb, write_ppm,
    RgbImage,
};

/// Environment variable naming the FFmpeg binary.
pub const FFMPEG_ENV: &str = "FLOWMASK_FFMPEG";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ImageFormat {
    #[default]
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn gray_extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }

    pub fn rgb_extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "ppm",
            ImageFormat::Png => "png",
        }
    }
}

/// Sorted regular files in `dir` whose extension is one of `exts`.
pub fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let matches = path
            .extension()
            .and_then(OsStr::to_str)
            .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if path.is_file() && matches {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn list_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(dirs)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(OsStr::to_str)
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads a PGM or PNG (by extension) as grayscale.
pub fn read_gray_file(path: &Path) -> Result<GrayscaleImage> {
    let bytes = read_bytes(path)?;
    let decoded = if is_png(path) {
        read_png_gray(&bytes)
    } else {
        read_pgm(&bytes)
    };
    decoded.map_err(|e| e.in_file(path))
}

pub fn read_mask_file(path: &Path, cutoff: u8) -> Result<BinaryMask> {
    Ok(mask_from_image(&read_gray_file(path)?, cutoff))
}

pub fn read_flo_file(path: &Path, opts: ParseOptions) -> Result<FlowField> {
    parse_flo_with(&read_bytes(path)?, opts).map_err(|e| e.in_file(path))
}

fn write_rgb(path_no_ext: &Path, image: &RgbImage, format: ImageFormat) -> Result<()> {
    let path = path_no_ext.with_extension(format.rgb_extension());
    let bytes = match format {
        ImageFormat::Pgm => write_ppm(image),
        ImageFormat::Png => write_png_rgb(image)?,
    };
    write_bytes(&path, &bytes)
}

// ---- extract ----

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub video: PathBuf,
    pub out_dir: PathBuf,
    pub fps: Option<f64>,
    pub format: ImageFormat,
    /// Binary to run; [`ffmpeg_binary`] when `None`.
    pub ffmpeg: Option<OsString>,
}

/// `$FLOWMASK_FFMPEG`, or `ffmpeg` from the search path.
pub fn ffmpeg_binary() -> OsString {
    std::env::var_os(FFMPEG_ENV).unwrap_or_else(|| "ffmpeg".into())
}

/// Arguments passed to FFmpeg for frame extraction.
pub fn ffmpeg_args(opts: &ExtractOptions) -> Vec<OsString> {
    let filter = match opts.fps {
        Some(fps) => format!("fps={fps},format=gray"),
        None => "format=gray".to_string(),
    };
    let pattern = opts
        .out_dir
        .join(format!("frame_%06d.{}", opts.format.gray_extension()));
    let mut args: Vec<OsString> = ["-hide_banner", "-loglevel", "error", "-nostdin", "-y", "-i"]
        .iter()
        .map(OsString::from)
        .collect();
    args.push(opts.video.clone().into());
    args.extend(["-vf".into(), filter.into(), "-start_number".into(), "0".into()]);
    args.push(pattern.into());
    args
}

/// Splits a video into numbered grayscale frames with an external FFmpeg.
pub fn cmd_extract(opts: &ExtractOptions) -> Result<Vec<PathBuf>> {
    if let Some(fps) = opts.fps {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter(format!("fps must be positive, got {fps}")));
        }
    }
    ensure_dir(&opts.out_dir)?;
    let binary = opts.ffmpeg.clone().unwrap_or_else(ffmpeg_binary);
    let output = Command::new(&binary)
        .args(ffmpeg_args(opts))
        .output()
        .map_err(|e| match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied => Error::FfmpegNotFound {
                binary: binary.to_string_lossy().into_owned(),
            },
            _ => Error::io(PathBuf::from(&binary), e),
        })?;
    if !output.status.success() {
        let diagnostics = String::from_utf8_lossy(&output.stderr).trim().replace('\n', " | ");
        return Err(Error::FfmpegFailed {
            status: output.status.to_string(),
            diagnostics,
        });
    }
    list_files(&opts.out_dir, &[opts.format.gray_extension()])
}

// ---- flow ----

#[derive(Debug, Clone)]
pub enum FlowEngine {
    /// Re-validate precomputed `.flo` files.
    File,
    HornSchunck(HsParams),
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub input_dir: PathBuf,
    pub out_dir: PathBuf,
    pub engine: FlowEngine,
    pub sanitize_nonfinite: bool,
}

/// Writes one `.flo` per consecutive frame pair, named after the pair's first
/// frame. The file engine copies validated fields through under their names.
pub fn cmd_flow(opts: &FlowOptions) -> Result<Vec<PathBuf>> {
    ensure_dir(&opts.out_dir)?;
    let mut written = Vec::new();
    match &opts.engine {
        FlowEngine::File => {
            let parse = ParseOptions {
                sanitize_nonfinite: opts.sanitize_nonfinite,
            };
            let files = list_files(&opts.input_dir, &["flo"])?;
            if files.is_empty() {
                return Err(Error::EmptyClip);
            }
            for path in files {
                let field = read_flo_file(&path, parse)?;
                let out = opts.out_dir.join(format!("{}.flo", stem(&path)));
                write_bytes(&out, &write_flo(&field))?;
                written.push(out);
            }
        }
        FlowEngine::HornSchunck(params) => {
            let files = list_files(&opts.input_dir, &["pgm", "png"])?;
            if files.len() < 2 {
                return Err(Error::EmptyClip);
            }
            let frames = files
                .iter()
                .map(|p| read_gray_file(p))
                .collect::<Result<Vec<_>>>()?;
            let flows = estimate_clip_flows(&frames, params)?;
            for (path, field) in files.iter().zip(&flows) {
                let out = opts.out_dir.join(format!("{}.flo", stem(path)));
                write_bytes(&out, &write_flo(field))?;
                written.push(out);
            }
        }
    }
    Ok(written)
}

// ---- mask ----

#[derive(Debug, Clone)]
pub struct MaskOptions {
    pub flows_dir: PathBuf,
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub sanitize_nonfinite: bool,
}

/// Applies the magnitude method to every flow file; returns
/// `(frame name, member count)` per written mask.
pub fn cmd_mask(opts: &MaskOptions) -> Result<Vec<(String, usize)>> {
    let params = MagnitudeParams::new(opts.threshold)?;
    let parse = ParseOptions {
        sanitize_nonfinite: opts.sanitize_nonfinite,
    };
    let files = list_files(&opts.flows_dir, &["flo"])?;
    if files.is_empty() {
        return Err(Error::EmptyClip);
    }
    ensure_dir(&opts.out_dir)?;
    let mut counts = Vec::with_capacity(files.len());
    for path in files {
        let mask = magnitude_method(&read_flo_file(&path, parse)?, params);
        let name = stem(&path);
        write_bytes(
            &opts.out_dir.join(format!("{name}.pgm")),
            &write_pgm(&mask_to_image(&mask)),
        )?;
        counts.push((name, mask.count()));
    }
    Ok(counts)
}

// ---- eval ----

/// Loads frame-level segmentation masks from `dir`.
///
/// Either `dir` holds one mask image per frame, or one subdirectory per
/// frame holding per-object masks that are OR-ed together. A frame
/// subdirectory with no masks yields an empty mask of `dims`.
pub fn load_segmentation(
    dir: &Path,
    cutoff: u8,
    dims: Option<(usize, usize)>,
) -> Result<Vec<(String, BinaryMask)>> {
    let subdirs = list_subdirs(dir)?;
    if subdirs.is_empty() {
        return list_files(dir, &["pgm", "png"])?
            .iter()
            .map(|p| Ok((stem(p), read_mask_file(p, cutoff)?)))
            .collect();
    }
    subdirs
        .iter()
        .map(|sub| {
            let objects = list_files(sub, &["pgm", "png"])?
                .iter()
                .map(|p| read_mask_file(p, cutoff))
                .collect::<Result<Vec<_>>>()?;
            let frame_dims = objects
                .first()
                .map(BinaryMask::dims)
                .or(dims)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "{} has no masks and no reference dimensions",
                        sub.display()
                    ))
                })?;
            let name = sub
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, combine_masks(frame_dims, &objects)?))
        })
        .collect()
}

/// Pairs ground-truth frame `i` with segmentation frame `i`. One trailing
/// segmentation frame is dropped: the last frame of a clip has no successor
/// and therefore no flow mask.
fn pair_frames<T>(truth: usize, mut seg: Vec<T>) -> Result<Vec<T>> {
    if seg.len() == truth + 1 {
        seg.pop();
    }
    if seg.len() != truth {
        return Err(Error::LengthMismatch {
            left: truth,
            right: seg.len(),
        });
    }
    Ok(seg)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub flow_masks_dir: PathBuf,
    pub seg_masks_dir: PathBuf,
    pub out_dir: PathBuf,
    pub clip_name: Option<String>,
    pub min_artifact_area: usize,
    pub connectivity: Connectivity,
    pub mask_cutoff: u8,
    pub csv: bool,
    pub json: bool,
    pub render_confusion: bool,
    /// Flow files to render as colour-wheel images.
    pub flows_dir: Option<PathBuf>,
    pub fixed_scale: Option<f64>,
    pub image_format: ImageFormat,
    pub sanitize_nonfinite: bool,
}

impl EvalOptions {
    pub fn new(flow_masks_dir: PathBuf, seg_masks_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            flow_masks_dir,
            seg_masks_dir,
            out_dir,
            clip_name: None,
            min_artifact_area: 1,
            connectivity: Connectivity::Eight,
            mask_cutoff: crate::image_io::DEFAULT_MASK_CUTOFF,
            csv: true,
            json: true,
            render_confusion: false,
            flows_dir: None,
            fixed_scale: None,
            image_format: ImageFormat::Pgm,
            sanitize_nonfinite: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: ClipReport,
    /// Per evaluated frame: its name and artifact regions.
    pub artifacts: Vec<(String, Vec<ArtifactRegion>)>,
}

pub const ARTIFACT_CSV_HEADER: &str =
    "frame,name,region,area,min_x,min_y,max_x,max_y,centroid_x,centroid_y";

pub fn write_artifacts_csv(artifacts: &[(String, Vec<ArtifactRegion>)]) -> Vec<u8> {
    let mut s = String::from(ARTIFACT_CSV_HEADER);
    s.push('\n');
    for (i, (name, regions)) in artifacts.iter().enumerate() {
        for (k, r) in regions.iter().enumerate() {
            let b = &r.bounding_box;
            let _ = writeln!(
                s,
                "{i},{name},{k},{},{},{},{},{},{},{}",
                r.area,
                b.min_x,
                b.min_y,
                b.max_x,
                b.max_y,
                fmt_real(r.centroid.0),
                fmt_real(r.centroid.1)
            );
        }
    }
    s.into_bytes()
}

fn default_clip_name(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "clip".to_string())
}

/// Scores segmentation masks against flow masks frame by frame and writes
/// `report.csv`, `report.json`, `artifacts.csv` and optional renderings.
pub fn cmd_eval(opts: &EvalOptions) -> Result<EvalOutput> {
    let truth_files = list_files(&opts.flow_masks_dir, &["pgm", "png"])?;
    if truth_files.is_empty() {
        return Err(Error::EmptyClip);
    }
    let truths = truth_files
        .iter()
        .map(|p| read_mask_file(p, opts.mask_cutoff))
        .collect::<Result<Vec<_>>>()?;
    let segs = load_segmentation(&opts.seg_masks_dir, opts.mask_cutoff, Some(truths[0].dims()))?;
    let segs = pair_frames(truths.len(), segs)?;

    let clip_name = opts
        .clip_name
        .clone()
        .unwrap_or_else(|| default_clip_name(&opts.seg_masks_dir));
    ensure_dir(&opts.out_dir)?;
    let confusion_dir = opts.out_dir.join("confusion");
    if opts.render_confusion {
        ensure_dir(&confusion_dir)?;
    }

    let mut frames = Vec::with_capacity(truths.len());
    let mut artifacts = Vec::with_capacity(truths.len());
    for (i, ((truth, truth_path), (_, seg))) in truths.iter().zip(&truth_files).zip(&segs).enumerate() {
        let (counts, map) = confusion(truth, seg).map_err(|e| e.in_file(truth_path))?;
        frames.push(FrameMetrics::from_counts(i, counts));
        let name = stem(truth_path);
        let regions = artifact_candidates(seg, truth, opts.min_artifact_area, opts.connectivity)?;
        if opts.render_confusion {
            write_rgb(&confusion_dir.join(&name), &colorize_confusion(&map), opts.image_format)?;
        }
        artifacts.push((name, regions));
    }
    let report = ClipReport::from_frames(clip_name, frames)?;

    if opts.csv {
        write_bytes(&opts.out_dir.join("report.csv"), &write_report_csv(&report))?;
    }
    if opts.json {
        write_bytes(&opts.out_dir.join("report.json"), &write_report_json(&report))?;
    }
    write_bytes(&opts.out_dir.join("artifacts.csv"), &write_artifacts_csv(&artifacts))?;

    if let Some(flows_dir) = &opts.flows_dir {
        let vis_dir = opts.out_dir.join("flow_vis");
        ensure_dir(&vis_dir)?;
        let parse = ParseOptions {
            sanitize_nonfinite: opts.sanitize_nonfinite,
        };
        for path in list_files(flows_dir, &["flo"])? {
            let field = read_flo_file(&path, parse)?;
            let image = match opts.fixed_scale {
                Some(scale) => colorize_flow_fixed_scale(&field, scale)?,
                None => colorize_flow(&field),
            };
            write_rgb(&vis_dir.join(stem(&path)), &image, opts.image_format)?;
        }
    }

    Ok(EvalOutput { report, artifacts })
}

// ---- sweep ----

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub flows_dir: PathBuf,
    pub seg_masks_dir: PathBuf,
    pub thresholds: Vec<f64>,
    pub mask_cutoff: u8,
    pub sanitize_nonfinite: bool,
}

pub const SWEEP_CSV_HEADER: &str = "threshold,avg_iou,avg_loss";

pub fn write_sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_real(r.threshold),
            fmt_real(r.average_iou),
            fmt_real(r.average_loss)
        );
    }
    s.into_bytes()
}

pub fn cmd_sweep(opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if opts.thresholds.is_empty() {
        return Err(Error::InvalidParameter("no thresholds given".into()));
    }
    let parse = ParseOptions {
        sanitize_nonfinite: opts.sanitize_nonfinite,
    };
    let flows = list_files(&opts.flows_dir, &["flo"])?
        .iter()
        .map(|p| read_flo_file(p, parse))
        .collect::<Result<Vec<_>>>()?;
    if flows.is_empty() {
        return Err(Error::EmptyClip);
    }
    let segs = load_segmentation(&opts.seg_masks_dir, opts.mask_cutoff, Some(flows[0].dims()))?;
    let segs: Vec<BinaryMask> = pair_frames(flows.len(), segs)?
        .into_iter()
        .map(|(_, m)| m)
        .collect();
    threshold_sweep(&flows, &segs, &opts.thresholds)
}

// ---- summarize ----

/// Multi-clip manifest for a per-clip, per-detector average-loss table.
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    pub clips: Vec<ManifestClip>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestClip {
    pub name: String,
    pub flow_masks: PathBuf,
    pub detectors: Vec<ManifestDetector>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestDetector {
    pub name: String,
    pub seg_masks: PathBuf,
}

pub fn cmd_summarize(manifest_path: &Path, mask_cutoff: u8) -> Result<SummaryTable> {
    let bytes = read_bytes(manifest_path)?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Manifest(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let first = manifest
        .clips
        .first()
        .ok_or_else(|| Error::Manifest("no clips listed".into()))?;
    let detectors: Vec<String> = first.detectors.iter().map(|d| d.name.clone()).collect();
    if detectors.is_empty() {
        return Err(Error::Manifest(format!("clip {} lists no detectors", first.name)));
    }
    let mut table = SummaryTable::new(detectors.clone());
    for clip in &manifest.clips {
        let names: Vec<&str> = clip.detectors.iter().map(|d| d.name.as_str()).collect();
        if names != detectors.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Manifest(format!(
                "clip {} lists detectors {names:?}, expected {detectors:?}",
                clip.name
            )));
        }
        let truth_dir = base.join(&clip.flow_masks);
        let truths = list_files(&truth_dir, &["pgm", "png"])?
            .iter()
            .map(|p| read_mask_file(p, mask_cutoff))
            .collect::<Result<Vec<_>>>()?;
        if truths.is_empty() {
            return Err(Error::EmptyClip);
        }
        let mut reports = Vec::new();
        for det in &clip.detectors {
            let segs = load_segmentation(&base.join(&det.seg_masks), mask_cutoff, Some(truths[0].dims()))?;
            let segs: Vec<BinaryMask> = pair_frames(truths.len(), segs)?
                .into_iter()
                .map(|(_, m)| m)
                .collect();
            reports.push(crate::metrics::evaluate_clip(&clip.name, &truths, &segs)?);
        }
        table.push(clip.name.clone(), &reports)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_drops_one_trailing_frame() {
        assert_eq!(pair_frames(2, vec![1, 2, 3]).unwrap(), vec![1, 2]);
        assert_eq!(pair_frames(2, vec![1, 2]).unwrap(), vec![1, 2]);
        assert!(matches!(pair_frames(2, vec![1, 2, 3, 4]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(pair_frames(2, vec![1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn ffmpeg_arguments() {
        let opts = ExtractOptions {
            video: "in.mp4".into(),
            out_dir: "out".into(),
            fps: Some(10.0),
            format: ImageFormat::Pgm,
            ffmpeg: None,
        };
        let args: Vec<String> = ffmpeg_args(&opts)
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect();
        let joined = args.join(" ");
        assert!(joined.contains("-i in.mp4"));
        assert!(joined.contains("-vf fps=10,format=gray"));
        assert!(joined.ends_with("-start_number 0 out/frame_%06d.pgm"));
        let native = ExtractOptions {
            fps: None,
            format: ImageFormat::Png,
            ..opts
        };
        let joined = ffmpeg_args(&native)
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        assert!(joined.contains("-vf format=gray"));
        assert!(joined.ends_with("frame_%06d.png"));
    }

    #[test]
    fn lexicographic_listing() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.pgm", "a10.pgm", "a2.pgm", "skip.txt"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        fs::create_dir(dir.path().join("c.pgm")).unwrap();
        let names: Vec<String> = list_files(dir.path(), &["pgm"])
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["a10.pgm", "a2.pgm", "b.pgm"]);
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [SweepRow {
            threshold: 0.5,
            average_loss: 0.25,
            average_iou: 0.75,
        }];
        assert_eq!(
            String::from_utf8(write_sweep_csv(&rows)).unwrap(),
            "threshold,avg_iou,avg_loss\n0.500000,0.750000,0.250000\n"
        );
    }
}
