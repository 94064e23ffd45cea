use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use flowmask::commands::{
    cmd_eval, cmd_extract, cmd_flow, cmd_mask, cmd_summarize, cmd_sweep, write_sweep_csv,
    EvalOptions, ExtractOptions, FlowEngine, FlowOptions, ImageFormat, MaskOptions, SweepOptions,
};
use flowmask::image_io::DEFAULT_MASK_CUTOFF;
use flowmask::magnitude::DEFAULT_THRESHOLD;
use flowmask::{render_clip, Connectivity, Error, HsParams, SceneSpec};

#[derive(Parser)]
#[command(name = "flowmask", version, about = "Flow-mask ground truth and IOU evaluation for video detections")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pgm,
    Png,
}

impl From<Format> for ImageFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pgm => ImageFormat::Pgm,
            Format::Png => ImageFormat::Png,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    File,
    HornSchunck,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split a video into numbered grayscale frames with FFmpeg.
    Extract {
        video: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output frame rate; the video's native rate when omitted.
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long, value_enum, default_value = "pgm")]
        format: Format,
    },
    /// Compute or import one .flo per consecutive frame pair.
    Flow {
        /// Frame directory (horn-schunck) or .flo directory (file).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "horn-schunck")]
        engine: Engine,
        #[arg(long, default_value_t = 15.0)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Map NaN/infinite vectors to (0, 0) instead of rejecting the file.
        #[arg(long)]
        sanitize_nonfinite: bool,
    },
    /// Threshold flow magnitudes into flow masks.
    Mask {
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        sanitize_nonfinite: bool,
    },
    /// Score segmentation masks against flow masks.
    Eval {
        #[arg(long)]
        flow_masks: PathBuf,
        /// One mask per frame, or one subdirectory of per-object masks per frame.
        #[arg(long)]
        seg_masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        min_artifact_area: u64,
        #[arg(long, default_value_t = 8, value_parser = parse_connectivity)]
        connectivity: u8,
        #[arg(long, default_value_t = DEFAULT_MASK_CUTOFF)]
        mask_cutoff: u8,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["csv", "json"])]
        formats: Vec<ReportFormat>,
        /// Write per-frame TP/FP/FN/TN colour maps.
        #[arg(long)]
        render_confusion: bool,
        /// Render these .flo files with the colour wheel.
        #[arg(long)]
        flows: Option<PathBuf>,
        /// Full-saturation magnitude shared by all rendered frames.
        #[arg(long)]
        fixed_scale: Option<f64>,
        #[arg(long, value_enum, default_value = "pgm")]
        image_format: Format,
        #[arg(long)]
        sanitize_nonfinite: bool,
    },
    /// Average loss and IOU over a list of thresholds.
    Sweep {
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        seg_masks: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        thresholds: Vec<f64>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MASK_CUTOFF)]
        mask_cutoff: u8,
        #[arg(long)]
        sanitize_nonfinite: bool,
    },
    /// Per-clip, per-detector average-loss table from a JSON manifest.
    Summarize {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MASK_CUTOFF)]
        mask_cutoff: u8,
    },
    /// Render a synthetic fixture clip from a JSON scene description.
    Synth {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_connectivity(s: &str) -> Result<u8, String> {
    match s {
        "4" => Ok(4),
        "8" => Ok(8),
        _ => Err("connectivity must be 4 or 8".into()),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let _ = std::io::stdout().write_all(bytes);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Cmd::Extract {
            video,
            out,
            fps,
            format,
        } => {
            let frames = cmd_extract(&ExtractOptions {
                video,
                out_dir: out,
                fps,
                format: format.into(),
                ffmpeg: None,
            })?;
            println!("{} frames", frames.len());
        }
        Cmd::Flow {
            input,
            out,
            engine,
            alpha,
            iterations,
            levels,
            sanitize_nonfinite,
        } => {
            let engine = match engine {
                Engine::File => FlowEngine::File,
                Engine::HornSchunck => FlowEngine::HornSchunck(HsParams::new(alpha, iterations, levels)?),
            };
            let written = cmd_flow(&FlowOptions {
                input_dir: input,
                out_dir: out,
                engine,
                sanitize_nonfinite,
            })?;
            println!("{} flow fields", written.len());
        }
        Cmd::Mask {
            flows,
            out,
            threshold,
            sanitize_nonfinite,
        } => {
            let counts = cmd_mask(&MaskOptions {
                flows_dir: flows,
                out_dir: out,
                threshold,
                sanitize_nonfinite,
            })?;
            for (name, count) in counts {
                println!("{name} {count}");
            }
        }
        Cmd::Eval {
            flow_masks,
            seg_masks,
            out,
            name,
            min_artifact_area,
            connectivity,
            mask_cutoff,
            formats,
            render_confusion,
            flows,
            fixed_scale,
            image_format,
            sanitize_nonfinite,
        } => {
            let mut opts = EvalOptions::new(flow_masks, seg_masks, out);
            opts.clip_name = name;
            opts.min_artifact_area = min_artifact_area as usize;
            opts.connectivity =
                Connectivity::from_count(connectivity).expect("validated by the parser");
            opts.mask_cutoff = mask_cutoff;
            opts.csv = formats.contains(&ReportFormat::Csv);
            opts.json = formats.contains(&ReportFormat::Json);
            opts.render_confusion = render_confusion;
            opts.flows_dir = flows;
            opts.fixed_scale = fixed_scale;
            opts.image_format = image_format.into();
            opts.sanitize_nonfinite = sanitize_nonfinite;
            let result = cmd_eval(&opts)?;
            let artifacts: usize = result.artifacts.iter().map(|(_, r)| r.len()).sum();
            println!(
                "{}: {} frames, average loss {:.6}, average IOU {:.6}, {} artifact regions",
                result.report.clip_name,
                result.report.frames.len(),
                result.report.average_loss,
                result.report.average_iou,
                artifacts
            );
        }
        Cmd::Sweep {
            flows,
            seg_masks,
            thresholds,
            out,
            mask_cutoff,
            sanitize_nonfinite,
        } => {
            let rows = cmd_sweep(&SweepOptions {
                flows_dir: flows,
                seg_masks_dir: seg_masks,
                thresholds,
                mask_cutoff,
                sanitize_nonfinite,
            })?;
            emit(out.as_deref(), &write_sweep_csv(&rows))?;
        }
        Cmd::Summarize {
            manifest,
            out,
            mask_cutoff,
        } => {
            let table = cmd_summarize(&manifest, mask_cutoff)?;
            emit(out.as_deref(), &table.to_csv())?;
        }
        Cmd::Synth { scene, out, seed } => {
            let bytes = std::fs::read(&scene).map_err(|e| Error::Io {
                path: scene.clone(),
                source: e,
            })?;
            let spec: SceneSpec = serde_json::from_slice(&bytes)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", scene.display())))?;
            let clip = render_clip(&spec, seed)?;
            clip.write_to_dir(&out)?;
            println!("{} frames", clip.frames.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.category());
            ExitCode::FAILURE
        }
    }
}
