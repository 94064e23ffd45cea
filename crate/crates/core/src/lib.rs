//! Motion ground-truth masks from dense optical flow, and pixel-wise
//! evaluation of object-detector segmentation masks against them.
//!
//! The flow mask of a frame marks every pixel whose flow magnitude
//! `sqrt(u^2 + v^2)` is strictly above a threshold. Detector output for the
//! same frame is OR-ed into one segmentation mask and scored with
//! `IOU = TP / (TP + FP + FN)` and `loss = 1 - IOU`. Connected false-positive
//! regions are reported as likely sporadic detections.

pub mod commands;
pub mod error;
pub mod flow_io;
pub mod image_io;
pub mod magnitude;
pub mod metrics;
pub mod reference_flow;
pub mod segmentation;
pub mod synthetic;
pub mod visualization;

pub use error::{Error, Result};
pub use flow_io::{parse_flo, parse_flo_with, write_flo, FlowField, ParseOptions};
pub use image_io::{
    mask_from_image, mask_to_image, read_pgm, read_png_gray, write_pgm, write_png_gray, BinaryMask,
    GrayscaleImage,
};
pub use magnitude::{
    flow_magnitude, magnitude_method, threshold_sweep, MagnitudeField, MagnitudeParams, SweepRow,
};
pub use metrics::{
    confusion, evaluate_clip, iou, loss, write_report_csv, write_report_json, ClipReport,
    ConfusionCounts, ConfusionMap, FrameMetrics, Label, SummaryTable,
};
pub use reference_flow::{estimate_clip_flows, estimate_flow, HsParams};
pub use segmentation::{
    artifact_candidates, combine_masks, connected_components, label_components, ArtifactRegion,
    BoundingBox, Connectivity,
};
pub use synthetic::{render_clip, SceneSpec, Shape, Sprite, SyntheticClip, Velocity};
pub use visualization::{colorize_confusion, colorize_flow, overlay_mask, RgbImage};
