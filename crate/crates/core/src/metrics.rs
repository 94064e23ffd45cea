//! Pixel-wise confusion counting, IOU and loss, per-clip reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::{same_dims, BinaryMask};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::TruePositive => self.tp += 1,
            Label::FalsePositive => self.fp += 1,
            Label::TrueNegative => self.tn += 1,
            Label::FalseNegative => self.fn_ += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl Label {
    pub fn classify(truth: bool, prediction: bool) -> Self {
        match (truth, prediction) {
            (true, true) => Label::TruePositive,
            (false, true) => Label::FalsePositive,
            (true, false) => Label::FalseNegative,
            (false, false) => Label::TrueNegative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMap {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl ConfusionMap {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::NonPositiveDimensions {
                width: width as i64,
                height: height as i64,
            });
        }
        if labels.len() != width * height {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: width * height,
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn counts(&self) -> ConfusionCounts {
        let mut c = ConfusionCounts::default();
        for &l in &self.labels {
            c.add(l);
        }
        c
    }
}

/// Labels every pixel of `prediction` against `ground_truth` (the flow mask).
pub fn confusion(
    ground_truth: &BinaryMask,
    prediction: &BinaryMask,
) -> Result<(ConfusionCounts, ConfusionMap)> {
    same_dims(ground_truth.dims(), prediction.dims())?;
    let labels: Vec<Label> = ground_truth
        .bits()
        .iter()
        .zip(prediction.bits())
        .map(|(&t, &p)| Label::classify(t, p))
        .collect();
    let map = ConfusionMap {
        width: ground_truth.width(),
        height: ground_truth.height(),
        labels,
    };
    Ok((map.counts(), map))
}

/// Counts only, without materialising the label map.
pub fn confusion_counts(ground_truth: &BinaryMask, prediction: &BinaryMask) -> Result<ConfusionCounts> {
    same_dims(ground_truth.dims(), prediction.dims())?;
    let mut c = ConfusionCounts::default();
    for (&t, &p) in ground_truth.bits().iter().zip(prediction.bits()) {
        c.add(Label::classify(t, p));
    }
    Ok(c)
}

/// `TP / (TP + FP + FN)`; 1.0 when both masks are empty.
pub fn iou(counts: &ConfusionCounts) -> f64 {
    let union = counts.tp + counts.fp + counts.fn_;
    if union == 0 {
        1.0
    } else {
        counts.tp as f64 / union as f64
    }
}

pub fn loss(counts: &ConfusionCounts) -> f64 {
    1.0 - iou(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame_index: usize,
    pub counts: ConfusionCounts,
    pub iou: f64,
    pub loss: f64,
}

impl FrameMetrics {
    pub fn from_counts(frame_index: usize, counts: ConfusionCounts) -> Self {
        let iou = iou(&counts);
        Self {
            frame_index,
            counts,
            iou,
            loss: 1.0 - iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub clip_name: String,
    pub frames: Vec<FrameMetrics>,
    pub average_loss: f64,
    pub average_iou: f64,
}

impl ClipReport {
    /// Averages are summed in frame order and divided once.
    pub fn from_frames(clip_name: impl Into<String>, frames: Vec<FrameMetrics>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyClip);
        }
        let n = frames.len() as f64;
        let (loss_sum, iou_sum) = frames
            .iter()
            .fold((0.0f64, 0.0f64), |(l, i), f| (l + f.loss, i + f.iou));
        Ok(Self {
            clip_name: clip_name.into(),
            frames,
            average_loss: loss_sum / n,
            average_iou: iou_sum / n,
        })
    }
}

/// Frame `i` of `flow_masks` is the ground truth for frame `i` of `seg_masks`.
pub fn evaluate_clip(
    clip_name: &str,
    flow_masks: &[BinaryMask],
    seg_masks: &[BinaryMask],
) -> Result<ClipReport> {
    if flow_masks.len() != seg_masks.len() {
        return Err(Error::LengthMismatch {
            left: flow_masks.len(),
            right: seg_masks.len(),
        });
    }
    if flow_masks.is_empty() {
        return Err(Error::EmptyClip);
    }
    let frames = flow_masks
        .par_iter()
        .zip(seg_masks)
        .enumerate()
        .map(|(i, (truth, pred))| Ok(FrameMetrics::from_counts(i, confusion_counts(truth, pred)?)))
        .collect::<Result<Vec<_>>>()?;
    ClipReport::from_frames(clip_name, frames)
}

pub const REPORT_CSV_HEADER: &str = "frame,tp,fp,tn,fn,iou,loss";

/// Six decimals, ties to even (`{:.6}` rounds the exact binary value).
pub fn fmt_real(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_report_csv(report: &ClipReport) -> Vec<u8> {
    let mut s = String::new();
    s.push_str(REPORT_CSV_HEADER);
    s.push('\n');
    for f in &report.frames {
        let c = &f.counts;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            f.frame_index,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            fmt_real(f.iou),
            fmt_real(f.loss)
        );
    }
    let _ = writeln!(
        s,
        "average,,,,,{},{}",
        fmt_real(report.average_iou),
        fmt_real(report.average_loss)
    );
    s.into_bytes()
}

pub fn write_report_json(report: &ClipReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
    out.push(b'\n');
    out
}

/// Average loss per clip per detector, laid out one clip per row with a
/// trailing column-mean row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub detectors: Vec<String>,
    pub clips: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub clip_name: String,
    pub average_losses: Vec<f64>,
}

impl SummaryTable {
    pub fn new(detectors: Vec<String>) -> Self {
        Self {
            detectors,
            clips: Vec::new(),
        }
    }

    /// `reports` holds one report per detector, in detector order.
    pub fn push(&mut self, clip_name: impl Into<String>, reports: &[ClipReport]) -> Result<()> {
        if reports.len() != self.detectors.len() {
            return Err(Error::LengthMismatch {
                left: reports.len(),
                right: self.detectors.len(),
            });
        }
        self.clips.push(SummaryRow {
            clip_name: clip_name.into(),
            average_losses: reports.iter().map(|r| r.average_loss).collect(),
        });
        Ok(())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.clips.len() as f64;
        (0..self.detectors.len())
            .map(|d| self.clips.iter().map(|c| c.average_losses[d]).sum::<f64>() / n)
            .collect()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut s = String::from("clip");
        for d in &self.detectors {
            s.push(',');
            s.push_str(d);
        }
        s.push('\n');
        for row in &self.clips {
            s.push_str(&row.clip_name);
            for &l in &row.average_losses {
                s.push(',');
                s.push_str(&fmt_real(l));
            }
            s.push('\n');
        }
        if !self.clips.is_empty() {
            s.push_str("average");
            for m in self.column_means() {
                s.push(',');
                s.push_str(&fmt_real(m));
            }
            s.push('\n');
        }
        s.into_bytes()
    }
}
