//! The magnitude method: per-pixel flow magnitude, strict thresholding into a
//! flow mask, and a threshold sweep for picking the threshold by hand.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow_io::FlowField;
use crate::image_io::BinaryMask;
use crate::metrics::evaluate_clip;

/// Threshold used when none is given, in pixels per frame.
pub const DEFAULT_THRESHOLD: f64 = 1.0;

/// Per-pixel motion magnitude `sqrt(u^2 + v^2)`, computed in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl MagnitudeField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeParams {
    threshold: f64,
}

impl MagnitudeParams {
    pub fn new(threshold: f64) -> Result<Self> {
        if threshold.is_finite() && threshold >= 0.0 {
            Ok(Self { threshold })
        } else {
            Err(Error::InvalidParameter(format!(
                "threshold must be finite and non-negative, got {threshold}"
            )))
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Default for MagnitudeParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

pub fn flow_magnitude(field: &FlowField) -> MagnitudeField {
    MagnitudeField {
        width: field.width(),
        height: field.height(),
        values: field.vectors().iter().map(|&v| pixel_magnitude(v)).collect(),
    }
}

fn pixel_magnitude([u, v]: [f32; 2]) -> f64 {
    let (u, v) = (u as f64, v as f64);
    (u * u + v * v).sqrt()
}

/// Pixels strictly faster than the threshold are members.
pub fn magnitude_method(field: &FlowField, params: MagnitudeParams) -> BinaryMask {
    let bits = field
        .vectors()
        .iter()
        .map(|&v| pixel_magnitude(v) > params.threshold)
        .collect();
    BinaryMask::new(field.width(), field.height(), bits).expect("flow field dimensions are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub average_loss: f64,
    pub average_iou: f64,
}

/// Evaluates the whole clip once per threshold. Rows come back in the order
/// the thresholds were given.
pub fn threshold_sweep(
    flows: &[FlowField],
    segmasks: &[BinaryMask],
    thresholds: &[f64],
) -> Result<Vec<SweepRow>> {
    if flows.len() != segmasks.len() {
        return Err(Error::LengthMismatch {
            left: flows.len(),
            right: segmasks.len(),
        });
    }
    if thresholds.is_empty() {
        return Err(Error::InvalidParameter("no thresholds given".into()));
    }
    for (flow, seg) in flows.iter().zip(segmasks) {
        crate::image_io::same_dims(flow.dims(), seg.dims())?;
    }
    let params = thresholds
        .iter()
        .map(|&t| MagnitudeParams::new(t))
        .collect::<Result<Vec<_>>>()?;
    params
        .par_iter()
        .map(|&p| {
            let masks: Vec<BinaryMask> = flows.iter().map(|f| magnitude_method(f, p)).collect();
            let report = evaluate_clip("sweep", &masks, segmasks)?;
            Ok(SweepRow {
                threshold: p.threshold(),
                average_loss: report.average_loss,
                average_iou: report.average_iou,
            })
        })
        .collect()
}
