//! Flow colour-wheel rendering and confusion overlays.
//!
//! Flow renderings use the Middlebury wheel (55 bins: RY 15, YG 6, GC 4,
//! CB 11, BM 13, MR 6). Hue follows `atan2(-v, -u)` in image coordinates:
//! right is red, down is orange, left is cyan and up is violet. Saturation is
//! the pixel magnitude over the frame maximum, and zero motion is white.

use crate::error::{Error, Result};
use crate::flow_io::FlowField;
use crate::image_io::{encode_png, same_dims, BinaryMask, GrayscaleImage};
use crate::metrics::{ConfusionMap, Label};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const TP_COLOR: Rgb = [0, 200, 0];
pub const FP_COLOR: Rgb = [220, 0, 0];
pub const FN_COLOR: Rgb = [230, 200, 0];
pub const TN_COLOR: Rgb = [0, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::NonPositiveDimensions {
                width: width as i64,
                height: height as i64,
            });
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                left: pixels.len(),
                right: width * height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    fn raw(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }
}

/// Binary PPM (P6).
pub fn write_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.raw());
    out
}

pub fn write_png_rgb(image: &RgbImage) -> Result<Vec<u8>> {
    encode_png(image.width, image.height, png::ColorType::Rgb, &image.raw())
}

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
const WHEEL_LEN: usize = RY + YG + GC + CB + BM + MR;

fn ramp(i: usize, n: usize) -> f64 {
    (255 * i / n) as f64
}

fn color_wheel() -> [[f64; 3]; WHEEL_LEN] {
    let mut wheel = [[0.0; 3]; WHEEL_LEN];
    let mut k = 0;
    for i in 0..RY {
        wheel[k] = [255.0, ramp(i, RY), 0.0];
        k += 1;
    }
    for i in 0..YG {
        wheel[k] = [255.0 - ramp(i, YG), 255.0, 0.0];
        k += 1;
    }
    for i in 0..GC {
        wheel[k] = [0.0, 255.0, ramp(i, GC)];
        k += 1;
    }
    for i in 0..CB {
        wheel[k] = [0.0, 255.0 - ramp(i, CB), 255.0];
        k += 1;
    }
    for i in 0..BM {
        wheel[k] = [ramp(i, BM), 0.0, 255.0];
        k += 1;
    }
    for i in 0..MR {
        wheel[k] = [255.0, 0.0, 255.0 - ramp(i, MR)];
        k += 1;
    }
    wheel
}

fn wheel_color(wheel: &[[f64; 3]; WHEEL_LEN], u: f64, v: f64, radius: f64) -> Rgb {
    if radius == 0.0 {
        return WHITE;
    }
    // Horizontal vectors always take the -0.0 branch so rightward motion
    // lands on bin 0 regardless of the sign of a zero `v`.
    let y = if v == 0.0 { -0.0 } else { -v };
    let angle = y.atan2(-u) / std::f64::consts::PI;
    let fk = (angle + 1.0) / 2.0 * (WHEEL_LEN - 1) as f64;
    let k0 = (fk.floor() as usize).min(WHEEL_LEN - 1);
    let k1 = (k0 + 1) % WHEEL_LEN;
    let f = fk - k0 as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let c0 = wheel[k0][c] / 255.0;
        let c1 = wheel[k1][c] / 255.0;
        let mut col = (1.0 - f) * c0 + f * c1;
        if radius <= 1.0 {
            col = 1.0 - radius * (1.0 - col);
        } else {
            col *= 0.75;
        }
        *o = (255.0 * col).floor().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Colour-wheel rendering normalised by this frame's largest magnitude.
pub fn colorize_flow(field: &FlowField) -> RgbImage {
    render_flow(field, None)
}

/// Colour-wheel rendering with a fixed full-saturation magnitude, so that
/// renderings of different frames can be compared. Magnitudes above `scale`
/// are drawn darkened.
pub fn colorize_flow_fixed_scale(field: &FlowField, scale: f64) -> Result<RgbImage> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fixed scale must be positive, got {scale}"
        )));
    }
    Ok(render_flow(field, Some(scale)))
}

fn render_flow(field: &FlowField, scale: Option<f64>) -> RgbImage {
    let wheel = color_wheel();
    let as64 = |[u, v]: [f32; 2]| (u as f64, v as f64);
    let norm = scale.unwrap_or_else(|| {
        field
            .vectors()
            .iter()
            .map(|&p| {
                let (u, v) = as64(p);
                u.hypot(v)
            })
            .fold(0.0, f64::max)
    });
    let pixels = field
        .vectors()
        .iter()
        .map(|&p| {
            if norm == 0.0 {
                return WHITE;
            }
            let (u, v) = as64(p);
            wheel_color(&wheel, u, v, u.hypot(v) / norm)
        })
        .collect();
    RgbImage {
        width: field.width(),
        height: field.height(),
        pixels,
    }
}

pub fn confusion_color(label: Label) -> Rgb {
    match label {
        Label::TruePositive => TP_COLOR,
        Label::FalsePositive => FP_COLOR,
        Label::FalseNegative => FN_COLOR,
        Label::TrueNegative => TN_COLOR,
    }
}

pub fn colorize_confusion(map: &ConfusionMap) -> RgbImage {
    RgbImage {
        width: map.width(),
        height: map.height(),
        pixels: map.labels().iter().map(|&l| confusion_color(l)).collect(),
    }
}

/// Tints mask members over a grayscale frame: `(1 - opacity) * gray +
/// opacity * tint`, rounded half to even.
pub fn overlay_mask(
    frame: &GrayscaleImage,
    mask: &BinaryMask,
    tint: Rgb,
    opacity: f64,
) -> Result<RgbImage> {
    same_dims(frame.dims(), mask.dims())?;
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::InvalidParameter(format!(
            "opacity must lie in [0, 1], got {opacity}"
        )));
    }
    let pixels = frame
        .pixels()
        .iter()
        .zip(mask.bits())
        .map(|(&g, &member)| {
            if !member {
                return [g, g, g];
            }
            let blend = |t: u8| {
                ((1.0 - opacity) * g as f64 + opacity * t as f64)
                    .round_ties_even()
                    .clamp(0.0, 255.0) as u8
            };
            [blend(tint[0]), blend(tint[1]), blend(tint[2])]
        })
        .collect();
    Ok(RgbImage {
        width: frame.width(),
        height: frame.height(),
        pixels,
    })
}
