//! Grayscale frames, binary masks, and their PGM/PNG encodings.

use std::io::Cursor;

use crate::error::{Error, Result};

/// Membership cutoff used when a mask is read from an image file.
pub const DEFAULT_MASK_CUTOFF: u8 = 127;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayscaleImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_raster(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self { pixels, ..*self }
    }
}

/// Per-pixel membership layer, row-major. Used for both flow masks and
/// detector segmentation masks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_raster(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Pixel-wise `self AND NOT other`.
    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        same_dims(self.dims(), other.dims())?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && !b)
            .collect();
        Ok(BinaryMask { bits, ..*self })
    }
}

pub(crate) fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::dims(a, b))
    }
}

fn check_raster(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::NonPositiveDimensions {
            width: width as i64,
            height: height as i64,
        });
    }
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        Some(n) => Err(Error::LengthMismatch { left: len, right: n }),
        None => Err(Error::InvalidParameter(format!("{width}x{height} overflows"))),
    }
}

/// Decodes a binary (P5) PGM.
///
/// Header comments are skipped. Samples from files with `maxval < 255` are
/// rescaled to the full 0..=255 range with rounding, so a 0/1 mask export
/// decodes to 0/255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayscaleImage> {
    let mut header = HeaderReader { bytes, pos: 0 };
    let magic = header.token()?;
    if magic != b"P5" {
        return Err(Error::BadHeader(format!(
            "expected P5, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::BadHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        Some(_) => return Err(Error::BadHeader("missing separator before raster".into())),
        None => {}
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::BadHeader(format!("{width}x{height} overflows")))?;
    let payload = &bytes[header.pos.min(bytes.len())..];
    if payload.len() < expected {
        return Err(Error::TruncatedPixels {
            expected,
            actual: payload.len(),
        });
    }
    let raw = &payload[..expected];
    let pixels = if maxval == 255 {
        raw.to_vec()
    } else {
        raw.iter()
            .map(|&p| {
                let p = p.min(maxval as u8) as usize;
                ((p * 255 + maxval / 2) / maxval) as u8
            })
            .collect()
    };
    GrayscaleImage::new(width, height, pixels)
}

pub fn write_pgm(image: &GrayscaleImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::BadHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::BadHeader(format!("bad {what} {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

/// A pixel is a member iff its intensity is strictly greater than `cutoff`.
pub fn mask_from_image(image: &GrayscaleImage, cutoff: u8) -> BinaryMask {
    BinaryMask {
        width: image.width,
        height: image.height,
        bits: image.pixels.iter().map(|&p| p > cutoff).collect(),
    }
}

/// Members become 255, everything else 0.
pub fn mask_to_image(mask: &BinaryMask) -> GrayscaleImage {
    GrayscaleImage {
        width: mask.width,
        height: mask.height,
        pixels: mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
    }
}

/// Decodes a PNG to 8-bit grayscale.
///
/// 8-bit gray is taken as is. Palette and sub-8-bit gray are expanded first.
/// RGB and RGBA are flattened to the integer average `(r + g + b) / 3`, and any
/// alpha channel is dropped. 16-bit images are rejected.
pub fn read_png_gray(bytes: &[u8]) -> Result<GrayscaleImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedPngVariant(format!("{depth:?}-bit {color:?}")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let channels = color.samples();
    let mut pixels = Vec::with_capacity(width * height);
    for row in buf[..info.buffer_size()].chunks_exact(info.line_size) {
        for px in row[..width * channels].chunks_exact(channels) {
            let gray = match color {
                png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => px[0],
                png::ColorType::Rgb | png::ColorType::Rgba => {
                    ((px[0] as u16 + px[1] as u16 + px[2] as u16) / 3) as u8
                }
                other => {
                    return Err(Error::UnsupportedPngVariant(format!("{other:?}")));
                }
            };
            pixels.push(gray);
        }
    }
    GrayscaleImage::new(width, height, pixels)
}

pub fn write_png_gray(image: &GrayscaleImage) -> Result<Vec<u8>> {
    encode_png(
        image.width,
        image.height,
        png::ColorType::Grayscale,
        &image.pixels,
    )
}

pub(crate) fn encode_png(
    width: usize,
    height: usize,
    color: png::ColorType,
    data: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Png(e.to_string()))?;
        writer.finish().map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(out)
}
