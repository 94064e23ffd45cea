//! Dense optical-flow fields and the Middlebury `.flo` container.
//!
//! Layout: little-endian `f32` tag 202021.25 ("PIEH"), `i32` width, `i32`
//! height, then `height` rows of `width` interleaved `(u, v)` `f32` pairs,
//! top row first.

use crate::error::{Error, Result};

/// Sanity tag at the start of every `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

/// Exclusive upper bound on per-pixel flow magnitude.
pub const MAGNITUDE_BOUND: f64 = 1e9;

const HEADER_LEN: usize = 12;

/// Per-pixel `(u, v)` displacement in pixels per frame, row-major.
///
/// Every vector is finite and shorter than [`MAGNITUDE_BOUND`]; construction
/// goes through [`FlowField::new`] so downstream code can rely on that.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::NonPositiveDimensions {
                width: width as i64,
                height: height as i64,
            });
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidParameter(format!("{width}x{height} overflows")))?;
        if vectors.len() != expected {
            return Err(Error::LengthMismatch {
                left: vectors.len(),
                right: expected,
            });
        }
        for (i, &[u, v]) in vectors.iter().enumerate() {
            let (x, y) = (i % width, i / width);
            if !u.is_finite() || !v.is_finite() {
                return Err(Error::NonFiniteVector { x, y });
            }
            let magnitude = (u as f64).hypot(v as f64);
            if magnitude >= MAGNITUDE_BOUND {
                return Err(Error::MagnitudeBoundExceeded { x, y, magnitude });
            }
        }
        Ok(Self {
            width,
            height,
            vectors,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![[0.0; 2]; width * height])
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 2],
    ) -> Result<Self> {
        let mut vectors = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                vectors.push(f(x, y));
            }
        }
        Self::new(width, height, vectors)
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

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &FlowField) -> bool {
        self.dims() == other.dims()
            && self
                .vectors
                .iter()
                .zip(&other.vectors)
                .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits())
    }
}

/// Options for [`parse_flo_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Replace NaN/infinite vectors with `(0, 0)` instead of rejecting the file.
    pub sanitize_nonfinite: bool,
}

pub fn parse_flo(bytes: &[u8]) -> Result<FlowField> {
    parse_flo_with(bytes, ParseOptions::default())
}

pub fn parse_flo_with(bytes: &[u8], opts: ParseOptions) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let magic = f32::from_le_bytes(word(bytes, 0));
    if magic != FLO_MAGIC {
        return Err(Error::MagicMismatch { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let width = i32::from_le_bytes(word(bytes, 4)) as i64;
    let height = i32::from_le_bytes(word(bytes, 8)) as i64;
    if width <= 0 || height <= 0 {
        return Err(Error::NonPositiveDimensions { width, height });
    }
    let expected = HEADER_LEN as u128 + 8 * (width as u128) * (height as u128);
    if bytes.len() as u128 != expected {
        return Err(Error::TruncatedFile {
            expected: u64::try_from(expected).unwrap_or(u64::MAX),
            actual: bytes.len() as u64,
        });
    }
    let vectors = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            let u = f32::from_le_bytes(word(c, 0));
            let v = f32::from_le_bytes(word(c, 4));
            if opts.sanitize_nonfinite && !(u.is_finite() && v.is_finite()) {
                [0.0, 0.0]
            } else {
                [u, v]
            }
        })
        .collect();
    FlowField::new(width as usize, height as usize, vectors)
}

pub fn write_flo(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.vectors.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(field.width as i32).to_le_bytes());
    out.extend_from_slice(&(field.height as i32).to_le_bytes());
    for &[u, v] in &field.vectors {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], at: usize) -> [u8; 4] {
    [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]
}
