use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("flow file magic is {found}, expected 202021.25")]
    MagicMismatch { found: f32 },
    #[error("flow file has {actual} bytes, expected {expected}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("dimensions must be positive, got {width}x{height}")]
    NonPositiveDimensions { width: i64, height: i64 },
    #[error("non-finite flow vector at pixel ({x}, {y})")]
    NonFiniteVector { x: usize, y: usize },
    #[error("flow magnitude {magnitude:e} at pixel ({x}, {y}) is not below 1e9")]
    MagnitudeBoundExceeded { x: usize, y: usize, magnitude: f64 },
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("PGM payload has {actual} bytes, expected {expected}")]
    TruncatedPixels { expected: usize, actual: usize },
    #[error("unsupported PGM maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("unsupported PNG variant: {0}")]
    UnsupportedPngVariant(String),
    #[error("PNG codec error: {0}")]
    Png(String),
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("clip has no frames to evaluate")]
    EmptyClip,
    #[error("frames must be at least {min}x{min}, got {width}x{height}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} leaves the frame at frame {frame}")]
    SpriteOutOfBounds { what: String, frame: usize },
    #[error("ffmpeg binary `{binary}` not found; install FFmpeg or point FLOWMASK_FFMPEG at it")]
    FfmpegNotFound { binary: String },
    #[error("ffmpeg exited with {status}: {diagnostics}")]
    FfmpegFailed { status: String, diagnostics: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_width: left.0,
            left_height: left.1,
            right_width: right.0,
            right_height: right.1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches the offending file path to a decoding error.
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::File { .. }) => e,
            e => Error::File {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// Stable snake_case name used on the CLI's error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::MagicMismatch { .. } => "magic_mismatch",
            Error::TruncatedFile { .. } => "truncated_file",
            Error::NonPositiveDimensions { .. } => "non_positive_dimensions",
            Error::NonFiniteVector { .. } => "non_finite_vector",
            Error::MagnitudeBoundExceeded { .. } => "magnitude_bound_exceeded",
            Error::BadHeader(_) => "bad_header",
            Error::TruncatedPixels { .. } => "truncated_pixels",
            Error::UnsupportedMaxval(_) => "unsupported_maxval",
            Error::UnsupportedPngVariant(_) => "unsupported_png_variant",
            Error::Png(_) => "png",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::EmptyClip => "empty_clip",
            Error::TooSmall { .. } => "too_small",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SpriteOutOfBounds { .. } => "sprite_out_of_bounds",
            Error::FfmpegNotFound { .. } => "ffmpeg_not_found",
            Error::FfmpegFailed { .. } => "ffmpeg_failed",
            Error::Io { .. } => "io",
            Error::File { source, .. } => source.category(),
            Error::Manifest(_) => "manifest",
        }
    }

    /// Strips file context, for matching on the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } => source.root(),
            e => e,
        }
    }
}
