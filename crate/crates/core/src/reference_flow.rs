//! Built-in dense optical flow: coarse-to-fine Horn–Schunck.
//!
//! Each pyramid level warps the second frame by the current estimate,
//! linearises brightness constancy around it, and runs a fixed number of
//! synchronous Jacobi sweeps on the total flow. Borders are handled by
//! half-sample reflection for derivatives and averaging, and by clamping for
//! bilinear lookups. The result is deterministic for fixed inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_io::FlowField;
use crate::image_io::GrayscaleImage;

/// Smallest frame side accepted by [`estimate_flow`].
pub const MIN_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsParams {
    pub alpha: f64,
    pub iterations: usize,
    pub pyramid_levels: usize,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            iterations: 200,
            pyramid_levels: 3,
        }
    }
}

impl HsParams {
    pub fn new(alpha: f64, iterations: usize, pyramid_levels: usize) -> Result<Self> {
        let p = Self {
            alpha,
            iterations,
            pyramid_levels,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if self.pyramid_levels == 0 || self.pyramid_levels > 30 {
            return Err(Error::InvalidParameter(format!(
                "pyramid_levels must lie in 1..=30, got {}",
                self.pyramid_levels
            )));
        }
        Ok(())
    }

    fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        let factor = 1usize << (self.pyramid_levels - 1);
        if factor > width.min(height) {
            return Err(Error::InvalidParameter(format!(
                "{} pyramid levels need frames of at least {factor} pixels per side, got {width}x{height}",
                self.pyramid_levels
            )));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

impl Plane {
    fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    fn from_image(img: &GrayscaleImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.pixels().iter().map(|&p| p as f64).collect(),
        }
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> f64 {
        self.data[reflect(y, self.height) * self.width + reflect(x, self.width)]
    }

    /// Bilinear lookup with coordinates clamped to the pixel grid.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = self.data[row0 + x0] * (1.0 - fx) + self.data[row0 + x1] * fx;
        let bottom = self.data[row1 + x0] * (1.0 - fx) + self.data[row1 + x1] * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn map_pixels(&self, f: impl Fn(isize, isize) -> f64 + Sync) -> Plane {
        let w = self.width;
        let mut data = vec![0.0; w * self.height];
        data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                *out = f(x as isize, y as isize);
            }
        });
        Plane {
            width: w,
            height: self.height,
            data,
        }
    }

    /// 1-4-6-4-1 binomial blur, separable.
    fn blur(&self) -> Plane {
        const K: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
        let horiz = self.map_pixels(|x, y| {
            (-2..=2).map(|d| K[(d + 2) as usize] * self.at(x + d, y)).sum::<f64>() / 16.0
        });
        horiz.map_pixels(|x, y| {
            (-2..=2).map(|d| K[(d + 2) as usize] * horiz.at(x, y + d)).sum::<f64>() / 16.0
        })
    }

    /// Resamples onto a `width x height` grid with pixel centres aligned.
    fn resample(&self, width: usize, height: usize) -> Plane {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let target = Plane::zeros(width, height);
        target.map_pixels(|x, y| {
            self.sample((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
        })
    }

    fn downsample(&self) -> Plane {
        self.blur()
            .resample(self.width.div_ceil(2), self.height.div_ceil(2))
    }

    fn dx(&self) -> Plane {
        self.map_pixels(|x, y| 0.5 * (self.at(x + 1, y) - self.at(x - 1, y)))
    }

    fn dy(&self) -> Plane {
        self.map_pixels(|x, y| 0.5 * (self.at(x, y + 1) - self.at(x, y - 1)))
    }

    /// Horn–Schunck neighbourhood average: 1/6 for edge neighbours, 1/12 for
    /// corners.
    #[inline]
    fn local_mean(&self, x: isize, y: isize) -> f64 {
        let edges = self.at(x - 1, y) + self.at(x + 1, y) + self.at(x, y - 1) + self.at(x, y + 1);
        let corners = self.at(x - 1, y - 1)
            + self.at(x + 1, y - 1)
            + self.at(x - 1, y + 1)
            + self.at(x + 1, y + 1);
        edges / 6.0 + corners / 12.0
    }
}

fn pyramid(base: Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![base];
    for _ in 1..levels {
        let next = out.last().expect("non-empty").downsample();
        out.push(next);
    }
    out
}

/// Refines `(u, v)` on one level in place.
fn refine_level(a: &Plane, b: &Plane, u: &mut Plane, v: &mut Plane, params: &HsParams) {
    let warped = u.map_pixels(|x, y| {
        let i = y as usize * u.width + x as usize;
        b.sample(x as f64 + u.data[i], y as f64 + v.data[i])
    });
    let (ax, ay) = (a.dx(), a.dy());
    let (bx, by) = (warped.dx(), warped.dy());
    let n = a.data.len();
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut offset = vec![0.0; n];
    let mut denom = vec![0.0; n];
    let alpha2 = params.alpha * params.alpha;
    for i in 0..n {
        ix[i] = 0.5 * (ax.data[i] + bx.data[i]);
        iy[i] = 0.5 * (ay.data[i] + by.data[i]);
        let it = warped.data[i] - a.data[i];
        // Linearised around the incoming estimate (u0, v0).
        offset[i] = it - ix[i] * u.data[i] - iy[i] * v.data[i];
        denom[i] = alpha2 + ix[i] * ix[i] + iy[i] * iy[i];
    }

    let w = u.width;
    let mut next_u = u.clone();
    let mut next_v = v.clone();
    for _ in 0..params.iterations {
        {
            let (cur_u, cur_v) = (&*u, &*v);
            next_u
                .data
                .par_chunks_mut(w)
                .zip(next_v.data.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (row_u, row_v))| {
                    for x in 0..w {
                        let i = y * w + x;
                        let mu = cur_u.local_mean(x as isize, y as isize);
                        let mv = cur_v.local_mean(x as isize, y as isize);
                        let t = (ix[i] * mu + iy[i] * mv + offset[i]) / denom[i];
                        row_u[x] = mu - ix[i] * t;
                        row_v[x] = mv - iy[i] * t;
                    }
                });
        }
        std::mem::swap(u, &mut next_u);
        std::mem::swap(v, &mut next_v);
    }
}

/// Upsamples a flow component to `width x height`, rescaling displacements.
fn upsample_component(p: &Plane, width: usize, height: usize, scale: f64) -> Plane {
    let mut out = p.resample(width, height);
    for d in &mut out.data {
        *d *= scale;
    }
    out
}

/// Dense flow from `frame_a` to `frame_b`: a pixel at `(x, y)` in `frame_a`
/// appears at `(x + u, y + v)` in `frame_b`.
pub fn estimate_flow(
    frame_a: &GrayscaleImage,
    frame_b: &GrayscaleImage,
    params: &HsParams,
) -> Result<FlowField> {
    if frame_a.dims() != frame_b.dims() {
        return Err(Error::dims(frame_a.dims(), frame_b.dims()));
    }
    let (width, height) = frame_a.dims();
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::TooSmall {
            width,
            height,
            min: MIN_SIDE,
        });
    }
    params.validate_for(width, height)?;

    let pa = pyramid(Plane::from_image(frame_a), params.pyramid_levels);
    let pb = pyramid(Plane::from_image(frame_b), params.pyramid_levels);

    let coarsest = pa.last().expect("non-empty");
    let mut u = Plane::zeros(coarsest.width, coarsest.height);
    let mut v = Plane::zeros(coarsest.width, coarsest.height);
    for level in (0..params.pyramid_levels).rev() {
        let (a, b) = (&pa[level], &pb[level]);
        if u.width != a.width || u.height != a.height {
            let sx = a.width as f64 / u.width as f64;
            let sy = a.height as f64 / u.height as f64;
            u = upsample_component(&u, a.width, a.height, sx);
            v = upsample_component(&v, a.width, a.height, sy);
        }
        refine_level(a, b, &mut u, &mut v, params);
    }

    let vectors = u
        .data
        .iter()
        .zip(&v.data)
        .map(|(&du, &dv)| [du as f32, dv as f32])
        .collect();
    FlowField::new(width, height, vectors)
}

/// One field per consecutive frame pair `(i, i + 1)`.
pub fn estimate_clip_flows(frames: &[GrayscaleImage], params: &HsParams) -> Result<Vec<FlowField>> {
    if frames.len() < 2 {
        return Err(Error::EmptyClip);
    }
    let dims = frames[0].dims();
    if let Some(bad) = frames.iter().find(|f| f.dims() != dims) {
        return Err(Error::dims(dims, bad.dims()));
    }
    frames
        .par_windows(2)
        .map(|pair| estimate_flow(&pair[0], &pair[1], params))
        .collect()
}
