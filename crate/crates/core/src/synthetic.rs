//! Synthetic clips with exactly known flow, motion masks and detector output.
//!
//! Sprites and the background translate by whole pixels per frame, so the
//! generating flow is piecewise constant and every mask is exact. Textures
//! are sums of seeded sinusoids, smooth enough for the reference estimator.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_io::{write_flo, FlowField};
use crate::image_io::{mask_to_image, write_pgm, BinaryMask, GrayscaleImage};
use crate::segmentation::combine_masks;

/// Whole-pixel displacement per frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Velocity {
    pub dx: i32,
    pub dy: i32,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }

    pub fn is_zero(&self) -> bool {
        self.dx == 0 && self.dy == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Anchored at its top-left corner.
    Rectangle { width: usize, height: usize },
    /// Anchored at its centre; covers pixels within `radius` (inclusive).
    Disc { radius: usize },
}

impl Shape {
    /// Inclusive pixel bounds relative to the anchor.
    fn extent(&self) -> (i64, i64, i64, i64) {
        match *self {
            Shape::Rectangle { width, height } => (0, 0, width as i64 - 1, height as i64 - 1),
            Shape::Disc { radius } => {
                let r = radius as i64;
                (-r, -r, r, r)
            }
        }
    }

    fn contains(&self, dx: i64, dy: i64) -> bool {
        match *self {
            Shape::Rectangle { width, height } => {
                dx >= 0 && dy >= 0 && dx < width as i64 && dy < height as i64
            }
            Shape::Disc { radius } => {
                let r = radius as i64;
                dx * dx + dy * dy <= r * r
            }
        }
    }

    pub fn area(&self) -> usize {
        let (x0, y0, x1, y1) = self.extent();
        let mut n = 0;
        for dy in y0..=y1 {
            for dx in x0..=x1 {
                n += self.contains(dx, dy) as usize;
            }
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sprite {
    pub shape: Shape,
    /// Anchor position at frame 0.
    pub position: (i64, i64),
    #[serde(default)]
    pub velocity: Velocity,
    /// Base intensity; defaults to a per-index palette entry.
    #[serde(default)]
    pub intensity: Option<u8>,
}

impl Sprite {
    fn anchor_at(&self, frame: usize) -> (i64, i64) {
        let t = frame as i64;
        (
            self.position.0 + t * self.velocity.dx as i64,
            self.position.1 + t * self.velocity.dy as i64,
        )
    }
}

/// A spurious detection injected into one frame's detector output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledArtifact {
    pub frame_index: usize,
    pub shape: Shape,
    pub position: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub background_velocity: Velocity,
    #[serde(default)]
    pub sprites: Vec<Sprite>,
    pub frame_count: usize,
    #[serde(default)]
    pub artifact_schedule: Vec<ScheduledArtifact>,
    #[serde(default = "default_noise")]
    pub noise_amplitude: u8,
}

fn default_noise() -> u8 {
    40
}

const SPRITE_PALETTE: [u8; 8] = [40, 210, 80, 170, 20, 235, 60, 190];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub frames: Vec<GrayscaleImage>,
    /// `true_flows[i]` carries frame `i` to frame `i + 1`.
    pub true_flows: Vec<FlowField>,
    /// Visible sprite pixels with non-zero velocity, one mask per frame.
    pub true_masks: Vec<BinaryMask>,
    /// Per-frame, per-object masks: one per moving sprite plus scheduled
    /// artifacts.
    pub detector_masks: Vec<Vec<BinaryMask>>,
}

impl SyntheticClip {
    /// Union of each frame's detector masks.
    pub fn segmentation_masks(&self) -> Vec<BinaryMask> {
        let dims = self.frames[0].dims();
        self.detector_masks
            .iter()
            .map(|objs| combine_masks(dims, objs).expect("fixture masks share dimensions"))
            .collect()
    }

    /// Writes `frames/`, `flows/`, `true_masks/` and `detections/<frame>/`
    /// under `dir`, using the file names the CLI expects.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        let sub = |name: &str| -> Result<std::path::PathBuf> {
            let p = dir.join(name);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            Ok(p)
        };
        let write = |path: std::path::PathBuf, bytes: Vec<u8>| -> Result<()> {
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
        };
        let frames = sub("frames")?;
        let flows = sub("flows")?;
        let truth = sub("true_masks")?;
        let dets = sub("detections")?;
        for (i, f) in self.frames.iter().enumerate() {
            write(frames.join(frame_name(i, "pgm")), write_pgm(f))?;
        }
        for (i, f) in self.true_flows.iter().enumerate() {
            write(flows.join(frame_name(i, "flo")), write_flo(f))?;
        }
        for (i, m) in self.true_masks.iter().enumerate() {
            write(truth.join(frame_name(i, "pgm")), write_pgm(&mask_to_image(m)))?;
        }
        for (i, objs) in self.detector_masks.iter().enumerate() {
            let d = dets.join(format!("frame_{i:06}"));
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            for (k, m) in objs.iter().enumerate() {
                write(d.join(format!("object_{k:02}.pgm")), write_pgm(&mask_to_image(m)))?;
            }
        }
        Ok(())
    }
}

pub fn frame_name(index: usize, ext: &str) -> String {
    format!("frame_{index:06}.{ext}")
}

struct Texture {
    waves: Vec<[f64; 4]>,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let n = 6;
        let waves = (0..n)
            .map(|_| {
                let wavelength = rng.random_range(6.0..20.0);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / wavelength;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                [k * theta.cos(), k * theta.sin(), phase, 1.0 / n as f64]
            })
            .collect();
        Self { waves }
    }

    /// Value in [-1, 1].
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .map(|[kx, ky, phase, weight]| weight * (kx * x + ky * y + phase).sin())
            .sum()
    }
}

fn check_inside(spec: &SceneSpec, shape: &Shape, anchor: (i64, i64), what: &str, frame: usize) -> Result<()> {
    let (x0, y0, x1, y1) = shape.extent();
    let inside = anchor.0 + x0 >= 0
        && anchor.1 + y0 >= 0
        && anchor.0 + x1 < spec.width as i64
        && anchor.1 + y1 < spec.height as i64;
    if inside {
        Ok(())
    } else {
        Err(Error::SpriteOutOfBounds {
            what: what.to_string(),
            frame,
        })
    }
}

fn validate(spec: &SceneSpec) -> Result<()> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::NonPositiveDimensions {
            width: spec.width as i64,
            height: spec.height as i64,
        });
    }
    if spec.frame_count < 2 {
        return Err(Error::InvalidParameter(format!(
            "frame_count must be at least 2, got {}",
            spec.frame_count
        )));
    }
    for (k, s) in spec.sprites.iter().enumerate() {
        if s.shape.area() == 0 {
            return Err(Error::InvalidParameter(format!("sprite {k} is empty")));
        }
        for t in 0..spec.frame_count {
            check_inside(spec, &s.shape, s.anchor_at(t), &format!("sprite {k}"), t)?;
        }
    }
    for (k, a) in spec.artifact_schedule.iter().enumerate() {
        if a.frame_index >= spec.frame_count {
            return Err(Error::InvalidParameter(format!(
                "artifact {k} scheduled at frame {} of a {}-frame clip",
                a.frame_index, spec.frame_count
            )));
        }
        if a.shape.area() == 0 {
            return Err(Error::InvalidParameter(format!("artifact {k} is empty")));
        }
        check_inside(spec, &a.shape, a.position, &format!("artifact {k}"), a.frame_index)?;
    }
    Ok(())
}

/// Index of the topmost sprite covering each pixel at `frame`.
fn ownership(spec: &SceneSpec, frame: usize) -> Vec<Option<usize>> {
    let mut owner = vec![None; spec.width * spec.height];
    for (k, s) in spec.sprites.iter().enumerate() {
        paint(spec, &s.shape, s.anchor_at(frame), |i| owner[i] = Some(k));
    }
    owner
}

fn paint(spec: &SceneSpec, shape: &Shape, anchor: (i64, i64), mut f: impl FnMut(usize)) {
    let (x0, y0, x1, y1) = shape.extent();
    for dy in y0..=y1 {
        for dx in x0..=x1 {
            if shape.contains(dx, dy) {
                let (x, y) = ((anchor.0 + dx) as usize, (anchor.1 + dy) as usize);
                f(y * spec.width + x);
            }
        }
    }
}

pub fn render_clip(spec: &SceneSpec, seed: u64) -> Result<SyntheticClip> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = Texture::random(&mut rng);
    let sprite_textures: Vec<Texture> = spec.sprites.iter().map(|_| Texture::random(&mut rng)).collect();
    let amplitude = spec.noise_amplitude as f64;
    let (w, h) = (spec.width, spec.height);
    let bg = spec.background_velocity;

    let mut frames = Vec::with_capacity(spec.frame_count);
    let mut true_flows = Vec::with_capacity(spec.frame_count - 1);
    let mut true_masks = Vec::with_capacity(spec.frame_count);
    let mut detector_masks = Vec::with_capacity(spec.frame_count);

    for t in 0..spec.frame_count {
        let owner = ownership(spec, t);
        let tf = t as f64;
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let value = match owner[y * w + x] {
                    None => {
                        let bx = x as f64 - tf * bg.dx as f64;
                        let by = y as f64 - tf * bg.dy as f64;
                        128.0 + amplitude * background.eval(bx, by)
                    }
                    Some(k) => {
                        let s = &spec.sprites[k];
                        let (ax, ay) = s.anchor_at(t);
                        let base = s.intensity.unwrap_or(SPRITE_PALETTE[k % SPRITE_PALETTE.len()]);
                        let local = sprite_textures[k].eval((x as i64 - ax) as f64, (y as i64 - ay) as f64);
                        base as f64 + 0.5 * amplitude * local
                    }
                };
                pixels.push(value.round().clamp(0.0, 255.0) as u8);
            }
        }
        frames.push(GrayscaleImage::new(w, h, pixels)?);

        let moving = |i: usize| owner[i].is_some_and(|k| !spec.sprites[k].velocity.is_zero());
        true_masks.push(BinaryMask::new(w, h, (0..w * h).map(moving).collect())?);

        let mut objects = Vec::new();
        for (k, s) in spec.sprites.iter().enumerate() {
            if s.velocity.is_zero() {
                continue;
            }
            let bits = owner.iter().map(|&o| o == Some(k)).collect();
            objects.push(BinaryMask::new(w, h, bits)?);
        }
        for a in spec.artifact_schedule.iter().filter(|a| a.frame_index == t) {
            let mut bits = vec![false; w * h];
            paint(spec, &a.shape, a.position, |i| bits[i] = true);
            objects.push(BinaryMask::new(w, h, bits)?);
        }
        detector_masks.push(objects);

        if t + 1 < spec.frame_count {
            let vectors = owner
                .iter()
                .map(|&o| {
                    let v = o.map_or(bg, |k| spec.sprites[k].velocity);
                    [v.dx as f32, v.dy as f32]
                })
                .collect();
            true_flows.push(FlowField::new(w, h, vectors)?);
        }
    }

    Ok(SyntheticClip {
        frames,
        true_flows,
        true_masks,
        detector_masks,
    })
}
