//! Independent reference computations shared by the integration suites.
//! Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use flowmask::{BinaryMask, FlowField, GrayscaleImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(rng: &mut ChaCha8Rng, width: usize, height: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |_, _| rng.random_bool(density)).unwrap()
}

/// Per-pixel `(tp, fp, tn, fn)` recount with explicit coordinates.
pub fn naive_confusion(truth: &BinaryMask, pred: &BinaryMask) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut tn, mut fnn) = (0, 0, 0, 0);
    for y in 0..truth.height() {
        for x in 0..truth.width() {
            match (truth.get(x, y), pred.get(x, y)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fnn += 1,
            }
        }
    }
    (tp, fp, tn, fnn)
}

pub fn naive_iou(truth: &BinaryMask, pred: &BinaryMask) -> f64 {
    let (tp, fp, _, fnn) = naive_confusion(truth, pred);
    if tp + fp + fnn == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp + fnn) as f64
    }
}

/// Recursive flood fill; each component is a set of `(x, y)`.
pub fn flood_fill_components(mask: &BinaryMask, eight: bool) -> BTreeSet<BTreeSet<(usize, usize)>> {
    fn visit(
        mask: &BinaryMask,
        eight: bool,
        seen: &mut Vec<bool>,
        x: usize,
        y: usize,
        out: &mut BTreeSet<(usize, usize)>,
    ) {
        let i = y * mask.width() + x;
        if seen[i] || !mask.get(x, y) {
            return;
        }
        seen[i] = true;
        out.insert((x, y));
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < mask.width() && (ny as usize) < mask.height() {
                    visit(mask, eight, seen, nx as usize, ny as usize, out);
                }
            }
        }
    }
    let mut seen = vec![false; mask.width() * mask.height()];
    let mut comps = BTreeSet::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let mut comp = BTreeSet::new();
            visit(mask, eight, &mut seen, x, y, &mut comp);
            if !comp.is_empty() {
                comps.insert(comp);
            }
        }
    }
    comps
}

/// Partition induced by a label image (0 = background).
pub fn partition_from_labels(labels: &[u32], width: usize) -> BTreeSet<BTreeSet<(usize, usize)>> {
    let mut by_label: std::collections::BTreeMap<u32, BTreeSet<(usize, usize)>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            by_label.entry(l).or_default().insert((i % width, i / width));
        }
    }
    by_label.into_values().collect()
}

/// Smooth texture: a seeded sum of sinusoids with wavelengths of 8–24 px,
/// spanning roughly 30..225.
pub fn smooth_texture(seed: u64, width: usize, height: usize) -> GrayscaleImage {
    let mut r = rng(seed);
    let waves: Vec<[f64; 3]> = (0..5)
        .map(|_| {
            let wavelength: f64 = r.random_range(8.0..24.0);
            let theta: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let k = std::f64::consts::TAU / wavelength;
            [k * theta.cos(), k * theta.sin(), r.random_range(0.0..std::f64::consts::TAU)]
        })
        .collect();
    let mut px = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let s: f64 = waves
                .iter()
                .map(|[kx, ky, p]| (kx * x as f64 + ky * y as f64 + p).sin())
                .sum::<f64>()
                / waves.len() as f64;
            px.push((128.0 + 95.0 * s).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayscaleImage::new(width, height, px).unwrap()
}

/// `dst(x, y) = src(x - dx, y - dy)` with half-sample reflection at the
/// borders: content moves by `(dx, dy)`.
pub fn translate(src: &GrayscaleImage, dx: i64, dy: i64) -> GrayscaleImage {
    let refl = |i: i64, n: usize| -> usize {
        let n = n as i64;
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
    };
    let (w, h) = src.dims();
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            px.push(src.get(refl(x - dx, w), refl(y - dy, h)));
        }
    }
    GrayscaleImage::new(w, h, px).unwrap()
}

/// Mean endpoint error against a constant field, skipping a `border`-pixel
/// frame.
pub fn interior_epe(field: &FlowField, truth: (f64, f64), border: usize) -> f64 {
    let (w, h) = field.dims();
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in border..h - border {
        for x in border..w - border {
            let [u, v] = field.get(x, y);
            sum += ((u as f64 - truth.0).powi(2) + (v as f64 - truth.1).powi(2)).sqrt();
            n += 1;
        }
    }
    sum / n as f64
}

pub fn max_magnitude(field: &FlowField) -> f64 {
    field
        .vectors()
        .iter()
        .map(|&[u, v]| ((u as f64).powi(2) + (v as f64).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

/// Sum of absolute forward differences of both components.
pub fn total_variation(field: &FlowField) -> f64 {
    let (w, h) = field.dims();
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            let [u, v] = field.get(x, y);
            if x + 1 < w {
                let [u2, v2] = field.get(x + 1, y);
                tv += (u2 - u).abs() as f64 + (v2 - v).abs() as f64;
            }
            if y + 1 < h {
                let [u2, v2] = field.get(x, y + 1);
                tv += (u2 - u).abs() as f64 + (v2 - v).abs() as f64;
            }
        }
    }
    tv
}
