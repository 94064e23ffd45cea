//! Frame-level segmentation masks and artifact regions.
//!
//! A detector emits one mask per object; the frame's segmentation mask is
//! their union. Pixels the detector claims but the flow mask does not are
//! false positives, and their connected components are reported as
//! artifact candidates.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image_io::{same_dims, BinaryMask};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRegion {
    pub area: usize,
    pub bounding_box: BoundingBox,
    /// Mean of member pixel coordinates `(x, y)`.
    pub centroid: (f64, f64),
}

/// Pixel-wise OR of `masks`. With no masks the result is empty at `dims`.
pub fn combine_masks(dims: (usize, usize), masks: &[BinaryMask]) -> Result<BinaryMask> {
    for m in masks {
        same_dims(dims, m.dims())?;
    }
    let mut bits = vec![false; dims.0 * dims.1];
    for m in masks {
        for (o, &b) in bits.iter_mut().zip(m.bits()) {
            *o |= b;
        }
    }
    BinaryMask::new(dims.0, dims.1, bits)
}

/// Labelled components of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabels {
    /// Row-major; 0 is background, `k > 0` belongs to `regions[k - 1]`.
    pub labels: Vec<u32>,
    pub regions: Vec<ArtifactRegion>,
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self {
            parent: Vec::new(),
            size: Vec::new(),
        }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Two-pass union-find labelling.
///
/// Regions are ordered by descending area, then by `(min_y, min_x)` of the
/// bounding box, then by the raster position of their first pixel.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabels {
    let (w, h) = mask.dims();
    const NONE: u32 = u32::MAX;
    let mut provisional = vec![NONE; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.bits()[i] {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut neighbours = [NONE; 4];
            if x > 0 {
                neighbours[0] = provisional[i - 1];
            }
            if y > 0 {
                neighbours[1] = provisional[i - w];
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        neighbours[2] = provisional[i - w - 1];
                    }
                    if x + 1 < w {
                        neighbours[3] = provisional[i - w + 1];
                    }
                }
            }
            let mut label = NONE;
            for &n in neighbours.iter().filter(|&&n| n != NONE) {
                if label == NONE {
                    label = n;
                } else {
                    sets.union(label, n);
                }
            }
            provisional[i] = if label == NONE { sets.make() } else { label };
        }
    }

    // Second pass: dense ids in raster order of first appearance.
    let mut dense = vec![NONE; sets.parent.len()];
    let mut acc: Vec<RegionAcc> = Vec::new();
    let mut labels = vec![0u32; w * h];
    for (i, &p) in provisional.iter().enumerate() {
        if p == NONE {
            continue;
        }
        let root = sets.find(p) as usize;
        if dense[root] == NONE {
            dense[root] = acc.len() as u32;
            acc.push(RegionAcc::new());
        }
        let id = dense[root];
        acc[id as usize].add(i % w, i / w);
        labels[i] = id;
    }

    let mut order: Vec<usize> = (0..acc.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&acc[a], &acc[b]);
        rb.area
            .cmp(&ra.area)
            .then((ra.min_y, ra.min_x).cmp(&(rb.min_y, rb.min_x)))
    });
    let mut rank = vec![0u32; acc.len()];
    for (r, &id) in order.iter().enumerate() {
        rank[id] = r as u32 + 1;
    }
    for (l, &p) in labels.iter_mut().zip(&provisional) {
        if p != NONE {
            *l = rank[*l as usize];
        }
    }
    let regions = order.iter().map(|&id| acc[id].finish()).collect();
    ComponentLabels { labels, regions }
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<ArtifactRegion> {
    label_components(mask, connectivity).regions
}

/// Connected components of `segmask AND NOT flowmask` with at least
/// `min_area` pixels.
pub fn artifact_candidates(
    segmask: &BinaryMask,
    flowmask: &BinaryMask,
    min_area: usize,
    connectivity: Connectivity,
) -> Result<Vec<ArtifactRegion>> {
    let fp = segmask.and_not(flowmask)?;
    let mut regions = connected_components(&fp, connectivity);
    regions.retain(|r| r.area >= min_area.max(1));
    Ok(regions)
}

struct RegionAcc {
    area: usize,
    min_x: usize,
    min_y: usize,
    max_x: usize,
    max_y: usize,
    sum_x: u64,
    sum_y: u64,
}

impl RegionAcc {
    fn new() -> Self {
        Self {
            area: 0,
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
            sum_x: 0,
            sum_y: 0,
        }
    }

    fn add(&mut self, x: usize, y: usize) {
        self.area += 1;
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
        self.sum_x += x as u64;
        self.sum_y += y as u64;
    }

    fn finish(&self) -> ArtifactRegion {
        let n = self.area as f64;
        ArtifactRegion {
            area: self.area,
            bounding_box: BoundingBox {
                min_x: self.min_x,
                min_y: self.min_y,
                max_x: self.max_x,
                max_y: self.max_y,
            },
            centroid: (self.sum_x as f64 / n, self.sum_y as f64 / n),
        }
    }
}
