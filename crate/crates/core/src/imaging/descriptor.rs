use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{rgb_at, Mask};

/// Side of the occupancy grid used by the shape descriptor.
pub const SHAPE_GRID: usize = 16;
pub const SHAPE_DIM: usize = SHAPE_GRID * SHAPE_GRID;
pub const COLOR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Shape,
    Color,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Shape, Modality::Color];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Shape => "shape",
            Modality::Color => "color",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Modality::Shape => SHAPE_DIM,
            Modality::Color => COLOR_DIM,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shape" => Ok(Modality::Shape),
            "color" => Ok(Modality::Color),
            other => Err(Error::MissingModality(other.to_string())),
        }
    }
}

/// A fixed-dimension vector describing one design along one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityEmbedding {
    pub modality: Modality,
    pub vector: Vec<f64>,
}

/// RGB in `[0,1]` to (hue in radians, saturation, value).
pub(crate) fn rgb_to_hsv(c: [f64; 3]) -> (f64, f64, f64) {
    let [r, g, b] = c;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, max);
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    (sector * std::f64::consts::FRAC_PI_3, s, max)
}

/// Mean over foreground pixels of `(s·cos h, s·sin h, s, v)`.
pub fn color_descriptor(image: &RgbImage, mask: &Mask) -> Result<ModalityEmbedding> {
    let mut acc = [0.0; COLOR_DIM];
    let mut n = 0usize;
    for (x, y) in mask.pixels() {
        let (h, s, v) = rgb_to_hsv(rgb_at(image, x, y));
        acc[0] += s * h.cos();
        acc[1] += s * h.sin();
        acc[2] += s;
        acc[3] += v;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(ModalityEmbedding {
        modality: Modality::Color,
        vector: acc.iter().map(|v| v / n as f64).collect(),
    })
}

/// Overlap of source pixel `i` (of `len` pixels) with each grid cell, in grid units.
fn cell_weights(len: u32) -> Vec<Vec<(usize, f64)>> {
    let scale = SHAPE_GRID as f64 / f64::from(len);
    (0..len)
        .map(|i| {
            let (a, b) = (f64::from(i) * scale, f64::from(i + 1) * scale);
            let first = a.floor() as usize;
            let last = ((b.ceil() as usize).max(first + 1)).min(SHAPE_GRID);
            (first..last)
                .filter_map(|c| {
                    let overlap = b.min((c + 1) as f64) - a.max(c as f64);
                    (overlap > 0.0).then_some((c, overlap))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted 16×16 occupancy of the mask's bounding box, row-major.
pub fn shape_descriptor(mask: &Mask) -> Result<ModalityEmbedding> {
    let bb = mask.bounding_box().ok_or(Error::EmptyMask)?;
    let cols = cell_weights(bb.width());
    let rows = cell_weights(bb.height());
    let mut grid = vec![0.0; SHAPE_DIM];
    for y in bb.y0..=bb.y1 {
        let rw = &rows[(y - bb.y0) as usize];
        for x in bb.x0..=bb.x1 {
            if !mask.get(x, y) {
                continue;
            }
            for &(ci, wy) in rw {
                for &(cj, wx) in &cols[(x - bb.x0) as usize] {
                    grid[ci * SHAPE_GRID + cj] += wy * wx;
                }
            }
        }
    }
    grid.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(ModalityEmbedding {
        modality: Modality::Shape,
        vector: grid,
    })
}
