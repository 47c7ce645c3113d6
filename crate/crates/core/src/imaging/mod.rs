//! Modality evaluators and image measurements: foreground masks, shape and
//! color descriptors, palette extraction, and concept scoring primitives.

mod descriptor;
mod filter;
mod mask;
mod palette;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{rgb_at, Mask};

pub use descriptor::{
    color_descriptor, shape_descriptor, Modality, ModalityEmbedding, COLOR_DIM, SHAPE_DIM,
    SHAPE_GRID,
};
pub use mask::{compute_mask, compute_mask_with, MaskParams};
pub use palette::{extract_palette, ColorPalette, PaletteEntry};

/// Bounding-box width divided by height of the foreground.
pub fn aspect_ratio(mask: &Mask) -> Result<f64> {
    let bb = mask.bounding_box().ok_or(Error::EmptyMask)?;
    Ok(f64::from(bb.width()) / f64::from(bb.height()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Blue,
}

/// Mean over foreground pixels of the scored channel minus the larger of the
/// other two. Ranges over `[-1, 1]`.
pub fn channel_dominance(image: &RgbImage, mask: &Mask, channel: Channel) -> Result<f64> {
    let (own, a, b) = match channel {
        Channel::Red => (0, 1, 2),
        Channel::Blue => (2, 0, 1),
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for (x, y) in mask.pixels() {
        let c = rgb_at(image, x, y);
        sum += c[own] - c[a].max(c[b]);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}
