use image::{Rgb, RgbImage};

use super::{BodyShape, DesignParams};
use crate::raster::{quantize, ImageSize, Mask};

/// Blank border kept around the drawable square.
const MARGIN: u32 = 2;
/// Cap width as a fraction of the drawable square; caps are a standard size
/// regardless of the bottle they sit on.
const CAP_WIDTH_FRAC: f64 = 0.15;
/// Largest per-row desaturation applied by the decoration texture.
const TEXTURE_AMPLITUDE: f64 = 0.08;
/// Fraction of a trapezoid body kept rectangular at its base.
const TRAPEZOID_BASE: f64 = 0.2;
const TRAPEZOID_TOP_WIDTH: f64 = 0.6;
const CORNER_RADIUS_FRAC: f64 = 0.25;

/// Pixel-grid placement of a bottle on the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub left: u32,
    pub top: u32,
    pub width: u32,
    pub height: u32,
    pub cap_width: u32,
    pub cap_height: u32,
}

/// Side of the square region bottles are drawn into.
pub(crate) fn drawable_side(size: ImageSize) -> u32 {
    size.width.min(size.height) - 2 * MARGIN
}

pub(crate) fn layout(params: &DesignParams, size: ImageSize) -> Layout {
    let side = drawable_side(size);
    let sf = f64::from(side);
    let width = ((params.width_frac * sf).round() as u32).clamp(1, side);
    let height = ((params.height_frac * sf).round() as u32).clamp(2, side);
    let left = (size.width - width) / 2;
    let top = (size.height - height) / 2;
    // cap proportions follow the bottle's overall height
    let hf = f64::from(height);
    let cap_height = ((params.cap_height_frac * hf).round() as u32).clamp(1, height - 1);
    let mut cap_width = ((CAP_WIDTH_FRAC * hf).round() as u32).clamp(1, width);
    if (width - cap_width) % 2 == 1 {
        // keep the cap centered on whole pixels
        cap_width = if cap_width < width { cap_width + 1 } else { cap_width - 1 };
    }
    Layout {
        left,
        top,
        width,
        height,
        cap_width,
        cap_height,
    }
}

impl Layout {
    fn in_cap(&self, x: u32, y: u32) -> bool {
        let cx0 = self.left + (self.width - self.cap_width) / 2;
        y >= self.top && y < self.top + self.cap_height && x >= cx0 && x < cx0 + self.cap_width
    }

    fn in_body(&self, shape: BodyShape, x: u32, y: u32) -> bool {
        let x0 = f64::from(self.left);
        let x1 = f64::from(self.left + self.width);
        let y0 = f64::from(self.top + self.cap_height);
        let y1 = f64::from(self.top + self.height);
        let (px, py) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
        if px < x0 || px > x1 || py < y0 || py > y1 {
            return false;
        }
        let (w, h) = (x1 - x0, y1 - y0);
        let (cx, cy) = (x0 + 0.5 * w, y0 + 0.5 * h);
        match shape {
            BodyShape::Rectangle => true,
            BodyShape::Ellipse | BodyShape::CircleBody => {
                let dx = (px - cx) / (0.5 * w);
                let dy = (py - cy) / (0.5 * h);
                dx * dx + dy * dy <= 1.0
            }
            BodyShape::Trapezoid => {
                let base_start = y1 - TRAPEZOID_BASE * h;
                if py >= base_start {
                    return true;
                }
                let t = (py - y0) / (base_start - y0);
                let half = 0.5 * w * (TRAPEZOID_TOP_WIDTH + (1.0 - TRAPEZOID_TOP_WIDTH) * t);
                (px - cx).abs() <= half
            }
            BodyShape::RoundedRect => {
                let r = CORNER_RADIUS_FRAC * w.min(h);
                let qx = (px - cx).abs() - (0.5 * w - r);
                let qy = (py - cy).abs() - (0.5 * h - r);
                if qx <= 0.0 || qy <= 0.0 {
                    return true;
                }
                qx * qx + qy * qy <= r * r
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-row desaturation amount in `[0, TEXTURE_AMPLITUDE]`.
fn row_texture(seed: u64, row: u32) -> f64 {
    let h = splitmix64(seed ^ splitmix64(u64::from(row)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * TEXTURE_AMPLITUDE
}

/// Pulls each channel toward the pixel's value (max channel) by `amount`;
/// the max channel is left untouched.
fn desaturate(c: [f64; 3], amount: f64) -> [f64; 3] {
    let v = c[0].max(c[1]).max(c[2]);
    c.map(|ch| ch + amount * (v - ch))
}

/// Renders `params` into an image, the full foreground mask, and the body-only mask.
pub(crate) fn render_layers(params: &DesignParams, size: ImageSize) -> (RgbImage, Mask, Mask) {
    let lay = layout(params, size);
    let mut image = RgbImage::from_pixel(size.width, size.height, Rgb([255, 255, 255]));
    let mut mask = Mask::new(size.width, size.height);
    let mut body = Mask::new(size.width, size.height);
    let cap = params.cap_color.map(quantize);
    for y in lay.top..lay.top + lay.height {
        let texture = row_texture(params.texture_seed, y - lay.top);
        let body_rgb = desaturate(params.body_color, texture).map(quantize);
        for x in lay.left..lay.left + lay.width {
            if lay.in_cap(x, y) {
                image.put_pixel(x, y, Rgb(cap));
                mask.set(x, y, true);
            } else if lay.in_body(params.body_shape, x, y) {
                image.put_pixel(x, y, Rgb(body_rgb));
                mask.set(x, y, true);
                body.set(x, y, true);
            }
        }
    }
    (image, mask, body)
}
