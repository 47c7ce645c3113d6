//! Foreground extraction: Canny edges, Gaussian-blurred into a barrier,
//! then a flood fill of the background from the image corners.

use std::collections::VecDeque;

use image::RgbImage;

use super::filter::{gaussian_blur, Plane};
use crate::error::{Error, Result};
use crate::raster::{rgb_at, Mask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Smoothing applied before gradient estimation.
    pub canny_sigma: f64,
    /// Hysteresis thresholds on gradient magnitude normalized by its image maximum.
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// Blur applied to the binary edge map.
    pub edge_blur_sigma: f64,
    /// Blurred-edge level that stops the background fill.
    pub barrier_level: f64,
    /// Pixels whose channels are all at least this bright count as background
    /// when trimming the fill up to the true silhouette.
    pub background_level: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            canny_sigma: 1.4,
            low_threshold: 0.1,
            high_threshold: 0.3,
            edge_blur_sigma: 1.0,
            barrier_level: 0.1,
            background_level: 0.9,
        }
    }
}

/// Computes the foreground mask of a design photographed on white.
pub fn compute_mask(image: &RgbImage) -> Result<Mask> {
    compute_mask_with(image, &MaskParams::default())
}

pub fn compute_mask_with(image: &RgbImage, params: &MaskParams) -> Result<Mask> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::NoForeground);
    }
    let edges = canny(image, params);
    let mut edge_plane = Plane::new(w, h);
    for (i, &e) in edges.iter().enumerate() {
        edge_plane.data[i] = if e { 1.0 } else { 0.0 };
    }
    let blurred = gaussian_blur(&edge_plane, params.edge_blur_sigma);

    let mut filled = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (x, y) in [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)] {
        let i = y * w + x;
        if blurred.data[i] < params.barrier_level && !filled[i] {
            filled[i] = true;
            queue.push_back(i);
        }
    }
    flood(&mut filled, &mut queue, w, h, |i| blurred.data[i] < params.barrier_level);

    // The barrier stops the fill a pixel or two short of the silhouette;
    // continue through background-colored pixels to reach it.
    let is_background = |i: usize| {
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        rgb_at(image, x, y).iter().all(|&c| c >= params.background_level)
    };
    queue.extend((0..w * h).filter(|&i| filled[i]));
    flood(&mut filled, &mut queue, w, h, is_background);

    let mask = Mask::from_fn(w as u32, h as u32, |x, y| !filled[y as usize * w + x as usize]);
    if mask.is_empty() {
        return Err(Error::NoForeground);
    }
    Ok(mask)
}

fn flood(
    filled: &mut [bool],
    queue: &mut VecDeque<usize>,
    w: usize,
    h: usize,
    passable: impl Fn(usize) -> bool,
) {
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let mut visit = |j: usize| {
            if !filled[j] && passable(j) {
                filled[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
}

/// Canny edge map over the color image. Per pixel, the channel with the
/// strongest Sobel response supplies magnitude and direction.
pub(crate) fn canny(image: &RgbImage, params: &MaskParams) -> Vec<bool> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut channels = [Plane::new(w, h), Plane::new(w, h), Plane::new(w, h)];
    for y in 0..h {
        for x in 0..w {
            let c = rgb_at(image, x as u32, y as u32);
            for k in 0..3 {
                channels[k].set(x, y, c[k]);
            }
        }
    }
    let smoothed = channels.map(|p| gaussian_blur(&p, params.canny_sigma));

    let mut mag = vec![0.0; w * h];
    let mut gxs = vec![0.0; w * h];
    let mut gys = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            for p in &smoothed {
                let a = |dx: isize, dy: isize| p.at_clamped(x + dx, y + dy);
                let gx = (a(1, -1) + 2.0 * a(1, 0) + a(1, 1)) - (a(-1, -1) + 2.0 * a(-1, 0) + a(-1, 1));
                let gy = (a(-1, 1) + 2.0 * a(0, 1) + a(1, 1)) - (a(-1, -1) + 2.0 * a(0, -1) + a(1, -1));
                let m = gx.hypot(gy);
                if m > mag[i] {
                    mag[i] = m;
                    gxs[i] = gx;
                    gys[i] = gy;
                }
            }
        }
    }
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max < 1e-9 {
        return vec![false; w * h];
    }
    mag.iter_mut().for_each(|m| *m /= max);

    // non-maximum suppression along the quantized gradient direction
    let mut thin = vec![0.0; w * h];
    let get = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m < params.low_threshold {
                continue;
            }
            let angle = gys[i].atan2(gxs[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (before, after) = (get(x - dx, y - dy), get(x + dx, y + dy));
            if m > before && m >= after {
                thin[i] = m;
            }
        }
    }

    // hysteresis, 8-connected growth from strong edges
    let mut edges = vec![false; w * h];
    let mut stack: Vec<usize> = (0..w * h)
        .filter(|&i| thin[i] >= params.high_threshold)
        .collect();
    for &i in &stack {
        edges[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && thin[j] >= params.low_threshold {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    edges
}
