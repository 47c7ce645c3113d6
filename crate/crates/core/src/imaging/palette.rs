//! Dominant-color palette by K-means over foreground RGB values.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{rgb_at, Mask};

pub const MAX_ITERATIONS: usize = 100;
pub const MOVEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub rgb: [f64; 3],
    /// Fraction of foreground pixels assigned to this color.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorPalette {
    pub entries: Vec<PaletteEntry>,
}

impl ColorPalette {
    pub fn k(&self) -> usize {
        self.entries.len()
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

pub(crate) struct KMeans {
    pub centroids: Vec<[f64; 3]>,
    pub counts: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    #[allow(dead_code)]
    pub inertia: Vec<f64>,
}

fn nearest(p: &[f64; 3], centroids: &[[f64; 3]]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, dist2(p, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// k-means++ seeding followed by Lloyd iterations.
pub(crate) fn kmeans(points: &[[f64; 3]], k: usize, seed: u64) -> KMeans {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![0usize; points.len()];
    let mut counts = vec![0usize; k];
    let mut inertia = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut sse = 0.0;
        for (a, p) in assign.iter_mut().zip(points) {
            let (j, d) = nearest(p, &centroids);
            *a = j;
            sse += d;
        }
        inertia.push(sse);

        let mut sums = vec![[0.0; 3]; k];
        counts.iter_mut().for_each(|c| *c = 0);
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for i in 0..3 {
                sums[a][i] += p[i];
            }
        }
        let mut movement = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                // an empty cluster keeps its centroid
                continue;
            }
            let c = sums[j].map(|s| s / counts[j] as f64);
            movement = movement.max(dist2(&c, &centroids[j]).sqrt());
            centroids[j] = c;
        }
        if movement < MOVEMENT_TOLERANCE {
            break;
        }
    }
    // final assignment against the converged centroids
    counts.iter_mut().for_each(|c| *c = 0);
    for p in points {
        counts[nearest(p, &centroids).0] += 1;
    }
    KMeans {
        centroids,
        counts,
        inertia,
    }
}

/// Extracts a `k`-color palette from the foreground pixels of `image`.
pub fn extract_palette(image: &RgbImage, mask: &Mask, k: usize, seed: u64) -> Result<ColorPalette> {
    if k == 0 {
        return Err(Error::Config("palette size k must be at least 1".into()));
    }
    let points: Vec<[f64; 3]> = mask.pixels().map(|(x, y)| rgb_at(image, x, y)).collect();
    if points.is_empty() {
        return Err(Error::EmptyMask);
    }
    if k > points.len() {
        return Err(Error::Config(format!(
            "palette size {k} exceeds foreground pixel count {}",
            points.len()
        )));
    }
    let km = kmeans(&points, k, seed);
    let total = points.len() as f64;
    Ok(ColorPalette {
        entries: km
            .centroids
            .into_iter()
            .zip(km.counts)
            .map(|(rgb, n)| PaletteEntry {
                rgb,
                weight: n as f64 / total,
            })
            .collect(),
    })
}
