//! Rule-based concepts a simulated user is interested in.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{render_body_mask, Catalog, DesignParams};
use crate::error::{Error, Result};
use crate::imaging::{aspect_ratio, channel_dominance, Channel};
use crate::raster::{ImageSize, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Concept {
    Red,
    Blue,
    Fat,
    Thin,
    CircleBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Larger scores are more positive.
    Above,
    Below,
}

impl Direction {
    /// Maps a raw score so that larger is always more positive.
    pub fn adjust(self, score: f64) -> f64 {
        match self {
            Direction::Above => score,
            Direction::Below => -score,
        }
    }
}

/// Share of the catalog that is always positive, and the expected share of
/// positives including the borderline band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceTarget {
    pub always: f64,
    pub average: f64,
}

impl Concept {
    pub const ALL: [Concept; 5] = [
        Concept::Red,
        Concept::Blue,
        Concept::Fat,
        Concept::Thin,
        Concept::CircleBody,
    ];
    /// The four tasks with published prevalence targets.
    pub const BENCHMARK: [Concept; 4] = [Concept::Red, Concept::Blue, Concept::Fat, Concept::Thin];

    pub fn name(self) -> &'static str {
        match self {
            Concept::Red => "red",
            Concept::Blue => "blue",
            Concept::Fat => "fat",
            Concept::Thin => "thin",
            Concept::CircleBody => "circle-body",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Concept::Thin => Direction::Below,
            _ => Direction::Above,
        }
    }

    pub fn target(self) -> PrevalenceTarget {
        let (always, average) = match self {
            Concept::Red => (0.055, 0.092),
            Concept::Blue => (0.005, 0.021),
            Concept::Fat => (0.07, 0.095),
            Concept::Thin => (0.036, 0.075),
            Concept::CircleBody => (0.05, 0.09),
        };
        PrevalenceTarget { always, average }
    }

    /// Raw concept score of one design.
    pub fn score(self, params: &DesignParams, size: ImageSize) -> Result<f64> {
        match self {
            Concept::CircleBody => circle_fraction(&render_body_mask(params, size)?),
            _ => {
                let (image, mask) = crate::catalog::render_design(params, size)?;
                match self {
                    Concept::Red => channel_dominance(&image, &mask, Channel::Red),
                    Concept::Blue => channel_dominance(&image, &mask, Channel::Blue),
                    _ => aspect_ratio(&mask),
                }
            }
        }
    }

    /// Scores for every catalog design, in catalog order.
    pub fn score_catalog(self, catalog: &Catalog) -> Result<Vec<f64>> {
        let size = catalog.image_size();
        catalog
            .entries()
            .par_iter()
            .map(|e| self.score(&e.params, size))
            .collect()
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Concept::ALL
            .into_iter()
            .find(|c| c.name() == s || (s == "circle_body" && *c == Concept::CircleBody))
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }
}

/// Fraction of mask pixels inside the circle centered on the mask centroid
/// with the mask's area.
pub fn circle_fraction(mask: &Mask) -> Result<f64> {
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in mask.pixels() {
        sx += f64::from(x);
        sy += f64::from(y);
    }
    let (cx, cy) = (sx / n as f64, sy / n as f64);
    let r2 = n as f64 / std::f64::consts::PI;
    let inside = mask
        .pixels()
        .filter(|&(x, y)| (f64::from(x) - cx).powi(2) + (f64::from(y) - cy).powi(2) <= r2)
        .count();
    Ok(inside as f64 / n as f64)
}
