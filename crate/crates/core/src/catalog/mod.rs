//! Procedural design catalog: parametric bottle renders standing in for a
//! pre-built database of product images.

mod render;
mod store;

use std::collections::HashMap;
use std::fmt;

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::{ImageSize, Mask};

pub use store::{image_path, load_catalog, save_catalog, Manifest, ManifestEntry, MANIFEST_FILE};

pub(crate) use render::drawable_side;

/// Smallest canvas edge accepted by [`generate_catalog`].
pub const MIN_IMAGE_SIDE: u32 = 64;
pub const DEFAULT_IMAGE_SIDE: u32 = 128;
pub const DEFAULT_CATALOG_SIZE: usize = 24_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignId(pub u32);

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyShape {
    Rectangle,
    Ellipse,
    Trapezoid,
    RoundedRect,
    CircleBody,
}

impl BodyShape {
    pub const ALL: [BodyShape; 5] = [
        BodyShape::Rectangle,
        BodyShape::Ellipse,
        BodyShape::Trapezoid,
        BodyShape::RoundedRect,
        BodyShape::CircleBody,
    ];
}

/// Generation parameters of one bottle. Rendering is a pure function of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub body_shape: BodyShape,
    /// Bottle width as a fraction of the drawable square.
    pub width_frac: f64,
    /// Bottle height (cap included) as a fraction of the drawable square.
    pub height_frac: f64,
    pub body_color: [f64; 3],
    pub cap_color: [f64; 3],
    /// Cap height as a fraction of the drawable square, capped at half the bottle.
    pub cap_height_frac: f64,
    pub texture_seed: u64,
}

impl DesignParams {
    pub fn validate(&self) -> Result<()> {
        let frac_ok = |v: f64| v > 0.0 && v <= 1.0;
        if !frac_ok(self.width_frac) {
            return Err(Error::InvalidParams(format!("width_frac {} not in (0,1]", self.width_frac)));
        }
        if !frac_ok(self.height_frac) {
            return Err(Error::InvalidParams(format!(
                "height_frac {} not in (0,1]",
                self.height_frac
            )));
        }
        if !(0.05..=0.3).contains(&self.cap_height_frac) {
            return Err(Error::InvalidParams(format!(
                "cap_height_frac {} not in [0.05,0.3]",
                self.cap_height_frac
            )));
        }
        for (name, c) in [("body_color", self.body_color), ("cap_color", self.cap_color)] {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParams(format!("{name} {c:?} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Aspect ratio (width / height) of the bottle's pixel footprint.
    pub fn pixel_aspect(&self, size: ImageSize) -> f64 {
        let lay = render::layout(self, size);
        f64::from(lay.width) / f64::from(lay.height)
    }
}

/// A rendered catalog entry.
#[derive(Debug, Clone)]
pub struct Design {
    pub id: DesignId,
    pub params: DesignParams,
    pub image: RgbImage,
    /// Exactly the painted pixels.
    pub mask: Mask,
}

/// Renders a design. Returns the image (white background) and the exact set
/// of painted pixels.
pub fn render_design(params: &DesignParams, size: ImageSize) -> Result<(RgbImage, Mask)> {
    params.validate()?;
    validate_size(size)?;
    let (image, mask, _) = render::render_layers(params, size);
    Ok((image, mask))
}

/// Body pixels only (cap excluded).
pub fn render_body_mask(params: &DesignParams, size: ImageSize) -> Result<Mask> {
    params.validate()?;
    validate_size(size)?;
    Ok(render::render_layers(params, size).2)
}

fn validate_size(size: ImageSize) -> Result<()> {
    if size.width < MIN_IMAGE_SIDE || size.height < MIN_IMAGE_SIDE {
        return Err(Error::Config(format!(
            "image size {}x{} below minimum {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}",
            size.height, size.width
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: DesignId,
    pub params: DesignParams,
}

/// An immutable, ordered collection of designs. Images are rendered on
/// demand from the stored parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    index: HashMap<DesignId, usize>,
    image_size: ImageSize,
    generation_seed: u64,
}

impl Catalog {
    pub fn from_entries(
        entries: Vec<CatalogEntry>,
        image_size: ImageSize,
        generation_seed: u64,
    ) -> Result<Self> {
        validate_size(image_size)?;
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            e.params
                .validate()
                .map_err(|err| Error::Validation(format!("design {}: {err}", e.id)))?;
            if index.insert(e.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate design id {}", e.id)));
            }
        }
        Ok(Self {
            entries,
            index,
            image_size,
            generation_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn image_size(&self) -> ImageSize {
        self.image_size
    }

    pub fn generation_seed(&self) -> u64 {
        self.generation_seed
    }

    pub fn ids(&self) -> impl Iterator<Item = DesignId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn position(&self, id: DesignId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn contains(&self, id: DesignId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn params(&self, id: DesignId) -> Result<&DesignParams> {
        self.position(id)
            .map(|i| &self.entries[i].params)
            .ok_or(Error::UnknownDesign(id.0))
    }

    /// Renders the design at catalog position `index`.
    pub fn design_at(&self, index: usize) -> Design {
        let e = &self.entries[index];
        let (image, mask, _) = render::render_layers(&e.params, self.image_size);
        Design {
            id: e.id,
            params: e.params,
            image,
            mask,
        }
    }

    pub fn design(&self, id: DesignId) -> Result<Design> {
        let i = self.position(id).ok_or(Error::UnknownDesign(id.0))?;
        Ok(self.design_at(i))
    }

    /// Hex SHA-256 over the image size and every entry's id and parameters.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.image_size.height.to_le_bytes());
        hasher.update(self.image_size.width.to_le_bytes());
        for e in &self.entries {
            hasher.update(e.id.0.to_le_bytes());
            // serializing a plain struct of numbers cannot fail
            hasher.update(serde_json::to_vec(&e.params).expect("params serialize"));
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Generates `size` designs deterministically from `seed`.
pub fn generate_catalog(size: usize, image_size: ImageSize, seed: u64) -> Result<Catalog> {
    if size == 0 {
        return Err(Error::Config("catalog size must be at least 1".into()));
    }
    if size > u32::MAX as usize {
        return Err(Error::Config(format!("catalog size {size} too large")));
    }
    validate_size(image_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = drawable_side(image_size);
    let entries = (0..size)
        .map(|i| CatalogEntry {
            id: DesignId(i as u32),
            params: sample_params(&mut rng, side),
        })
        .collect();
    Catalog::from_entries(entries, image_size, seed)
}

const MIN_ASPECT: f64 = 0.17;
const MAX_ASPECT: f64 = 1.7;
const CIRCLE_STRETCH: f64 = 0.8;

fn sample_params(rng: &mut impl Rng, side: u32) -> DesignParams {
    let sf = f64::from(side);
    let body_shape = BodyShape::ALL[rng.random_range(0..BodyShape::ALL.len())];
    let cap_height_frac = rng.random_range(0.06..0.10);

    let (width_px, height_px) = if body_shape == BodyShape::CircleBody {
        // near-round body; the stretch keeps circularity a graded property
        let w = rng.random_range(0.25 * sf..0.7 * sf).round();
        let stretch = rng.random_range(CIRCLE_STRETCH.ln()..(1.0 / CIRCLE_STRETCH).ln()).exp();
        (w, (w * stretch / (1.0 - cap_height_frac)).round().min(sf))
    } else {
        let aspect = (rng.random_range(MIN_ASPECT.ln()..MAX_ASPECT.ln())).exp();
        let mut h = rng.random_range(0.4 * sf..sf);
        if aspect * h > sf {
            h = sf / aspect;
        }
        let h = h.round().max(8.0);
        ((aspect * h).round().clamp(2.0, sf), h.min(sf))
    };

    DesignParams {
        body_shape,
        // pixel-snapped so the rendered footprint matches the fractions exactly
        width_frac: width_px / sf,
        height_frac: height_px / sf,
        body_color: sample_color(rng, 0.2..1.0, 0.3..1.0),
        cap_color: sample_color(rng, 0.0..0.5, 0.05..0.75),
        cap_height_frac,
        texture_seed: rng.random(),
    }
}

/// Samples an HSV color and converts to RGB, rejecting colors too close to
/// the white background for the mask pipeline to separate.
fn sample_color(
    rng: &mut impl Rng,
    sat: std::ops::Range<f64>,
    val: std::ops::Range<f64>,
) -> [f64; 3] {
    loop {
        let h = rng.random_range(0.0..1.0);
        let s = rng.random_range(sat.clone());
        let v = rng.random_range(val.clone());
        let rgb = hsv_to_rgb(h, s, v);
        if rgb.iter().cloned().fold(f64::INFINITY, f64::min) <= 0.6 {
            return rgb;
        }
    }
}

/// `h` in turns `[0, 1)`.
pub(crate) fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u32 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(width_frac: f64, height_frac: f64) -> DesignParams {
        DesignParams {
            body_shape: BodyShape::Rectangle,
            width_frac,
            height_frac,
            body_color: [1.0, 0.0, 0.0],
            cap_color: [0.2, 0.2, 0.2],
            cap_height_frac: 0.1,
            texture_seed: 42,
        }
    }

    #[test]
    fn rectangle_aspect_matches_fractions() {
        let (_, mask) = render_design(&rect(0.25, 1.0), ImageSize::square(128)).unwrap();
        let bb = mask.bounding_box().unwrap();
        let aspect = f64::from(bb.width()) / f64::from(bb.height());
        assert!((aspect - 0.25).abs() <= 1.0 / f64::from(bb.height()), "{aspect}");
    }

    #[test]
    fn red_body_keeps_full_red_channel() {
        let p = rect(0.5, 0.8);
        let (image, _) = render_design(&p, ImageSize::square(128)).unwrap();
        let body = render_body_mask(&p, ImageSize::square(128)).unwrap();
        assert!(body.count() > 0);
        for (x, y) in body.pixels() {
            assert_eq!(image.get_pixel(x, y).0[0], 255);
        }
    }

    #[test]
    fn render_is_pure() {
        let p = rect(0.4, 0.7);
        let a = render_design(&p, ImageSize::square(96)).unwrap();
        let b = render_design(&p, ImageSize::square(96)).unwrap();
        assert_eq!(a.0.as_raw(), b.0.as_raw());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn mask_is_exactly_painted_pixels() {
        let cat = generate_catalog(40, ImageSize::square(128), 3).unwrap();
        for i in 0..cat.len() {
            let d = cat.design_at(i);
            for y in 0..128 {
                for x in 0..128 {
                    let painted = d.image.get_pixel(x, y).0 != [255, 255, 255];
                    assert_eq!(painted, d.mask.get(x, y), "design {i} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_catalog(10, ImageSize::square(128), 7).unwrap();
        let b = generate_catalog(10, ImageSize::square(128), 7).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        for i in 0..10 {
            assert_eq!(a.design_at(i).image.as_raw(), b.design_at(i).image.as_raw());
        }
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(matches!(
            generate_catalog(0, ImageSize::square(128), 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generate_catalog(5, ImageSize::square(32), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mask_aspect_matches_params_on_catalog() {
        let size = ImageSize::square(128);
        let cat = generate_catalog(500, size, 11).unwrap();
        let tol = 2.0 / 128.0;
        for i in 0..cat.len() {
            let d = cat.design_at(i);
            let bb = d.mask.bounding_box().unwrap();
            let measured = f64::from(bb.width()) / f64::from(bb.height());
            let expected = d.params.width_frac / d.params.height_frac;
            assert!(
                (measured - expected).abs() <= tol,
                "design {i}: {measured} vs {expected} ({:?})",
                d.params
            );
        }
    }

    #[test]
    fn bounding_box_strictly_inside_canvas() {
        let cat = generate_catalog(300, ImageSize::square(64), 5).unwrap();
        for i in 0..cat.len() {
            let bb = cat.design_at(i).mask.bounding_box().unwrap();
            assert!(bb.x0 > 0 && bb.y0 > 0 && bb.x1 < 63 && bb.y1 < 63);
        }
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        assert_eq!(hsv_to_rgb(1.0 / 3.0, 1.0, 1.0), [0.0, 1.0, 0.0]);
        assert_eq!(hsv_to_rgb(0.5, 0.0, 0.4), [0.4, 0.4, 0.4]);
    }
}
