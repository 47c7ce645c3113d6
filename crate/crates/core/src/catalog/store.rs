use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{render, Catalog, CatalogEntry, DesignId, DesignParams};
use crate::error::{Error, Result};
use crate::raster::ImageSize;

pub const MANIFEST_FILE: &str = "manifest.json";
const IMAGE_DIR: &str = "images";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub image_size: ImageSize,
    pub generation_seed: u64,
    pub designs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: DesignId,
    /// Path of the PNG relative to the catalog directory.
    pub image: String,
    pub params: DesignParams,
}

fn image_name(id: DesignId) -> String {
    format!("{IMAGE_DIR}/{:06}.png", id.0)
}

/// Writes `manifest.json` and one PNG per design under `dir`.
pub fn save_catalog(catalog: &Catalog, dir: &Path) -> Result<()> {
    use rayon::prelude::*;

    let images = dir.join(IMAGE_DIR);
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let designs: Vec<ManifestEntry> = catalog
        .entries()
        .iter()
        .map(|e| ManifestEntry {
            id: e.id,
            image: image_name(e.id),
            params: e.params,
        })
        .collect();
    designs.par_iter().try_for_each(|entry| {
        let (img, _, _) = render::render_layers(&entry.params, catalog.image_size());
        let path = dir.join(&entry.image);
        img.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|source| Error::Image { path, source })
    })?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        image_size: catalog.image_size(),
        generation_seed: catalog.generation_seed(),
        designs,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

/// Reads a catalog directory written by [`save_catalog`]. Every referenced
/// image must exist and decode at the manifest's image size.
pub fn load_catalog(dir: &Path) -> Result<Catalog> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported manifest format version {}",
            manifest.format_version
        )));
    }
    let mut seen = HashSet::with_capacity(manifest.designs.len());
    for entry in &manifest.designs {
        if !seen.insert(entry.id) {
            return Err(Error::Validation(format!("duplicate design id {}", entry.id)));
        }
    }
    {
        use rayon::prelude::*;
        let size = manifest.image_size;
        manifest.designs.par_iter().try_for_each(|entry| {
            let path = dir.join(&entry.image);
            if !path.is_file() {
                return Err(Error::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "image file missing"),
                ));
            }
            let dims = image::image_dimensions(&path)
                .map_err(|source| Error::Image { path: path.clone(), source })?;
            if dims != (size.width, size.height) {
                return Err(Error::Validation(format!(
                    "{}: expected {}x{} pixels, found {}x{}",
                    path.display(),
                    size.width,
                    size.height,
                    dims.0,
                    dims.1
                )));
            }
            Ok(())
        })?;
    }
    let entries = manifest
        .designs
        .into_iter()
        .map(|e| CatalogEntry {
            id: e.id,
            params: e.params,
        })
        .collect();
    Catalog::from_entries(entries, manifest.image_size, manifest.generation_seed)
}

/// Path of a design's PNG inside a saved catalog directory.
pub fn image_path(dir: &Path, id: DesignId) -> std::path::PathBuf {
    dir.join(image_name(id))
}
