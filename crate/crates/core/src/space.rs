//! A catalog paired with its precomputed modality embeddings.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::catalog::{Catalog, DesignId};
use crate::error::Result;
use crate::imaging::{color_descriptor, shape_descriptor, Modality, COLOR_DIM, SHAPE_DIM};

/// Lookup of a design's embedding in one modality.
pub trait EmbeddingLookup {
    fn embedding(&self, id: DesignId, modality: Modality) -> Option<&[f64]>;
}

/// In-memory table keyed by design id; handy for hand-built data.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingMap {
    map: HashMap<(DesignId, Modality), Vec<f64>>,
}

impl EmbeddingMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: DesignId, modality: Modality, vector: Vec<f64>) {
        self.map.insert((id, modality), vector);
    }
}

impl EmbeddingLookup for EmbeddingMap {
    fn embedding(&self, id: DesignId, modality: Modality) -> Option<&[f64]> {
        self.map.get(&(id, modality)).map(Vec::as_slice)
    }
}

/// Catalog designs with shape and color embeddings, stored contiguously by
/// catalog position.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    catalog: Catalog,
    catalog_hash: String,
    shape: Vec<f64>,
    color: Vec<f64>,
}

impl DesignSpace {
    /// Renders every design once and computes its embeddings from the
    /// painted mask.
    pub fn build(catalog: Catalog) -> Result<Self> {
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..catalog.len())
            .into_par_iter()
            .map(|i| {
                let d = catalog.design_at(i);
                let s = shape_descriptor(&d.mask)?;
                let c = color_descriptor(&d.image, &d.mask)?;
                Ok((s.vector, c.vector))
            })
            .collect::<Result<_>>()?;
        let mut shape = Vec::with_capacity(rows.len() * SHAPE_DIM);
        let mut color = Vec::with_capacity(rows.len() * COLOR_DIM);
        for (s, c) in rows {
            shape.extend(s);
            color.extend(c);
        }
        Ok(Self {
            catalog_hash: catalog.content_hash(),
            catalog,
            shape,
            color,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Cached [`Catalog::content_hash`].
    pub fn catalog_hash(&self) -> &str {
        &self.catalog_hash
    }

    pub fn len(&self) -> usize {
        self.catalog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalog.is_empty()
    }

    /// Embedding by catalog position.
    pub fn embedding_at(&self, index: usize, modality: Modality) -> &[f64] {
        match modality {
            Modality::Shape => &self.shape[index * SHAPE_DIM..(index + 1) * SHAPE_DIM],
            Modality::Color => &self.color[index * COLOR_DIM..(index + 1) * COLOR_DIM],
        }
    }
}

impl EmbeddingLookup for DesignSpace {
    fn embedding(&self, id: DesignId, modality: Modality) -> Option<&[f64]> {
        self.catalog
            .position(id)
            .map(|i| self.embedding_at(i, modality))
    }
}
