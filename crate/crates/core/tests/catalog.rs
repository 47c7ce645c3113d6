use iterator_core::catalog::generate_catalog;
use iterator_core::imaging::aspect_ratio;
use iterator_core::ImageSize;
use rayon::prelude::*;

#[test]
fn default_catalog_aspect_span() {
    let cat = generate_catalog(24_000, ImageSize::square(128), 1).unwrap();
    let aspects: Vec<f64> = (0..cat.len())
        .into_par_iter()
        .map(|i| aspect_ratio(&cat.design_at(i).mask).unwrap())
        .collect();
    let lo = aspects.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = aspects.iter().copied().fold(0.0, f64::max);
    assert!(lo <= 0.2 && hi >= 1.5, "span [{lo}, {hi}]");
}
