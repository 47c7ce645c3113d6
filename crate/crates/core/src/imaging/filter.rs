//! Separable Gaussian smoothing on single-channel `f64` planes.

/// Row-major single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Clamp-to-edge access.
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

pub(crate) fn gaussian_blur(src: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = Plane::new(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            let acc = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * src.at_clamped(x as isize + i as isize - r, y as isize))
                .sum();
            tmp.set(x, y, acc);
        }
    }
    let mut out = Plane::new(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            let acc = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * tmp.at_clamped(x as isize, y as isize + i as isize - r))
                .sum();
            out.set(x, y, acc);
        }
    }
    out
}
