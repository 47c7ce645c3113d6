use crate::error::{Error, Result};

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // independent lanes so the loop vectorizes
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `exp(-|a-b|^2 / (2 sigma2))`.
#[inline]
pub fn rbf(a: &[f64], b: &[f64], sigma2: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * sigma2)).exp()
}

/// Nearest-rank percentile (`q` in `(0, 1]`) of `values`; reorders the slice.
pub fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let (_, v, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *v
}

/// Kernel width heuristic: half the 10th percentile (nearest rank) of all
/// pairwise Euclidean distances. Falls back to half the smallest nonzero
/// distance when duplicates push the percentile to zero.
pub fn kernel_width<V: AsRef<[f64]>>(vectors: &[V]) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "kernel width needs at least 2 vectors, got {n}"
        )));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(squared_distance(vectors[i].as_ref(), vectors[j].as_ref()).sqrt());
        }
    }
    let p10 = nearest_rank(&mut dists, 0.10);
    if p10 > 0.0 {
        return Ok(0.5 * p10);
    }
    dists
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
        .map(|d| 0.5 * d)
        .ok_or_else(|| Error::DegenerateData("all vectors identical".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_collinear_points() {
        // distances {1, 2, 3}: 10th percentile by nearest rank is 1
        let pts = [vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(kernel_width(&pts).unwrap(), 0.5);
    }

    #[test]
    fn two_points() {
        let pts = [vec![0.0, 0.0], vec![3.0, 4.0]];
        assert_eq!(kernel_width(&pts).unwrap(), 2.5);
    }

    #[test]
    fn duplicates_fall_back_to_smallest_nonzero() {
        let mut pts = vec![vec![0.0]; 6];
        pts.push(vec![2.0]);
        assert_eq!(kernel_width(&pts).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(kernel_width(&[vec![1.0]]).is_err());
        assert!(kernel_width(&vec![vec![1.0, 2.0]; 4]).is_err());
    }

    #[test]
    fn nearest_rank_convention() {
        let mut v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(nearest_rank(&mut v, 0.10), 2.0);
        let mut v = vec![5.0];
        assert_eq!(nearest_rank(&mut v, 0.10), 5.0);
    }
}
