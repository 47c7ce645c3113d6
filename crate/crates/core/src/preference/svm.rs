//! Soft-margin RBF support vector classifier trained by SMO with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::kernel::rbf;
use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 100.0;
pub const KKT_TOLERANCE: f64 = 1e-3;
pub const MAX_PASSES: usize = 10_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub sigma2: f64,
    pub c: f64,
}

impl SvmModel {
    /// `sum_i alpha_i y_i k(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * rbf(sv, x, self.sigma2))
            .sum::<f64>()
            + self.bias
    }

    /// Dual objective `sum alpha - 1/2 sum alpha_i alpha_j y_i y_j k_ij`.
    pub fn dual_objective(&self) -> f64 {
        let n = self.support_vectors.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.dual_coefs[i]
                    * self.dual_coefs[j]
                    * rbf(&self.support_vectors[i], &self.support_vectors[j], self.sigma2);
            }
        }
        self.dual_coefs.iter().map(|c| c.abs()).sum::<f64>() - 0.5 * quad
    }
}

/// Solver knobs; defaults match the preference model's training setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            tolerance: KKT_TOLERANCE,
            max_passes: MAX_PASSES,
        }
    }
}

/// Trains on `xs` with labels `ys` (`true` = +1). Both classes must be present.
pub fn train_svm<V: AsRef<[f64]>>(xs: &[V], ys: &[bool], c: f64, sigma2: f64) -> Result<SvmModel> {
    train_svm_with(xs, ys, c, sigma2, SmoParams::default())
}

pub fn train_svm_with<V: AsRef<[f64]>>(
    xs: &[V],
    ys: &[bool],
    c: f64,
    sigma2: f64,
    params: SmoParams,
) -> Result<SvmModel> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Validation(format!("{n} vectors but {} labels", ys.len())));
    }
    if !(ys.iter().any(|&y| y) && ys.iter().any(|&y| !y)) {
        return Err(Error::ColdStart);
    }
    if !(sigma2 > 0.0) || !(c > 0.0) {
        return Err(Error::Config(format!("need sigma2 > 0 and C > 0, got {sigma2}, {c}")));
    }
    let y: Vec<f64> = ys.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();

    // full kernel matrix; training sets here are a few hundred points
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rbf(xs[i].as_ref(), xs[j].as_ref(), sigma2);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let max_iter = params.max_passes.saturating_mul(n.max(1));
    for _ in 0..max_iter {
        // i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        // j: second-order selection within I_low
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel != usize::MAX {
                let b = gmax - v;
                if b > 0.0 {
                    let a = (k[i_sel * n + i_sel] + k[t * n + t] - 2.0 * k[i_sel * n + t]).max(TAU);
                    let obj = -(b * b) / a;
                    if obj <= best {
                        best = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < params.tolerance {
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        0.5 * (ub + lb)
    };

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(xs[t].as_ref().to_vec());
            dual_coefs.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias: -rho,
        sigma2,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair() {
        let xs = [vec![0.0, 0.0], vec![1.0, 1.0]];
        for sigma2 in [0.05, 0.5, 5.0] {
            let m = train_svm(&xs, &[true, false], DEFAULT_C, sigma2).unwrap();
            assert_eq!(m.support_vectors.len(), 2);
            assert!(m.decision(&xs[0]) > 0.0);
            assert!(m.decision(&xs[1]) < 0.0);
        }
    }

    #[test]
    fn xor_is_separated() {
        let xs = [vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let ys = [true, true, false, false];
        let m = train_svm(&xs, &ys, DEFAULT_C, 0.5).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(m.decision(x) > 0.0, y);
        }
    }

    #[test]
    fn single_class_is_cold_start() {
        let xs = [vec![0.0], vec![1.0]];
        assert!(matches!(train_svm(&xs, &[true, true], 1.0, 1.0), Err(Error::ColdStart)));
    }

    #[test]
    fn dual_feasibility() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let ys: Vec<bool> = (0..30).map(|i| (i * 7) % 3 == 0).collect();
        let m = train_svm(&xs, &ys, DEFAULT_C, 0.3).unwrap();
        let sum: f64 = m.dual_coefs.iter().sum();
        assert!(sum.abs() < 1e-6, "sum alpha_i y_i = {sum}");
        assert!(m.dual_coefs.iter().all(|c| c.abs() <= DEFAULT_C + 1e-9));
    }
}
