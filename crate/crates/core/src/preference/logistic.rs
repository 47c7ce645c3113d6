//! L2-regularized logistic regression fit by damped Newton steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const L2_PENALTY: f64 = 1e-4;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_NEWTON_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^s)` without overflow.
#[inline]
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn score(&self, z: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn probability(&self, z: &[f64]) -> f64 {
        sigmoid(self.score(z))
    }
}

/// Objective: mean log-loss plus `lambda/2 |w|^2` (intercept unpenalized).
pub(crate) struct Problem<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [bool],
    pub lambda: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.features[0].len()
    }

    fn split<'p>(&self, params: &'p [f64]) -> (&'p [f64], f64) {
        let m = self.dim();
        (&params[..m], params[m])
    }

    fn margin(&self, params: &[f64], z: &[f64]) -> f64 {
        let (w, b) = self.split(params);
        b + w.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.features.len() as f64;
        let data: f64 = self
            .features
            .iter()
            .zip(self.labels)
            .map(|(z, &y)| {
                let s = self.margin(params, z);
                softplus(s) - if y { s } else { 0.0 }
            })
            .sum::<f64>()
            / n;
        let (w, _) = self.split(params);
        data + 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let n = self.features.len() as f64;
        let mut g = vec![0.0; m + 1];
        for (z, &y) in self.features.iter().zip(self.labels) {
            let r = sigmoid(self.margin(params, z)) - if y { 1.0 } else { 0.0 };
            for k in 0..m {
                g[k] += r * z[k] / n;
            }
            g[m] += r / n;
        }
        for k in 0..m {
            g[k] += self.lambda * params[k];
        }
        g
    }

    fn hessian(&self, params: &[f64]) -> Vec<Vec<f64>> {
        let m = self.dim();
        let n = self.features.len() as f64;
        let mut h = vec![vec![0.0; m + 1]; m + 1];
        for z in self.features {
            let p = sigmoid(self.margin(params, z));
            let w = p * (1.0 - p) / n;
            let ext = |k: usize| if k < m { z[k] } else { 1.0 };
            for a in 0..=m {
                for b in 0..=m {
                    h[a][b] += w * ext(a) * ext(b);
                }
            }
        }
        for (k, row) in h.iter_mut().enumerate() {
            row[k] += if k < m { self.lambda } else { 1e-12 };
        }
        h
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits the combiner. `features[i]` holds one value per input column.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[bool], lambda: f64) -> Result<LogisticModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Validation(format!(
            "logistic fit needs matching non-empty inputs ({} rows, {} labels)",
            features.len(),
            labels.len()
        )));
    }
    let m = features[0].len();
    if features.iter().any(|z| z.len() != m) {
        return Err(Error::Validation("ragged feature rows".into()));
    }
    let problem = Problem {
        features,
        labels,
        lambda,
    };
    let mut params = vec![0.0; m + 1];
    let mut loss = problem.loss(&params);
    for _ in 0..MAX_NEWTON_STEPS {
        let g = problem.gradient(&params);
        if norm(&g) < GRADIENT_TOLERANCE {
            break;
        }
        let step = solve(problem.hessian(&params), g.iter().map(|v| -v).collect())
            .unwrap_or_else(|| g.iter().map(|v| -v).collect());
        // backtracking line search on the objective
        let mut t = 1.0;
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + t * s).collect();
            let trial_loss = problem.loss(&trial);
            if trial_loss <= loss + 1e-4 * t * slope {
                params = trial;
                loss = trial_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LogisticModel {
        weights: params[..m].to_vec(),
        intercept: params[m],
    })
}
