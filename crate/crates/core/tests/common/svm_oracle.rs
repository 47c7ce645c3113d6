//! Reference SVM dual solver: accelerated projected gradient on
//! `min 1/2 a'Qa - 1'a` over `{0 <= a <= C, y'a = 0}`.

use iterator_core::preference::rbf;

pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

/// Euclidean projection onto the box-with-hyperplane set, by bisection on
/// the hyperplane multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clip = |vi: f64, yi: f64, lam: f64| (vi - lam * yi).clamp(0.0, c);
    let residual = |lam: f64| -> f64 { v.iter().zip(y).map(|(&vi, &yi)| clip(vi, yi, lam) * yi).sum() };
    // y'a(lam) is non-increasing in lam
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    v.iter().zip(y).map(|(&vi, &yi)| clip(vi, yi, lam)).collect()
}

pub fn solve_dual(xs: &[Vec<f64>], ys: &[bool], c: f64, sigma2: f64) -> DualSolution {
    let n = xs.len();
    let y: Vec<f64> = ys.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let k: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rbf(&xs[i], &xs[j], sigma2)).collect()).collect();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let objective = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q[i][j];
            }
        }
        0.5 * quad - a.iter().sum::<f64>()
    };
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| q[i].iter().zip(a).map(|(qij, aj)| qij * aj).sum::<f64>() - 1.0).collect() };
    // Q is PSD with unit diagonal, so its largest eigenvalue is at most n
    let lip = n as f64;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&a);
    for _ in 0..200_000 {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project(&step, &y, c);
        let f_next = objective(&next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = next.iter().zip(&a).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if f_next > f_prev {
            // adaptive restart
            z = a.clone();
            t = 1.0;
            continue;
        }
        z = next
            .iter()
            .zip(&a)
            .map(|(p, q)| p + (t - 1.0) / t_next * (p - q))
            .collect();
        a = next;
        t = t_next;
        f_prev = f_next;
        if moved < 1e-12 {
            break;
        }
    }
    let g = grad(&a);
    // bias from free multipliers, else midpoint of the feasible interval
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > 1e-8 * c && a[i] < c * (1.0 - 1e-8)).collect();
    let bias = if !free.is_empty() {
        free.iter().map(|&i| -y[i] * g[i]).sum::<f64>() / free.len() as f64
    } else {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let v = -y[i] * g[i];
            let at_upper = a[i] >= c * (1.0 - 1e-8);
            if (y[i] > 0.0) == at_upper {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        0.5 * (lo + hi)
    };
    DualSolution {
        objective: -objective(&a),
        alpha: a,
        bias,
    }
}

pub fn oracle_decision(sol: &DualSolution, xs: &[Vec<f64>], ys: &[bool], sigma2: f64, x: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(&sol.alpha)
        .map(|((xi, &yi), ai)| ai * if yi { 1.0 } else { -1.0 } * rbf(xi, x, sigma2))
        .sum::<f64>()
        + sol.bias
}

pub struct Instance {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<bool>,
    pub c: f64,
    pub probes: Vec<Vec<f64>>,
}

/// Random problem with n <= 50 points in d <= 8 dimensions; labels follow a
/// noisy random hyperplane so both separable-ish and overlapping cases occur.
pub fn random_instance(seed: u64) -> Instance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=50);
    let d = rng.random_range(1..=8);
    let mut normal = || {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    let w: Vec<f64> = (0..d).map(|_| normal()).collect();
    let noise = 0.5 * normal().abs();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| normal()).collect();
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise * normal();
        ys.push(s > 0.0);
        xs.push(x);
    }
    ys[0] = true;
    ys[1] = false;
    let probes = (0..20).map(|_| (0..d).map(|_| normal()).collect()).collect();
    let c = if seed % 3 == 0 { 1.0 } else { 100.0 };
    Instance { xs, ys, c, probes }
}

pub struct Comparison {
    pub relative_gap: f64,
    pub signs_agree: bool,
}

pub fn compare(inst: &Instance) -> Comparison {
    let sigma2 = iterator_core::preference::kernel_width(&inst.xs).expect("distinct points");
    let smo = iterator_core::preference::train_svm(&inst.xs, &inst.ys, inst.c, sigma2).expect("both classes");
    let oracle = solve_dual(&inst.xs, &inst.ys, inst.c, sigma2);
    let relative_gap = (smo.dual_objective() - oracle.objective).abs() / oracle.objective.abs().max(1e-12);
    let signs_agree = inst.xs.iter().chain(&inst.probes).all(|x| {
        let o = oracle_decision(&oracle, &inst.xs, &inst.ys, sigma2, x);
        // points on the boundary itself carry no sign
        o.abs() < 1e-3 || (o > 0.0) == (smo.decision(x) > 0.0)
    });
    Comparison {
        relative_gap,
        signs_agree,
    }
}
