//! Dense reference implementations used as test oracles. Nothing here calls
//! into the library's numeric code.

#![allow(dead_code)]

use lsplm::{Dataset, Instance, ParamMatrix, SparseVector, Theta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(x: &SparseVector, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (id, v) in x.iter() {
        out[id as usize] = v;
    }
    out
}

/// `p(y = 1 | x)` straight from the definition, no stabilization.
pub fn naive_prob(theta: &Theta, x: &[f64]) -> f64 {
    let m = theta.m();
    let dot = |col: usize| (0..theta.dim()).map(|i| theta.get(i, col) * x[i]).sum::<f64>();
    let gates: Vec<f64> = (0..m).map(|j| dot(j).exp()).collect();
    let z: f64 = gates.iter().sum();
    (0..m)
        .map(|j| gates[j] / z / (1.0 + (-dot(m + j)).exp()))
        .sum()
}

pub fn naive_instance_loss(theta: &Theta, inst: &Instance) -> f64 {
    let p = naive_prob(theta, &dense(&inst.features, theta.dim()));
    let q = if inst.label { p } else { 1.0 - p };
    -q.clamp(1e-15, 1.0 - 1e-15).ln()
}

pub fn naive_loss(theta: &Theta, data: &Dataset) -> f64 {
    data.instances.iter().map(|i| naive_instance_loss(theta, i)).sum()
}

pub fn naive_objective(theta: &Theta, data: &Dataset, beta: f64, lambda: f64) -> f64 {
    let l21: f64 = theta
        .rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    let l1: f64 = theta.as_slice().iter().map(|v| v.abs()).sum();
    naive_loss(theta, data) + lambda * l21 + beta * l1
}

/// Central differences of the loss. Per-instance differences are summed so
/// that instances not touching a row contribute exact zeros.
pub fn fd_grad(theta: &Theta, data: &Dataset, h: f64) -> ParamMatrix {
    let mut g = ParamMatrix::zeros(theta.dim(), theta.m());
    for i in 0..theta.dim() {
        for c in 0..theta.cols() {
            let mut plus = theta.clone();
            plus.set(i, c, theta.get(i, c) + h);
            let mut minus = theta.clone();
            minus.set(i, c, theta.get(i, c) - h);
            let diff: f64 = data
                .instances
                .iter()
                .filter(|inst| inst.features.get(i as u32).is_some())
                .map(|inst| naive_instance_loss(&plus, inst) - naive_instance_loss(&minus, inst))
                .sum();
            g.set(i, c, diff / (2.0 * h));
        }
    }
    g
}

pub fn random_theta(rng: &mut impl Rng, dim: usize, m: usize, scale: f64) -> Theta {
    let data = (0..dim * 2 * m).map(|_| rng.gen_range(-scale..scale)).collect();
    Theta::from_vec(dim, m, data).unwrap()
}

/// Random sparse data over ids `0..dim`, bias always present.
pub fn random_data(rng: &mut impl Rng, dim: usize, n: usize, density: f64) -> Dataset {
    let instances = (0..n)
        .map(|_| {
            let mut pairs = vec![(0u32, 1.0)];
            for id in 1..dim as u32 {
                if rng.gen::<f64>() < density {
                    pairs.push((id, rng.gen_range(-1.5..1.5)));
                }
            }
            Instance::new(SparseVector::from_pairs(pairs).unwrap(), rng.gen())
        })
        .collect();
    Dataset::new(instances).with_dim(dim).unwrap()
}

/// Orthant-wise steepest direction with an L1 penalty only: the negated
/// pseudo-gradient.
pub fn l1_pseudo_direction(theta: &ParamMatrix, grad: &ParamMatrix, beta: f64) -> Vec<f64> {
    theta
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&t, &g)| {
            let pg = if t > 0.0 {
                g + beta
            } else if t < 0.0 {
                g - beta
            } else if g + beta < 0.0 {
                g + beta
            } else if g - beta > 0.0 {
                g - beta
            } else {
                0.0
            };
            -pg
        })
        .collect()
}

/// Inverse Hessian from the dense BFGS update applied to pairs, oldest
/// first, starting at `gamma I` with `gamma` from the newest pair.
pub fn dense_bfgs_inverse(pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<Vec<f64>> {
    let n = pairs[0].0.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (s_new, y_new) = pairs.last().unwrap();
    let gamma = dot(s_new, y_new) / dot(y_new, y_new);
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { gamma } else { 0.0 }).collect())
        .collect();
    for (s, y) in pairs {
        let rho = 1.0 / dot(s, y);
        // V = I - rho y s^T ; H = V^T H V + rho s s^T
        let v: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| f64::from(u8::from(i == j)) - rho * y[i] * s[j])
                    .collect()
            })
            .collect();
        let hv: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| h[i][k] * v[k][j]).sum()).collect())
            .collect();
        h = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| v[k][i] * hv[k][j]).sum::<f64>() + rho * s[i] * s[j])
                    .collect()
            })
            .collect();
    }
    h
}

pub fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Plain logistic regression by gradient descent with an adaptive step,
/// run until the gradient norm drops below `gtol`. Returns the weights.
pub fn logistic_regression_gd(data: &Dataset, gtol: f64, max_iters: usize) -> Vec<f64> {
    let dim = data.dim;
    let xs: Vec<Vec<f64>> = data.instances.iter().map(|i| dense(&i.features, dim)).collect();
    let ys: Vec<f64> = data.instances.iter().map(|i| i.target()).collect();
    let eval = |w: &[f64]| {
        let mut loss = 0.0;
        let mut g = vec![0.0; dim];
        for (x, &y) in xs.iter().zip(&ys) {
            let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            // log(1 + e^{-z}) for positives, log(1 + e^{z}) for negatives
            let s = if y > 0.5 { -z } else { z };
            loss += if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
            let p = 1.0 / (1.0 + (-z).exp());
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk += (p - y) * xk;
            }
        }
        (loss, g)
    };
    let mut w = vec![0.0; dim];
    let (mut f, mut g) = eval(&w);
    let mut step = 1e-3;
    for _ in 0..max_iters {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < gtol {
            break;
        }
        loop {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let (fc, gc) = eval(&cand);
            if fc <= f - 0.5 * step * gnorm * gnorm {
                w = cand;
                f = fc;
                g = gc;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            assert!(step > 1e-300, "oracle line search collapsed");
        }
    }
    w
}

pub fn lr_mean_logloss(w: &[f64], data: &Dataset) -> f64 {
    let total: f64 = data
        .instances
        .iter()
        .map(|inst| {
            let x = dense(&inst.features, w.len());
            let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            let q = if inst.label { p } else { 1.0 - p };
            -q.clamp(1e-15, 1.0 - 1e-15).ln()
        })
        .sum();
    total / data.len() as f64
}

/// Two classes split by `x1 + 0.5 x2 = 0.1`, with no point closer than
/// `margin` to the boundary.
pub fn separable_with_margin(n: usize, margin: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x1: f64 = r.gen_range(-1.0..1.0);
        let x2: f64 = r.gen_range(-1.0..1.0);
        let s = x1 + 0.5 * x2 - 0.1;
        if s.abs() < margin {
            continue;
        }
        let x = SparseVector::from_pairs(vec![(0, 1.0), (1, x1), (2, x2)]).unwrap();
        out.push(Instance::new(x, s > 0.0));
    }
    Dataset::new(out)
}

/// Overlapping classes: labels drawn from a logistic model.
pub fn noisy_linear(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let out = (0..n)
        .map(|_| {
            let x1: f64 = r.gen_range(-1.0..1.0);
            let x2: f64 = r.gen_range(-1.0..1.0);
            let p = 1.0 / (1.0 + (-(2.0 * x1 - x2 + 0.3)).exp());
            let x = SparseVector::from_pairs(vec![(0, 1.0), (1, x1), (2, x2)]).unwrap();
            Instance::new(x, r.gen::<f64>() < p)
        })
        .collect();
    Dataset::new(out)
}

/// `(f(theta + alpha d) - f(theta)) / alpha` extrapolated to `alpha -> 0`
/// over `alpha in {1e-4, 1e-5, 1e-6}`.
pub fn richardson_directional(f: impl Fn(&Theta) -> f64, theta: &Theta, d: &ParamMatrix) -> f64 {
    let f0 = f(theta);
    let quotient = |alpha: f64| {
        let mut t = theta.clone();
        t.axpy(alpha, d);
        (f(&t) - f0) / alpha
    };
    let (q4, q5, q6) = (quotient(1e-4), quotient(1e-5), quotient(1e-6));
    // first-order error terms cancel with ratio 10, then second-order ones
    let r5 = (10.0 * q5 - q4) / 9.0;
    let r6 = (10.0 * q6 - q5) / 9.0;
    (100.0 * r6 - r5) / 99.0
}

/// XOR benchmark data with `extra` irrelevant uniform features after ids 0..=2.
pub fn xor_with_noise_features(n: usize, noise: f64, extra: usize, seed: u64) -> Dataset {
    let base = lsplm::gen_synthetic(&lsplm::SynthSpec {
        n,
        noise,
        pattern: lsplm::Pattern::Xor,
        seed,
    })
    .unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let instances = base
        .instances
        .into_iter()
        .map(|inst| {
            let mut pairs = inst.features.entries().to_vec();
            for k in 0..extra {
                pairs.push((3 + k as u32, r.gen_range(-1.0..1.0)));
            }
            Instance::new(SparseVector::from_pairs(pairs).unwrap(), inst.label)
        })
        .collect();
    Dataset::new(instances)
}
