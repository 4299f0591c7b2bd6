//! Negative log-likelihood, its gradient, the L1 / L2,1 penalties and the
//! one-sided directional derivative of the penalized objective
//!
//! ```text
//! f(theta) = loss(theta) + lambda * ||theta||_{2,1} + beta * ||theta||_1
//! ```
//!
//! The loss is an unnormalized sum over samples, so the effective strength of
//! `beta` and `lambda` grows with the inverse of the dataset size.

use crate::error::Result;
use crate::model::{accumulate, check_ids, GradMatrix, Mixture, ParamMatrix, Theta};
use crate::sparse_data::{GroupedBlock, GroupedDataset, Instance};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-15;

pub(crate) fn check_data(theta: &Theta, data: &GroupedDataset) -> Result<()> {
    for block in &data.blocks {
        check_ids(theta, &block.common)?;
        for s in &block.samples {
            check_ids(theta, &s.features)?;
        }
    }
    Ok(())
}

/// Negative log-likelihood of one sample given its mixture.
fn sample_loss(mix: &Mixture, label: bool) -> f64 {
    // q is 1 - p computed without cancellation
    let prob = if label { mix.p } else { mix.q };
    -prob.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

/// Writes d(loss)/d(activation) for the 2m activations of one sample.
fn activation_grad(mix: &Mixture, label: bool, out: &mut [f64]) {
    let m = mix.weights.len();
    // dL/dp = -1/p for positives and 1/(1-p) for negatives; unclamped apart
    // from an underflow guard.
    let dl_dp = if label {
        -1.0 / mix.p.max(f64::MIN_POSITIVE)
    } else {
        1.0 / mix.q.max(f64::MIN_POSITIVE)
    };
    for j in 0..m {
        let sw = mix.weights[j];
        let eta = mix.preds[j];
        let comp = mix.complements[j];
        // dp/du_j = s_j (eta_j - p); negatives use the equal form
        // s_j ((1 - p) - (1 - eta_j)) to keep precision near p = 1.
        let gate = if label {
            sw * (eta - mix.p)
        } else {
            sw * (mix.q - comp)
        };
        out[j] = dl_dp * gate;
        out[m + j] = dl_dp * sw * eta * comp;
    }
}

fn block_loss(theta: &Theta, block: &GroupedBlock, shared: &mut [f64], acc: &mut [f64]) -> f64 {
    shared.fill(0.0);
    accumulate(theta, &block.common, shared);
    block
        .samples
        .iter()
        .map(|s| {
            acc.copy_from_slice(shared);
            accumulate(theta, &s.features, acc);
            sample_loss(&Mixture::from_activations(acc, theta.m()), s.label)
        })
        .sum()
}

/// Adds the block's loss gradient into `grad` and returns its loss. Common
/// features receive the summed sample coefficients in a single scatter.
pub(crate) fn block_loss_grad(
    theta: &Theta,
    block: &GroupedBlock,
    grad: &mut GradMatrix,
    scratch: &mut Scratch,
) -> f64 {
    let Scratch {
        shared,
        acc,
        coef,
        block_coef,
    } = scratch;
    shared.fill(0.0);
    block_coef.fill(0.0);
    accumulate(theta, &block.common, shared);
    let mut loss = 0.0;
    for s in &block.samples {
        acc.copy_from_slice(shared);
        accumulate(theta, &s.features, acc);
        let mix = Mixture::from_activations(acc, theta.m());
        loss += sample_loss(&mix, s.label);
        activation_grad(&mix, s.label, coef);
        scatter(grad, s, coef);
        for (b, c) in block_coef.iter_mut().zip(coef.iter()) {
            *b += c;
        }
    }
    for (id, v) in block.common.iter() {
        for (g, c) in grad.row_mut(id as usize).iter_mut().zip(block_coef.iter()) {
            *g += c * v;
        }
    }
    loss
}

fn scatter(grad: &mut GradMatrix, sample: &Instance, coef: &[f64]) {
    for (id, v) in sample.features.iter() {
        for (g, c) in grad.row_mut(id as usize).iter_mut().zip(coef) {
            *g += c * v;
        }
    }
}

/// Reusable per-thread buffers of length 2m.
pub(crate) struct Scratch {
    shared: Vec<f64>,
    acc: Vec<f64>,
    coef: Vec<f64>,
    block_coef: Vec<f64>,
}

impl Scratch {
    pub fn new(cols: usize) -> Self {
        Self {
            shared: vec![0.0; cols],
            acc: vec![0.0; cols],
            coef: vec![0.0; cols],
            block_coef: vec![0.0; cols],
        }
    }
}

pub(crate) fn loss_unchecked(theta: &Theta, data: &GroupedDataset) -> f64 {
    let mut shared = vec![0.0; theta.cols()];
    let mut acc = vec![0.0; theta.cols()];
    data.blocks
        .iter()
        .map(|b| block_loss(theta, b, &mut shared, &mut acc))
        .sum()
}

pub(crate) fn loss_grad_unchecked(theta: &Theta, data: &GroupedDataset) -> (f64, GradMatrix) {
    let mut grad = GradMatrix::zeros(theta.dim(), theta.m());
    let mut scratch = Scratch::new(theta.cols());
    let mut loss = 0.0;
    for block in &data.blocks {
        loss += block_loss_grad(theta, block, &mut grad, &mut scratch);
    }
    (loss, grad)
}

/// Summed negative log-likelihood over every sample.
pub fn loss(theta: &Theta, data: &GroupedDataset) -> Result<f64> {
    check_data(theta, data)?;
    Ok(loss_unchecked(theta, data))
}

/// Gradient of [`loss`].
pub fn grad_loss(theta: &Theta, data: &GroupedDataset) -> Result<GradMatrix> {
    Ok(loss_and_grad(theta, data)?.1)
}

/// Loss and gradient in one pass.
pub fn loss_and_grad(theta: &Theta, data: &GroupedDataset) -> Result<(f64, GradMatrix)> {
    check_data(theta, data)?;
    Ok(loss_grad_unchecked(theta, data))
}

pub fn l1_norm(theta: &ParamMatrix) -> f64 {
    theta.as_slice().iter().map(|v| v.abs()).sum()
}

/// Euclidean norm of a row. Nonzero rows always get a nonzero norm, even when
/// the squares underflow.
pub(crate) fn row_norm(row: &[f64]) -> f64 {
    let sq: f64 = row.iter().map(|v| v * v).sum();
    if sq.is_normal() {
        return sq.sqrt();
    }
    let top = row.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if top == 0.0 || top.is_infinite() {
        return top;
    }
    top * row.iter().map(|v| (v / top) * (v / top)).sum::<f64>().sqrt()
}

/// Sum over feature rows of the row's Euclidean norm.
pub fn l21_norm(theta: &ParamMatrix) -> f64 {
    theta.rows().map(row_norm).sum()
}

/// `lambda * ||theta||_{2,1} + beta * ||theta||_1`
pub fn regularizer(theta: &ParamMatrix, beta: f64, lambda: f64) -> f64 {
    lambda * l21_norm(theta) + beta * l1_norm(theta)
}

pub fn objective(theta: &Theta, data: &GroupedDataset, beta: f64, lambda: f64) -> Result<f64> {
    Ok(loss(theta, data)? + regularizer(theta, beta, lambda))
}

/// One-sided directional derivative `f'(theta; dir)` of the penalized
/// objective, given the loss gradient at `theta`.
///
/// Rows with a nonzero norm contribute `lambda * theta_i.d_i / ||theta_i||`,
/// zero rows contribute `lambda * ||d_i||`. Nonzero entries contribute
/// `beta * sign(theta_ij) d_ij`, zero entries `beta * |d_ij|`.
pub fn directional_derivative(
    theta: &Theta,
    dir: &ParamMatrix,
    grad: &GradMatrix,
    beta: f64,
    lambda: f64,
) -> f64 {
    assert!(theta.same_shape(dir) && theta.same_shape(grad), "shape mismatch");
    let smooth = grad.dot(dir);
    let mut group = 0.0;
    let mut lasso = 0.0;
    for (t_row, d_row) in theta.rows().zip(dir.rows()) {
        let t_norm = row_norm(t_row);
        if t_norm != 0.0 {
            group += t_row.iter().zip(d_row).map(|(t, d)| t * d).sum::<f64>() / t_norm;
        } else {
            group += row_norm(d_row);
        }
        for (&t, &d) in t_row.iter().zip(d_row) {
            lasso += if t != 0.0 { t.signum() * d } else { d.abs() };
        }
    }
    smooth + lambda * group + beta * lasso
}
