//! Steepest descent direction of the non-smooth objective and the orthant
//! bookkeeping that keeps iterates from changing sign within one step.

use crate::error::Result;
use crate::model::{Direction, GradMatrix, ParamMatrix, Theta};
use crate::objective::row_norm;

/// Per-entry signs in {-1, 0, +1}, shaped like the parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthantMask {
    dim: usize,
    m: usize,
    signs: Vec<i8>,
}

impl OrthantMask {
    pub fn from_signs(dim: usize, m: usize, signs: Vec<i8>) -> Self {
        assert_eq!(signs.len(), dim * 2 * m, "mask length");
        assert!(signs.iter().all(|s| (-1..=1).contains(s)), "mask entries must be -1, 0 or 1");
        Self { dim, m, signs }
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.signs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

/// Anything that assigns a sign to each parameter position.
pub trait SignPattern {
    fn shape(&self) -> (usize, usize);
    fn sign_at(&self, k: usize) -> i8;
}

impl SignPattern for ParamMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.dim(), self.m())
    }

    fn sign_at(&self, k: usize) -> i8 {
        sign(self.as_slice()[k])
    }
}

impl SignPattern for OrthantMask {
    fn shape(&self) -> (usize, usize) {
        (self.dim, self.m)
    }

    fn sign_at(&self, k: usize) -> i8 {
        self.signs[k]
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Keeps each entry whose sign matches the reference sign, zeroes the rest.
pub fn project(x: &ParamMatrix, orthant: &impl SignPattern) -> Result<ParamMatrix> {
    if (x.dim(), x.m()) != orthant.shape() {
        let (d, m) = orthant.shape();
        return Err(crate::Error::Shape(format!(
            "{} x {} vs {} x {}",
            x.dim(),
            x.cols(),
            d,
            2 * m
        )));
    }
    let mut out = x.clone();
    for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
        if sign(*v) != orthant.sign_at(k) {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// Soft threshold `max(|s| - beta, 0) * sign(s)`.
fn shrink(s: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return s;
    }
    let mag = s.abs() - beta;
    if mag > 0.0 {
        mag.copysign(s)
    } else {
        0.0
    }
}

/// The direction minimizing the directional derivative over a norm ball,
/// up to a positive scale.
///
/// Per row `i` and column `j`:
/// * `theta_ij != 0`: `s - beta * sign(theta_ij)` with
///   `s = -g_ij - lambda * theta_ij / ||theta_i||`;
/// * `theta_ij == 0` in a nonzero row: soft threshold of `-g_ij` at `beta`;
/// * zero row: `v` = soft threshold of `-g_i` at `beta`, scaled by
///   `max(||v|| - lambda, 0) / ||v||`.
pub fn descent_direction(theta: &Theta, grad: &GradMatrix, beta: f64, lambda: f64) -> Direction {
    assert!(theta.same_shape(grad), "shape mismatch");
    let mut d = Direction::zeros(theta.dim(), theta.m());
    for i in 0..theta.dim() {
        let t_row = theta.row(i);
        let g_row = grad.row(i);
        let d_row = d.row_mut(i);
        let t_norm = row_norm(t_row);
        if t_norm != 0.0 {
            for ((out, &t), &g) in d_row.iter_mut().zip(t_row).zip(g_row) {
                *out = if t != 0.0 {
                    let mut s = -g;
                    if lambda != 0.0 {
                        s -= lambda * t / t_norm;
                    }
                    if beta != 0.0 {
                        s -= beta * t.signum();
                    }
                    s
                } else {
                    shrink(-g, beta)
                };
            }
        } else {
            for (out, &g) in d_row.iter_mut().zip(g_row) {
                *out = shrink(-g, beta);
            }
            if lambda == 0.0 {
                continue;
            }
            let v_norm = row_norm(d_row);
            if v_norm > lambda {
                let c = (v_norm - lambda) / v_norm;
                d_row.iter_mut().for_each(|v| *v *= c);
            } else {
                d_row.fill(0.0);
            }
        }
    }
    d
}

/// Orthant for the next step: the sign of `theta` where it is nonzero,
/// otherwise the sign of the direction.
pub fn orthant_mask(theta: &Theta, d: &Direction) -> OrthantMask {
    assert!(theta.same_shape(d), "shape mismatch");
    let signs = theta
        .as_slice()
        .iter()
        .zip(d.as_slice())
        .map(|(&t, &dv)| if t != 0.0 { sign(t) } else { sign(dv) })
        .collect();
    OrthantMask {
        dim: theta.dim(),
        m: theta.m(),
        signs,
    }
}
