//! The piece-wise linear model: `m` logistic regressions ("fitters", the
//! `w` columns) mixed by a softmax gate ("dividers", the `u` columns).
//!
//! ```text
//! p(y = 1 | x) = sum_j softmax_j(u_1.x, ..., u_m.x) * sigmoid(w_j.x)
//! ```
//!
//! Parameters are stored as a dense `dim x 2m` row-major matrix: row `i`
//! holds every parameter attached to feature `i`, columns `0..m` are the
//! dividers and `m..2m` the fitters.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optimizer::LineSearchParams;
use crate::sparse_data::{fmt_real, GroupedBlock, SparseVector};

/// Dense `dim x 2m` matrix shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMatrix {
    dim: usize,
    m: usize,
    data: Vec<f64>,
}

/// Model parameters.
pub type Theta = ParamMatrix;
/// Gradient of the smooth loss with respect to every parameter.
pub type GradMatrix = ParamMatrix;
/// A search or update direction in parameter space.
pub type Direction = ParamMatrix;

impl ParamMatrix {
    pub fn zeros(dim: usize, m: usize) -> Self {
        assert!(m >= 1, "region count must be positive");
        Self {
            dim,
            m,
            data: vec![0.0; dim * 2 * m],
        }
    }

    /// Wraps row-major data of length `dim * 2m`.
    pub fn from_vec(dim: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("region count must be positive".into()));
        }
        if data.len() != dim * 2 * m {
            return Err(Error::Shape(format!(
                "expected {} entries for {dim} x {}, got {}",
                dim * 2 * m,
                2 * m,
                data.len()
            )));
        }
        Ok(Self { dim, m, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of columns, `2m`.
    pub fn cols(&self) -> usize {
        2 * self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols())
    }

    pub fn get(&self, i: usize, col: usize) -> f64 {
        self.data[i * self.cols() + col]
    }

    pub fn set(&mut self, i: usize, col: usize, v: f64) {
        let c = self.cols();
        self.data[i * c + col] = v;
    }

    /// Divider coefficient `u_j` of feature `i`.
    pub fn divider(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    /// Fitter coefficient `w_j` of feature `i`.
    pub fn fitter(&self, i: usize, j: usize) -> f64 {
        self.get(i, self.m + j)
    }

    pub fn same_shape(&self, other: &ParamMatrix) -> bool {
        self.dim == other.dim && self.m == other.m
    }

    pub fn dot(&self, other: &ParamMatrix) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &ParamMatrix) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// `self - other`
    pub fn sub(&self, other: &ParamMatrix) -> ParamMatrix {
        debug_assert!(self.same_shape(other));
        ParamMatrix {
            dim: self.dim,
            m: self.m,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when row `i` is identically zero (exact comparison).
    pub fn row_is_zero(&self, i: usize) -> bool {
        self.row(i).iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Number of regions.
    pub m: usize,
    /// L1 weight.
    pub beta: f64,
    /// L2,1 weight.
    pub lambda: f64,
    pub lbfgs_memory: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub ls: LineSearchParams,
    pub seed: u64,
    /// Half-width of the uniform divider initialization.
    pub init_scale: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            m: 12,
            beta: 1.0,
            lambda: 1.0,
            lbfgs_memory: 10,
            max_iters: 200,
            tol: 1e-6,
            ls: LineSearchParams::default(),
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be a finite non-negative number");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if self.lbfgs_memory == 0 {
            return bad("lbfgs memory must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max iterations must be at least 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init scale must be a finite non-negative number");
        }
        self.ls.validate()
    }
}

/// Result of evaluating the model on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredOutput {
    /// Probability of the positive class.
    pub p: f64,
    /// Softmax gate values, summing to 1.
    pub region_weights: Vec<f64>,
    /// Per-region sigmoid predictions.
    pub region_preds: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gate and region values for one instance, plus `1 - p` computed without
/// cancellation as `sum_j weight_j * sigmoid(-w_j.x)`.
pub(crate) struct Mixture {
    pub weights: Vec<f64>,
    pub preds: Vec<f64>,
    pub complements: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

impl Mixture {
    /// `acts` holds the 2m dot products `[u_1.x .. u_m.x, w_1.x .. w_m.x]`.
    pub fn from_activations(acts: &[f64], m: usize) -> Self {
        let (gate, fit) = acts.split_at(m);
        let top = gate.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = gate.iter().map(|a| (a - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let preds: Vec<f64> = fit.iter().map(|&z| sigmoid(z)).collect();
        let complements: Vec<f64> = fit.iter().map(|&z| sigmoid(-z)).collect();
        // rounding in the normalized weights can push a sum of saturated terms past 1
        let p = weights.iter().zip(&preds).map(|(a, b)| a * b).sum::<f64>().min(1.0);
        let q = weights.iter().zip(&complements).map(|(a, b)| a * b).sum::<f64>().min(1.0);
        Self {
            weights,
            preds,
            complements,
            p,
            q,
        }
    }

    pub fn into_output(self) -> PredOutput {
        PredOutput {
            p: self.p,
            region_weights: self.weights,
            region_preds: self.preds,
        }
    }
}

/// Adds `theta^T x` (all 2m columns) to `acc`, feature by feature in id
/// order.
pub(crate) fn accumulate(theta: &Theta, x: &SparseVector, acc: &mut [f64]) {
    for (id, v) in x.iter() {
        let row = theta.row(id as usize);
        for (a, r) in acc.iter_mut().zip(row) {
            *a += r * v;
        }
    }
}

pub(crate) fn check_ids(theta: &Theta, x: &SparseVector) -> Result<()> {
    match x.max_id() {
        Some(id) if id as usize >= theta.dim() => Err(Error::Dimension {
            id: id as usize,
            dim: theta.dim(),
        }),
        _ => Ok(()),
    }
}

pub fn predict(theta: &Theta, x: &SparseVector) -> Result<PredOutput> {
    check_ids(theta, x)?;
    let mut acc = vec![0.0; theta.cols()];
    accumulate(theta, x, &mut acc);
    Ok(Mixture::from_activations(&acc, theta.m()).into_output())
}

/// Predicts every sample of a block. The common-part dot products are
/// computed once and each sample adds its own part on top, so results match
/// [`predict`] on the merged vector whenever the common ids sort first.
pub fn predict_block(theta: &Theta, block: &GroupedBlock) -> Result<Vec<PredOutput>> {
    check_ids(theta, &block.common)?;
    for s in &block.samples {
        check_ids(theta, &s.features)?;
    }
    let mut shared = vec![0.0; theta.cols()];
    accumulate(theta, &block.common, &mut shared);
    Ok(block
        .samples
        .iter()
        .map(|s| {
            let mut acc = shared.clone();
            accumulate(theta, &s.features, &mut acc);
            Mixture::from_activations(&acc, theta.m()).into_output()
        })
        .collect())
}

/// Dividers drawn uniformly from `[-init_scale, init_scale]`, fitters zero.
pub fn init_theta(dim: usize, hyper: &Hyperparams) -> Theta {
    let mut theta = Theta::zeros(dim, hyper.m);
    if hyper.init_scale == 0.0 {
        return theta;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let s = hyper.init_scale;
    for i in 0..dim {
        for v in &mut theta.row_mut(i)[..hyper.m] {
            *v = rng.gen_range(-s..=s);
        }
    }
    theta
}

/// `(nonzero parameters, features with any nonzero parameter)`
pub fn nnz_stats(theta: &Theta) -> (usize, usize) {
    theta.rows().fold((0, 0), |(params, feats), row| {
        let nz = row.iter().filter(|&&v| v != 0.0).count();
        (params + nz, feats + usize::from(nz > 0))
    })
}

const MAGIC: &str = "LSPLM";
const VERSION: u32 = 1;

/// Writes the header line followed by one line per nonzero row.
pub fn save_model(theta: &Theta, mut sink: impl Write) -> Result<()> {
    writeln!(sink, "{MAGIC} {VERSION} {} {}", theta.dim(), theta.m())?;
    for (i, row) in theta.rows().enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut line = i.to_string();
        for &v in row {
            line.push(' ');
            line.push_str(&fmt_real(v));
        }
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

pub fn load_model(source: impl BufRead) -> Result<Theta> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty model file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (dim, m) = match fields.as_slice() {
        [magic, version, dim, m] if *magic == MAGIC => {
            if version.parse::<u32>().ok() != Some(VERSION) {
                return Err(Error::Format(format!("unsupported model version `{version}`")));
            }
            let dim: usize = dim
                .parse()
                .map_err(|_| Error::Format(format!("bad dimension `{dim}`")))?;
            let m: usize = m
                .parse()
                .ok()
                .filter(|&m| m > 0)
                .ok_or_else(|| Error::Format(format!("bad region count `{m}`")))?;
            (dim, m)
        }
        _ => return Err(Error::Format(format!("bad model header `{header}`"))),
    };

    let mut theta = Theta::zeros(dim, m);
    let mut seen = vec![false; dim];
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = k + 2;
        let mut tokens = line.split_whitespace();
        let id: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format(format!("line {lineno}: bad feature id")))?;
        if id >= dim {
            return Err(Error::Format(format!(
                "line {lineno}: feature id {id} outside dimension {dim}"
            )));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::Format(format!("line {lineno}: duplicate row {id}")));
        }
        let values: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Format(format!("line {lineno}: bad parameter value")))?;
        if values.len() != 2 * m {
            return Err(Error::Format(format!(
                "line {lineno}: expected {} values, got {}",
                2 * m,
                values.len()
            )));
        }
        theta.row_mut(id).copy_from_slice(&values);
    }
    Ok(theta)
}
