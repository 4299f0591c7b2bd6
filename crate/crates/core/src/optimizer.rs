//! Orthant-wise limited-memory quasi-Newton training.
//!
//! Each iteration:
//! 1. computes the steepest descent direction `d` of the penalized objective;
//! 2. turns it into an update direction `p` with the L-BFGS inverse-Hessian
//!    approximation, zeroing entries whose sign disagrees with `d` (plain `d`
//!    is used while no trustworthy curvature pair is available);
//! 3. backtracks along `p`, projecting every trial point onto the orthant of
//!    the current iterate so that no parameter changes sign within a step;
//! 4. stores the pair `(theta_k - theta_{k-1}, d_{k-1} - d_k)` when its
//!    curvature is positive.

use std::collections::VecDeque;

use crate::direction::{descent_direction, orthant_mask, project, OrthantMask};
use crate::error::{Error, Result};
use crate::model::{init_theta, nnz_stats, Direction, Hyperparams, Theta};
use crate::objective::regularizer;
use crate::parallel::ParallelCtx;

/// Pairs with `y.s <= CURVATURE_EPS * |s| |y|` are never stored.
pub const CURVATURE_EPS: f64 = 1e-10;

/// Successive small relative decreases needed to declare convergence.
const PLATEAU_PATIENCE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchParams {
    /// Sufficient-decrease coefficient.
    pub c1: f64,
    /// Step shrink factor per trial.
    pub backtrack: f64,
    pub max_trials: usize,
    /// First step length tried.
    pub alpha0: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            backtrack: 0.5,
            max_trials: 50,
            alpha0: 1.0,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.c1) || !unit(self.backtrack) {
            return Err(Error::InvalidArgument("c1 and backtrack must lie in (0, 1)".into()));
        }
        if self.max_trials == 0 || !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidArgument(
                "line search needs max_trials >= 1 and a positive finite alpha0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CurvaturePair {
    pub s: Direction,
    pub y: Direction,
    /// `1 / (y.s)`
    pub rho: f64,
}

/// Bounded queue of curvature pairs, oldest first.
#[derive(Debug, Clone)]
pub struct LbfgsHistory {
    capacity: usize,
    pairs: VecDeque<CurvaturePair>,
}

impl LbfgsHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    /// Stores the pair if `y.s > CURVATURE_EPS * |s| |y|` and returns `y.s`;
    /// returns `None` and leaves the history untouched otherwise.
    pub fn push(&mut self, s: Direction, y: Direction) -> Option<f64> {
        let ys = y.dot(&s);
        let scale = s.norm() * y.norm();
        if !ys.is_finite() || ys <= CURVATURE_EPS * scale {
            return None;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { s, y, rho: 1.0 / ys });
        Some(ys)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }
}

/// `H d` by the two-loop recursion, with `H_0 = gamma I` and
/// `gamma = s.y / y.y` from the newest pair.
pub fn two_loop(history: &LbfgsHistory, d: &Direction) -> Direction {
    let Some(newest) = history.pairs.back() else {
        return d.clone();
    };
    let mut q = d.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.pairs.iter().rev() {
        let a = pair.rho * pair.s.dot(&q);
        q.axpy(-a, &pair.y);
        alphas.push(a);
    }
    let gamma = newest.s.dot(&newest.y) / newest.y.dot(&newest.y);
    q.scale(gamma);
    for (pair, a) in history.pairs.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * pair.y.dot(&q);
        q.axpy(a - b, &pair.s);
    }
    q
}

/// The quasi-Newton direction restricted to the orthant of `d`, or `d`
/// itself when the history is empty or the latest curvature is not positive.
/// Returns whether the quasi-Newton branch was taken.
pub fn update_direction(
    history: &LbfgsHistory,
    d: &Direction,
    last_pair_curvature: f64,
) -> (Direction, bool) {
    if last_pair_curvature > 0.0 && !history.is_empty() {
        let hd = two_loop(history, d);
        let p = project(&hd, d).expect("two_loop preserves shape");
        (p, true)
    } else {
        (d.clone(), false)
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    /// Accepted point, or the starting point when nothing was accepted.
    pub theta: Theta,
    pub alpha: f64,
    /// Objective at `theta`.
    pub objective: f64,
    pub accepted: bool,
}

/// Backtracking search over `alpha0 * backtrack^t`. Each trial point is
/// `project(theta + alpha p, xi)` and is accepted when
/// `f(trial) <= f(theta) - c1 * sum_ij d_ij (trial_ij - theta_ij)`.
/// Trials that do not move or evaluate to a non-finite value are rejected.
pub fn line_search(
    mut objective_fn: impl FnMut(&Theta) -> f64,
    theta: &Theta,
    current_objective: f64,
    p: &Direction,
    xi: &OrthantMask,
    d: &Direction,
    params: &LineSearchParams,
) -> LineSearchOutcome {
    let mut alpha = params.alpha0;
    for _ in 0..params.max_trials {
        let mut trial = theta.clone();
        trial.axpy(alpha, p);
        let trial = project(&trial, xi).expect("direction and mask share the model shape");
        let decrease: f64 = d
            .as_slice()
            .iter()
            .zip(trial.as_slice().iter().zip(theta.as_slice()))
            .map(|(dv, (t, t0))| dv * (t - t0))
            .sum();
        if trial != *theta {
            let f = objective_fn(&trial);
            if f.is_finite() && f <= current_objective - params.c1 * decrease {
                return LineSearchOutcome {
                    theta: trial,
                    alpha,
                    objective: f,
                    accepted: true,
                };
            }
        }
        alpha *= params.backtrack;
    }
    LineSearchOutcome {
        theta: theta.clone(),
        alpha: 0.0,
        objective: current_objective,
        accepted: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative objective decrease stayed below `tol` for several steps.
    ConvergedTol,
    MaxIters,
    /// Every entry of the steepest direction fell below `tol` in magnitude.
    ZeroDirection,
    LineSearchFailed,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ConvergedTol => "converged_tol",
            Termination::MaxIters => "max_iters",
            Termination::ZeroDirection => "zero_direction",
            Termination::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub step: f64,
    pub nnz_params: usize,
    pub nnz_features: usize,
    pub used_quasi_newton: bool,
}

/// Trace of a training run. The first record describes the starting point
/// (`k = 0`, `step = 0`); every later one an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
}

impl TrainReport {
    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Everything about one accepted step, handed to training observers.
#[derive(Debug)]
pub struct StepView<'a> {
    pub k: usize,
    pub previous: &'a Theta,
    pub theta: &'a Theta,
    pub mask: &'a OrthantMask,
    pub steepest: &'a Direction,
    pub update: &'a Direction,
    pub alpha: f64,
    pub objective: f64,
    pub used_quasi_newton: bool,
}

fn record(k: usize, theta: &Theta, objective: f64, step: f64, used_qn: bool) -> IterationRecord {
    let (nnz_params, nnz_features) = nnz_stats(theta);
    IterationRecord {
        k,
        objective,
        step,
        nnz_params,
        nnz_features,
        used_quasi_newton: used_qn,
    }
}

/// Trains from the seeded initialization.
pub fn train(ctx: &ParallelCtx, hyper: &Hyperparams) -> Result<(Theta, TrainReport)> {
    train_observed(ctx, hyper, |_| {})
}

pub fn train_observed(
    ctx: &ParallelCtx,
    hyper: &Hyperparams,
    observer: impl FnMut(&StepView<'_>),
) -> Result<(Theta, TrainReport)> {
    hyper.validate()?;
    let theta0 = init_theta(ctx.dim(), hyper);
    train_from(ctx, hyper, theta0, observer)
}

/// Trains from an explicit starting point.
pub fn train_from(
    ctx: &ParallelCtx,
    hyper: &Hyperparams,
    theta0: Theta,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<(Theta, TrainReport)> {
    hyper.validate()?;
    if ctx.n_samples() == 0 {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    if theta0.m() != hyper.m {
        return Err(Error::Shape(format!(
            "initial model has {} regions, hyperparameters ask for {}",
            theta0.m(),
            hyper.m
        )));
    }
    let (beta, lambda) = (hyper.beta, hyper.lambda);
    let objective_at = |theta: &Theta, loss: f64| loss + regularizer(theta, beta, lambda);

    let mut theta = theta0;
    let (loss0, mut grad) = ctx.eval_loss_grad(&theta)?;
    let mut f = objective_at(&theta, loss0);
    let mut iterations = vec![record(0, &theta, f, 0.0, false)];
    let mut history = LbfgsHistory::new(hyper.lbfgs_memory);
    let mut previous: Option<(Theta, Direction)> = None;
    let mut plateau = 0;

    for k in 1..=hyper.max_iters {
        let d = descent_direction(&theta, &grad, beta, lambda);
        if d.max_abs() < hyper.tol {
            return Ok((theta, TrainReport { iterations, termination: Termination::ZeroDirection }));
        }

        let mut curvature = 0.0;
        if let Some((prev_theta, prev_d)) = previous.take() {
            let s = theta.sub(&prev_theta);
            let y = prev_d.sub(&d);
            curvature = history.push(s, y).unwrap_or(0.0);
        }
        let (mut p, mut used_qn) = update_direction(&history, &d, curvature);
        let xi = orthant_mask(&theta, &d);

        let mut last_eval = None;
        let search = |p: &Direction, last_eval: &mut Option<_>| {
            line_search(
                |cand| match ctx.eval_loss_grad(cand) {
                    Ok((l, g)) => {
                        let value = objective_at(cand, l);
                        *last_eval = Some(g);
                        value
                    }
                    Err(_) => f64::NAN,
                },
                &theta,
                f,
                p,
                &xi,
                &d,
                &hyper.ls,
            )
        };
        let mut outcome = search(&p, &mut last_eval);
        if !outcome.accepted && used_qn {
            // the curvature model misled the search; restart from steepest descent
            history.clear();
            p = d.clone();
            used_qn = false;
            outcome = search(&p, &mut last_eval);
        }
        if !outcome.accepted {
            return Ok((theta, TrainReport { iterations, termination: Termination::LineSearchFailed }));
        }

        grad = last_eval.expect("accepted point was evaluated last");
        observer(&StepView {
            k,
            previous: &theta,
            theta: &outcome.theta,
            mask: &xi,
            steepest: &d,
            update: &p,
            alpha: outcome.alpha,
            objective: outcome.objective,
            used_quasi_newton: used_qn,
        });
        let f_new = outcome.objective;
        let rel = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        iterations.push(record(k, &outcome.theta, f_new, outcome.alpha, used_qn));
        previous = Some((std::mem::replace(&mut theta, outcome.theta), d));
        f = f_new;

        plateau = if rel < hyper.tol { plateau + 1 } else { 0 };
        if plateau >= PLATEAU_PATIENCE {
            return Ok((theta, TrainReport { iterations, termination: Termination::ConvergedTol }));
        }
    }
    Ok((theta, TrainReport { iterations, termination: Termination::MaxIters }))
}
