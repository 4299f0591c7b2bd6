//! Large-scale piece-wise linear classification for sparse data.
//!
//! A model with `m` regions scores an instance `x` as
//! `p(y = 1 | x) = sum_j softmax(u . x)_j * sigmoid(w_j . x)`, with the
//! divider vectors `u_j` and fitter vectors `w_j` stored row-per-feature in a
//! [`Theta`] matrix. Training minimizes the summed log loss plus an L1 penalty
//! and an L2,1 penalty on feature rows with an orthant-wise quasi-Newton
//! method, optionally in parallel and with shared per-block features
//! factored out of the dot products.
//!
//! ```
//! use lsplm::{gen_synthetic, train, Hyperparams, ParallelCtx, Pattern, SynthSpec};
//!
//! let data = gen_synthetic(&SynthSpec { n: 200, noise: 0.0, pattern: Pattern::Xor, seed: 1 })?;
//! let ctx = ParallelCtx::new(&data.ungrouped(), 4, 2)?;
//! let hyper = Hyperparams { m: 4, beta: 0.01, lambda: 0.01, max_iters: 20, ..Default::default() };
//! let (theta, report) = train(&ctx, &hyper)?;
//! assert_eq!(theta.m(), 4);
//! assert!(report.final_objective().is_finite());
//! # Ok::<(), lsplm::Error>(())
//! ```

pub mod cli;
pub mod direction;
pub mod error;
pub mod eval;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod parallel;
pub mod sparse_data;

pub use direction::{descent_direction, orthant_mask, project, OrthantMask, SignPattern};
pub use error::{Error, Result};
pub use eval::{auc, evaluate, mean_logloss, EvalReport};
pub use model::{
    init_theta, load_model, nnz_stats, predict, predict_block, save_model, Direction, GradMatrix,
    Hyperparams, ParamMatrix, PredOutput, Theta,
};
pub use objective::{
    directional_derivative, grad_loss, l1_norm, l21_norm, loss, loss_and_grad, objective,
    regularizer, PROB_EPS,
};
pub use optimizer::{
    line_search, train, train_from, train_observed, two_loop, update_direction, LbfgsHistory,
    LineSearchParams, Termination, TrainReport,
};
pub use parallel::{ParallelCtx, DEFAULT_SHARDS};
pub use sparse_data::{
    gen_synthetic, group_by_common, load_dataset, load_grouped, shard, Dataset, FeatureId,
    GroupedBlock, GroupedDataset, Instance, Pattern, SparseVector, SynthSpec,
};
