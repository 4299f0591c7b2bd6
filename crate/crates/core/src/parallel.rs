//! Data-parallel loss and gradient evaluation.
//!
//! The training data is split into a fixed list of shards. Each evaluation
//! hands every worker thread a read-only view of the model, workers compute
//! the partial loss and gradient of the shards assigned to them into private
//! buffers, and the coordinator sums the partials with a pairwise tree over
//! shard index. The tree shape depends only on the shard count, so results
//! are bit-identical for any number of workers.

use std::ops::Deref;
use std::thread;

use crate::error::{Error, Result};
use crate::model::{GradMatrix, Theta};
use crate::objective::{block_loss_grad, loss_unchecked, Scratch};
use crate::sparse_data::{shard, GroupedDataset};

/// Shard count used when the caller does not pick one. Independent of the
/// worker count so that changing `--workers` never changes the arithmetic.
pub const DEFAULT_SHARDS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Pairwise sums over shard index, left half before right half.
    #[default]
    OrderedTree,
}

#[derive(Debug, Clone)]
pub struct ParallelCtx {
    shards: Vec<GroupedDataset>,
    n_workers: usize,
    reduction: Reduction,
    required_dim: usize,
    n_samples: usize,
}

/// Read-only model view shared by all workers during one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ModelSnapshot<'a>(&'a Theta);

impl Deref for ModelSnapshot<'_> {
    type Target = Theta;

    fn deref(&self) -> &Theta {
        self.0
    }
}

fn required_dim(data: &GroupedDataset) -> usize {
    data.blocks
        .iter()
        .flat_map(|b| std::iter::once(&b.common).chain(b.samples.iter().map(|s| &s.features)))
        .filter_map(|v| v.max_id())
        .map(|id| id as usize + 1)
        .max()
        .unwrap_or(0)
}

impl ParallelCtx {
    /// Shards `data` round-robin into `n_shards` pieces.
    pub fn new(data: &GroupedDataset, n_shards: usize, n_workers: usize) -> Result<Self> {
        Self::from_shards(shard(data, n_shards)?, n_workers)
    }

    pub fn from_shards(shards: Vec<GroupedDataset>, n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::InvalidArgument("worker count must be at least 1".into()));
        }
        if shards.is_empty() {
            return Err(Error::InvalidArgument("at least one shard is required".into()));
        }
        let required_dim = shards
            .iter()
            .map(|s| required_dim(s).max(s.dim))
            .max()
            .unwrap_or(0);
        let n_samples = shards.iter().map(GroupedDataset::n_samples).sum();
        Ok(Self {
            shards,
            n_workers,
            reduction: Reduction::OrderedTree,
            required_dim,
            n_samples,
        })
    }

    /// Same shards, different worker count.
    pub fn with_workers(mut self, n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::InvalidArgument("worker count must be at least 1".into()));
        }
        self.n_workers = n_workers;
        Ok(self)
    }

    pub fn shards(&self) -> &[GroupedDataset] {
        &self.shards
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn reduction(&self) -> Reduction {
        self.reduction
    }

    /// Smallest model dimension covering every feature id in the shards.
    pub fn dim(&self) -> usize {
        self.required_dim
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn broadcast_model<'a>(&self, theta: &'a Theta) -> ModelSnapshot<'a> {
        ModelSnapshot(theta)
    }

    fn check_dim(&self, theta: &Theta) -> Result<()> {
        if theta.dim() < self.required_dim {
            return Err(Error::Dimension {
                id: self.required_dim - 1,
                dim: theta.dim(),
            });
        }
        Ok(())
    }

    /// Runs `work` on every shard and returns the per-shard results in shard
    /// order.
    fn map_shards<T, F>(&self, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&GroupedDataset) -> T + Sync,
    {
        let n_shards = self.shards.len();
        let n_workers = self.n_workers.min(n_shards);
        if n_workers == 1 {
            return self.shards.iter().map(&work).collect();
        }
        let mut slots: Vec<Option<T>> = (0..n_shards).map(|_| None).collect();
        thread::scope(|scope| {
            let handles: Vec<_> = (0..n_workers)
                .map(|w| {
                    let work = &work;
                    let shards = &self.shards;
                    scope.spawn(move || {
                        (w..n_shards)
                            .step_by(n_workers)
                            .map(|k| (k, work(&shards[k])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (k, out) in h.join().expect("worker panicked") {
                    slots[k] = Some(out);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every shard is assigned to a worker"))
            .collect()
    }

    /// Loss and gradient summed over every shard.
    pub fn eval_loss_grad(&self, theta: &Theta) -> Result<(f64, GradMatrix)> {
        self.check_dim(theta)?;
        let snapshot = self.broadcast_model(theta);
        let partials = self.map_shards(|shard| {
            let mut grad = GradMatrix::zeros(snapshot.dim(), snapshot.m());
            let mut scratch = Scratch::new(snapshot.cols());
            let loss = shard
                .blocks
                .iter()
                .map(|b| block_loss_grad(&snapshot, b, &mut grad, &mut scratch))
                .sum::<f64>();
            (loss, grad)
        });
        Ok(tree_reduce(partials, |(la, mut ga), (lb, gb)| {
            ga.axpy(1.0, &gb);
            (la + lb, ga)
        }))
    }

    /// Loss only.
    pub fn eval_loss(&self, theta: &Theta) -> Result<f64> {
        self.check_dim(theta)?;
        let snapshot = self.broadcast_model(theta);
        let partials = self.map_shards(|shard| loss_unchecked(&snapshot, shard));
        Ok(tree_reduce(partials, |a, b| a + b))
    }
}

/// Pairwise reduction: `reduce(items[..mid]) + reduce(items[mid..])` with
/// `mid = len / 2`.
pub fn tree_reduce<T>(mut items: Vec<T>, combine: impl Fn(T, T) -> T + Copy) -> T {
    assert!(!items.is_empty(), "nothing to reduce");
    if items.len() == 1 {
        return items.pop().unwrap();
    }
    let right = items.split_off(items.len() / 2);
    let l = tree_reduce(items, combine);
    let r = tree_reduce(right, combine);
    combine(l, r)
}
