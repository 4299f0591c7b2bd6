mod common;

use common::*;
use lsplm::optimizer::LbfgsHistory;
use lsplm::{
    descent_direction, directional_derivative, evaluate, grad_loss, loss, loss_and_grad,
    objective, predict, predict_block, train, two_loop, Dataset, GroupedBlock, GroupedDataset,
    Hyperparams, Instance, ParallelCtx, ParamMatrix, SparseVector, Theta,
};
use rand::Rng;

#[test]
fn loss_matches_dense_definition() {
    let mut r = rng(1);
    for _ in 0..10 {
        let m = r.gen_range(1..4);
        let data = random_data(&mut r, 7, 20, 0.5);
        let theta = random_theta(&mut r, 7, m, 1.0);
        let a = loss(&theta, &data.ungrouped()).unwrap();
        let b = naive_loss(&theta, &data);
        assert!((a - b).abs() < 1e-10 * b.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(2);
    for _ in 0..5 {
        let m = [1, 2, 3][r.gen_range(0..3)];
        let dim = r.gen_range(2..8);
        let data = random_data(&mut r, dim, 30, 0.6);
        let theta = random_theta(&mut r, dim, m, 0.8);
        let g = grad_loss(&theta, &data.ungrouped()).unwrap();
        let fd = fd_grad(&theta, &data, 1e-6);
        for (a, b) in g.as_slice().iter().zip(fd.as_slice()) {
            if a.abs() > 1e-8 {
                assert!((a - b).abs() / a.abs() < 1e-5, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn saturated_predictions_keep_finite_gradients() {
    let data = Dataset::new(vec![
        Instance::new(SparseVector::from_pairs(vec![(0, 1.0), (1, 50.0)]).unwrap(), false),
        Instance::new(SparseVector::from_pairs(vec![(0, 1.0), (1, -50.0)]).unwrap(), true),
    ]);
    let mut theta = Theta::zeros(2, 2);
    theta.set(1, 2, 40.0);
    theta.set(1, 3, 30.0);
    theta.set(1, 0, 20.0);
    let (l, g) = loss_and_grad(&theta, &data.ungrouped()).unwrap();
    assert!(l.is_finite() && g.is_finite());
}

fn mixed_theta(r: &mut impl Rng) -> Theta {
    // row 0 fully nonzero, row 1 partly zero, row 2 zero
    let mut theta = Theta::zeros(3, 2);
    for c in 0..4 {
        theta.set(0, c, r.gen_range(0.2..1.0) * if r.gen() { 1.0 } else { -1.0 });
    }
    theta.set(1, 1, 0.7);
    theta.set(1, 2, -0.4);
    theta
}

#[test]
fn directional_derivative_matches_numeric_limit() {
    let mut r = rng(3);
    for _ in 0..10 {
        let data = random_data(&mut r, 3, 25, 0.8);
        let theta = mixed_theta(&mut r);
        let dir = random_theta(&mut r, 3, 2, 1.0);
        let (beta, lambda) = (r.gen_range(0.0..2.0), r.gen_range(0.0..2.0));
        let g = grad_loss(&theta, &data.ungrouped()).unwrap();
        let closed = directional_derivative(&theta, &dir, &g, beta, lambda);
        let numeric = richardson_directional(|t| naive_objective(t, &data, beta, lambda), &theta, &dir);
        assert!((closed - numeric).abs() <= 1e-4 * closed.abs().max(1e-3), "{closed} vs {numeric}");
    }
}

fn unit(r: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[test]
fn descent_direction_beats_random_directions() {
    let mut r = rng(4);
    for _ in 0..5 {
        let data = random_data(&mut r, 2, 12, 0.9);
        let mut theta = random_theta(&mut r, 2, 2, 0.5);
        theta.as_mut_slice()[r.gen_range(0..8)] = 0.0;
        if r.gen() {
            theta.row_mut(1).fill(0.0);
        }
        let (beta, lambda) = (r.gen_range(0.0..1.0), r.gen_range(0.0..1.0));
        let g = grad_loss(&theta, &data.ungrouped()).unwrap();
        let mut d = descent_direction(&theta, &g, beta, lambda);
        if d.norm() > 0.0 {
            d.scale(1.0 / d.norm());
        }
        let ours = directional_derivative(&theta, &d, &g, beta, lambda);
        let best = (0..20_000)
            .map(|_| {
                let u = ParamMatrix::from_vec(2, 2, unit(&mut r, 8)).unwrap();
                directional_derivative(&theta, &u, &g, beta, lambda)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(ours <= best + 1e-6, "{ours} vs {best}");
    }
}

#[test]
fn l1_only_direction_is_negative_pseudo_gradient() {
    let mut r = rng(5);
    for _ in 0..10 {
        let mut theta = random_theta(&mut r, 4, 2, 1.0);
        for v in theta.as_mut_slice() {
            if r.gen::<f64>() < 0.4 {
                *v = 0.0;
            }
        }
        let g = random_theta(&mut r, 4, 2, 2.0);
        let beta = r.gen_range(0.0..1.5);
        let d = descent_direction(&theta, &g, beta, 0.0);
        for (a, b) in d.as_slice().iter().zip(l1_pseudo_direction(&theta, &g, beta)) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn two_loop_matches_dense_bfgs() {
    let mut r = rng(6);
    for _ in 0..10 {
        let mut history = LbfgsHistory::new(5);
        let mut pairs = Vec::new();
        while pairs.len() < 2 {
            let s = random_theta(&mut r, 2, 1, 1.0);
            let mut y = s.clone();
            y.scale(r.gen_range(0.5..2.0));
            y.axpy(0.3, &random_theta(&mut r, 2, 1, 1.0));
            if history.push(s.clone(), y.clone()).is_some() {
                pairs.push((s.into_vec(), y.into_vec()));
            }
        }
        let d = random_theta(&mut r, 2, 1, 1.0);
        let ours = two_loop(&history, &d);
        let oracle = mat_vec(&dense_bfgs_inverse(&pairs), d.as_slice());
        for (a, b) in ours.as_slice().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn single_region_unpenalized_is_logistic_regression() {
    let data = noisy_linear(300, 9);
    let ctx = ParallelCtx::new(&data.ungrouped(), 4, 2).unwrap();
    let hyper = Hyperparams { m: 1, beta: 0.0, lambda: 0.0, tol: 1e-10, max_iters: 500, ..Default::default() };
    let (theta, _) = train(&ctx, &hyper).unwrap();
    let ours = evaluate(&theta, &data).unwrap().logloss;
    let w = logistic_regression_gd(&data, 1e-8, 200_000);
    let oracle = lr_mean_logloss(&w, &data);
    assert!((ours - oracle).abs() < 1e-6, "{ours} vs {oracle}");
    for (i, wi) in w.iter().enumerate() {
        assert!((theta.get(i, 1) - wi).abs() < 1e-3);
    }
}

#[test]
fn separable_data_scores_perfectly() {
    let data = separable_with_margin(200, 0.1, 11);
    let ctx = ParallelCtx::new(&data.ungrouped(), 4, 1).unwrap();
    let hyper = Hyperparams { m: 1, beta: 0.0, lambda: 0.0, max_iters: 50, ..Default::default() };
    let (theta, _) = train(&ctx, &hyper).unwrap();
    assert_eq!(evaluate(&theta, &data).unwrap().auc, Some(1.0));
}

fn grouped_fixture(r: &mut impl Rng) -> GroupedDataset {
    // common ids 0..4 sort before the per-sample ids 4..8
    let blocks = (0..6)
        .map(|_| {
            let common: Vec<(u32, f64)> = (0..4).map(|id| (id, r.gen_range(-1.0..1.0))).collect();
            let samples = (0..r.gen_range(1..5))
                .map(|_| {
                    let mut own = Vec::new();
                    for id in 4..8 {
                        if r.gen::<f64>() < 0.7 {
                            own.push((id, r.gen_range(-1.0..1.0)));
                        }
                    }
                    Instance::new(SparseVector::from_pairs(own).unwrap(), r.gen())
                })
                .collect();
            GroupedBlock::new(SparseVector::from_pairs(common).unwrap(), samples).unwrap()
        })
        .collect();
    GroupedDataset::new(blocks)
}

#[test]
fn block_prediction_matches_flat_prediction_bitwise() {
    let mut r = rng(12);
    let data = grouped_fixture(&mut r);
    let theta = random_theta(&mut r, 8, 3, 1.0);
    for block in &data.blocks {
        let grouped = predict_block(&theta, block).unwrap();
        for (out, inst) in grouped.iter().zip(block.flatten()) {
            let flat = predict(&theta, &inst.features).unwrap();
            assert_eq!(out.p.to_bits(), flat.p.to_bits());
        }
    }
}

#[test]
fn grouped_and_flat_objectives_agree() {
    let mut r = rng(13);
    let data = grouped_fixture(&mut r);
    let flat = data.flatten().ungrouped();
    let theta = random_theta(&mut r, 8, 2, 1.0);
    let (lg, gg) = loss_and_grad(&theta, &data).unwrap();
    let (lf, gf) = loss_and_grad(&theta, &flat).unwrap();
    assert!((lg - lf).abs() < 1e-10);
    for (a, b) in gg.as_slice().iter().zip(gf.as_slice()) {
        assert!((a - b).abs() < 1e-10);
    }
    let o = objective(&theta, &data, 0.3, 0.2).unwrap();
    assert!((o - naive_objective(&theta, &data.flatten(), 0.3, 0.2)).abs() < 1e-9);
}
