mod common;

use common::*;
use ivcnav::model::{build_tiny_x3d, Weights};
use ivcnav::train::*;

#[test]
fn one_block_gradients_match_central_differences() {
    let r = gradcheck_blocks(1, 0);
    assert_eq!(r.checked, r.trainable, "small model is checked exhaustively");
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
}

#[test]
fn two_block_gradients_match_central_differences() {
    for seed in [0, 1] {
        let r = gradcheck_blocks(2, seed);
        assert!(r.max_rel_error <= 1e-4, "seed {seed}: {r:?}");
    }
}

#[test]
fn squared_loss_gradients_match() {
    let (spec, w, batch) = gradcheck_model(1, 5);
    let r = grad_check(&spec, &w, &batch, LossKind::Squared, 1e-4, 5).unwrap();
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
}

#[test]
fn tiny_x3d_subsampled_gradcheck() {
    let (spec, w) = build_tiny_x3d([4, 16, 16], [2, 2, 2, 2], 9).unwrap();
    let mut r = rng(9);
    let clips = vec![random_clip(&mut r, [4, 16, 16]), random_clip(&mut r, [4, 16, 16])];
    let batch = Batch::new(clips, vec![0.0, 1.0]).unwrap();
    let report = grad_check(&spec, &w.cast::<f64>(), &batch, LossKind::Logistic, 1e-4, 9).unwrap();
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}

#[test]
fn loss_derivatives() {
    // d/dz of BCE is sigmoid(z) - y.
    let (l, g) = logistic_loss(0.0, 1.0);
    assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((g + 0.5).abs() < 1e-12);
    let (l, g) = logistic_loss(800.0, 1.0);
    assert!(l.is_finite() && l < 1e-300 && (g - 0.0).abs() < 1e-12);
    let (l, g) = logistic_loss(-800.0, 1.0);
    assert!((l - 800.0).abs() < 1e-9 && (g + 1.0).abs() < 1e-12);
    assert_eq!(logistic_loss(0.0, 0.0), (std::f64::consts::LN_2, 0.5));
    let (l, g) = logistic_loss(3.0, 1.0);
    assert!((l - (1.0 + (-3.0f64).exp()).ln()).abs() <= 1e-9);
    assert!((g - (1.0 / (1.0 + (-3.0f64).exp()) - 1.0)).abs() <= 1e-9);
    assert_eq!(squared_loss(3.0, 1.0), (2.0, 2.0));
}

#[test]
fn saturated_outputs_give_no_learning_signal() {
    let (spec, mut w, _) = gradcheck_model(1, 3);
    let mut r = rng(3);
    let clips = (0..4).map(|_| random_clip(&mut r, [2, 4, 4])).collect();
    let batch = Batch::new(clips, vec![1.0; 4]).unwrap();
    w.get_mut("head.bias").unwrap().data[0] = 60.0;
    let out = backward(&spec, &w, &batch, LossKind::Logistic).unwrap();
    let norm = out.grads.blocks.iter().flat_map(|b| b.data.iter()).map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm < 1e-6, "{norm}");
}

#[test]
fn gradient_is_mean_over_batch() {
    let (spec, w, _) = gradcheck_model(1, 4);
    let mut r = rng(4);
    let a = random_clip(&mut r, [2, 4, 4]);
    let single = Batch::new(vec![a.clone()], vec![1.0]).unwrap();
    // Duplicating a sample leaves batch statistics and the mean unchanged.
    let double = Batch::new(vec![a.clone(), a], vec![1.0, 1.0]).unwrap();
    let g1 = backward(&spec, &w, &single, LossKind::Logistic).unwrap();
    let g2 = backward(&spec, &w, &double, LossKind::Logistic).unwrap();
    assert!((g1.loss - g2.loss).abs() < 1e-12);
    for (p, q) in g1.grads.blocks.iter().zip(&g2.grads.blocks) {
        for (x, y) in p.data.iter().zip(&q.data) {
            assert!((x - y).abs() <= 1e-7);
        }
    }
}

#[test]
fn weights_unchanged_by_gradcheck() {
    let (spec, w, batch) = gradcheck_model(1, 2);
    let before: Weights<f64> = w.clone();
    grad_check(&spec, &w, &batch, LossKind::Logistic, 1e-4, 2).unwrap();
    assert_eq!(before, w);
}
