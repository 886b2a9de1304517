use lookalike_core::adam::{AdamParams, AdamState};
use lookalike_core::benchmark::{Benchmark, BenchmarkConfig};
use lookalike_core::gradcheck::check_triplet_gradient;
use lookalike_core::loss::{triplet_loss, triplet_loss_gradient, DEFAULT_MARGIN};
use lookalike_core::trainer::initial_head;
use lookalike_core::{seed, train, ProjectionHead, TrainConfig};
use proptest::prelude::*;
use rand::Rng;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-5;

fn rand_vec(rng: &mut seed::Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random triplets whose loss is comfortably inside the active branch.
fn active_triplets(head: &ProjectionHead, rng: &mut seed::Rng, n: usize) -> Vec<[Vec<f64>; 3]> {
    let mut out = Vec::new();
    while out.len() < n {
        let t = [rand_vec(rng, head.d_in()), rand_vec(rng, head.d_in()), rand_vec(rng, head.d_in())];
        let f = |x: &[f64]| head.forward(x).unwrap();
        if triplet_loss(&f(&t[0]), &f(&t[1]), &f(&t[2]), DEFAULT_MARGIN).unwrap() > 1e-3 {
            out.push(t);
        }
    }
    out
}

fn small_benchmark(seed: u64) -> Benchmark {
    Benchmark::build(&BenchmarkConfig {
        n_items: 200,
        n_identities: 100,
        train_tasks: 100,
        test_tasks: 30,
        seed,
        ..BenchmarkConfig::default()
    })
    .unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = seed::rng(21);
    for normalize in [false, true] {
        for (d_in, d_out) in [(8, 8), (10, 4)] {
            let head = ProjectionHead::near_identity(d_in, d_out, 0.3, normalize, &mut rng).unwrap();
            for [a, p, n] in active_triplets(&head, &mut rng, 50) {
                let r = check_triplet_gradient(&head, &a, &p, &n, DEFAULT_MARGIN, STEP, FLOOR).unwrap();
                assert!(r.max_rel_error < 1e-4, "normalize={normalize} {r:?}");
            }
        }
    }
}

#[test]
fn gradients_still_match_after_adam_steps() {
    let mut rng = seed::rng(22);
    let mut head = ProjectionHead::near_identity(6, 6, 1e-3, true, &mut rng).unwrap();
    let mut adam = AdamState::new(&head);
    let params = AdamParams {
        learning_rate: 1e-2,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
    let pool = active_triplets(&head, &mut rng, 40);
    for round in 0..5 {
        for [a, p, n] in &pool {
            let (_, g) = triplet_loss_gradient(&head, a, p, n, DEFAULT_MARGIN).unwrap();
            adam.step(&mut head, &g, &params);
        }
        for [a, p, n] in active_triplets(&head, &mut rng, 10) {
            let r = check_triplet_gradient(&head, &a, &p, &n, DEFAULT_MARGIN, STEP, FLOOR).unwrap();
            assert!(r.max_rel_error < 1e-4, "round {round}: {r:?}");
        }
    }
    assert_eq!(adam.steps(), 200);
}

#[test]
fn small_step_against_gradient_never_raises_loss() {
    let mut rng = seed::rng(23);
    for normalize in [false, true] {
        let head = ProjectionHead::near_identity(8, 6, 0.3, normalize, &mut rng).unwrap();
        for [a, p, n] in active_triplets(&head, &mut rng, 200) {
            let (loss, g) = triplet_loss_gradient(&head, &a, &p, &n, DEFAULT_MARGIN).unwrap();
            let mut moved = head.clone();
            for (w, d) in moved.weights.iter_mut().zip(&g.weights) {
                *w -= 1e-6 * d;
            }
            for (b, d) in moved.bias.iter_mut().zip(&g.bias) {
                *b -= 1e-6 * d;
            }
            let f = |x: &[f64]| moved.forward(x).unwrap();
            let after = triplet_loss(&f(&a), &f(&p), &f(&n), DEFAULT_MARGIN).unwrap();
            assert!(after <= loss, "{after} > {loss}");
        }
    }
}

/// Random orthogonal matrix from Gram-Schmidt on Gaussian columns.
fn rotation(d: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v = rand_vec(rng, d);
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            q.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    q
}

#[test]
fn loss_is_rotation_invariant() {
    let mut rng = seed::rng(24);
    for _ in 0..100 {
        let r = rotation(7, &mut rng);
        let rot = |x: &[f64]| -> Vec<f64> { r.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect() };
        let (a, p, n) = (rand_vec(&mut rng, 7), rand_vec(&mut rng, 7), rand_vec(&mut rng, 7));
        let l0 = triplet_loss(&a, &p, &n, 0.3).unwrap();
        let l1 = triplet_loss(&rot(&a), &rot(&p), &rot(&n), 0.3).unwrap();
        assert!((l0 - l1).abs() < 1e-8, "{l0} vs {l1}");
    }
}

proptest! {
    #[test]
    fn loss_nonnegative_and_zero_iff_margin_met(
        a in prop::collection::vec(-2.0f64..2.0, 4),
        p in prop::collection::vec(-2.0f64..2.0, 4),
        n in prop::collection::vec(-2.0f64..2.0, 4),
        alpha in 0.001f64..1.0,
    ) {
        let l = triplet_loss(&a, &p, &n, alpha).unwrap();
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(l >= 0.0);
        let slack = d(&a, &p) - d(&a, &n) + alpha;
        // away from the boundary, where the smoothed norm can shift the sign
        prop_assume!(slack.abs() > 1e-9);
        prop_assert_eq!(l == 0.0, d(&a, &n) >= d(&a, &p) + alpha);
    }
}

#[test]
fn zero_epochs_returns_initialization() {
    let b = small_benchmark(1);
    let cfg = TrainConfig {
        epochs: 0,
        seed: 9,
        ..TrainConfig::default()
    };
    let out = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).unwrap();
    assert!(out.loss_curve.is_empty());
    assert_eq!(out.head, initial_head(b.train.set.dim(), &cfg).unwrap());
    assert_eq!(out.loss_csv(), "epoch,mean_loss\n");
}

#[test]
fn hard_only_training_never_touches_tasks() {
    let b = small_benchmark(2);
    let cfg = TrainConfig {
        easy_prob: 0.0,
        epochs: 3,
        ..TrainConfig::default()
    };
    let with_tasks = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).unwrap();
    let without = train(&b.train.set, &b.train.hard, &[], &cfg).unwrap();
    assert_eq!(with_tasks.head, without.head);
    assert_eq!(with_tasks.loss_curve, without.loss_curve);
    let mixed = TrainConfig {
        easy_prob: 0.5,
        ..cfg
    };
    assert!(train(&b.train.set, &b.train.hard, &[], &mixed).is_err());
}

#[test]
fn training_is_bitwise_reproducible() {
    let b = small_benchmark(3);
    let cfg = TrainConfig {
        epochs: 4,
        seed: 5,
        ..TrainConfig::default()
    };
    let x = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).unwrap();
    let y = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).unwrap();
    assert_eq!(x.head.to_json(), y.head.to_json());
    assert_eq!(x.loss_csv(), y.loss_csv());
    let z = train(
        &b.train.set,
        &b.train.hard,
        &b.train.tasks,
        &TrainConfig { seed: 6, ..cfg },
    )
    .unwrap();
    assert_ne!(x.head, z.head);
}

#[test]
fn loss_settles_over_the_last_ten_of_thirty_epochs() {
    let b = Benchmark::build(&BenchmarkConfig::default()).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let out = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).unwrap();
    assert_eq!(out.loss_curve.len(), 30);
    // per-epoch means are noisy (batches are sampled with replacement), so the
    // window may wiggle; no epoch may climb more than 5% above where it started
    let tail = &out.loss_curve[20..];
    for &l in tail {
        assert!(l <= tail[0] * 1.05, "{tail:?}");
    }
    assert!(out.loss_curve[29] < out.loss_curve[0]);
}

#[test]
fn reduced_output_dimension() {
    let b = small_benchmark(5);
    let cfg = TrainConfig {
        epochs: 2,
        d_out: Some(8),
        normalize_output: false,
        ..TrainConfig::default()
    };
    let out = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).unwrap();
    assert_eq!((out.head.d_in(), out.head.d_out()), (32, 8));
    assert!(!out.head.normalize_output);
}

#[test]
fn invalid_configs_rejected() {
    let b = small_benchmark(6);
    for cfg in [
        TrainConfig { alpha: 0.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { easy_prob: -0.1, ..TrainConfig::default() },
        TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() },
    ] {
        assert!(train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).is_err(), "{cfg:?}");
    }
    assert!(train(&b.train.set, &[], &b.train.tasks, &TrainConfig::default()).is_err());
}
