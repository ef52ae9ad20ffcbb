use holofocus::quadratic::{
    descend, iterations_to_threshold, member_weights, rate_bound_excess, LossKind, QuadraticEnsemble,
};
use holofocus::runner::{quadratic, QuadraticArgs};
use proptest::prelude::*;

#[test]
fn ensemble_respects_sampling_ranges() {
    for seed in 0..10 {
        let e = QuadraticEnsemble::generate_with_dim(50, 2, seed).unwrap();
        assert!(e.a.iter().all(|&a| (1.0..3.0).contains(&a)));
        assert!(e.b.iter().flatten().all(|&b| (-5.0..5.0).contains(&b)));
        assert!(e.c.iter().all(|&c| (0.0..400.0).contains(&c)));
        assert_eq!(e.c[e.ground_index], 0.0);
        assert!(e.ground_loss(&e.optimum()) < 1e-24);
        let max_a = e.a.iter().copied().fold(0.0, f64::max);
        assert_eq!(e.lipschitz(), 2.0 * max_a * max_a);
    }
}

#[test]
fn ground_index_is_not_fixed() {
    let indices: std::collections::HashSet<usize> =
        (0..40).map(|s| QuadraticEnsemble::generate(5, s).unwrap().ground_index).collect();
    assert!(indices.len() > 1);
}

#[test]
fn single_member_makes_every_kind_identical() {
    let e = QuadraticEnsemble::generate(1, 9).unwrap();
    let ground = descend(&e, LossKind::Ground, &[10.0], 50).unwrap();
    for kind in LossKind::ALL {
        assert_eq!(descend(&e, kind, &[10.0], 50).unwrap().iterates, ground.iterates);
    }
}

#[test]
fn optimum_is_a_fixed_point_of_reverse_attention_descent() {
    for seed in 0..5 {
        let e = QuadraticEnsemble::generate_with_dim(20, 3, seed).unwrap();
        let x = e.optimum();
        let w = member_weights(&e, LossKind::ReverseAttention, &x).unwrap();
        assert_eq!(w[e.ground_index], 1.0);
        let trace = descend(&e, LossKind::ReverseAttention, &x, 5).unwrap();
        assert!(trace.final_error(&x) < 1e-12);
    }
}

#[test]
fn non_weighted_settles_at_the_pooled_minimizer() {
    let e = QuadraticEnsemble::generate(5, 3).unwrap();
    let num: f64 = e.a.iter().zip(&e.b).map(|(a, b)| a * b[0]).sum();
    let den: f64 = e.a.iter().map(|a| a * a).sum();
    let pooled = num / den;
    let trace = descend(&e, LossKind::NonWeighted, &[10.0], 500).unwrap();
    assert!((trace.final_iterate()[0] - pooled).abs() < 1e-9);
}

#[test]
fn alternating_follows_the_smallest_member() {
    let e = QuadraticEnsemble::generate(6, 4).unwrap();
    let x = [2.0];
    let w = member_weights(&e, LossKind::Alternating, &x).unwrap();
    let losses = e.losses(&x);
    let best = w.iter().position(|&v| v == 1.0).unwrap();
    assert!(losses.iter().all(|&l| l >= losses[best]));
    assert_eq!(w.iter().sum::<f64>(), 1.0);
}

#[test]
fn trace_bookkeeping() {
    let e = QuadraticEnsemble::generate(5, 0).unwrap();
    let trace = descend(&e, LossKind::ReverseAttention, &[10.0], 40).unwrap();
    assert_eq!(trace.iterates.len(), 41);
    assert_eq!(trace.weights.len(), 41);
    for (w, (l, total)) in trace.weights.iter().zip(trace.member_losses.iter().zip(&trace.totals)) {
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mixed: f64 = w.iter().zip(l).map(|(a, b)| a * b).sum();
        assert!((mixed - total).abs() <= 1e-12 * total.abs().max(1.0));
    }
    assert_eq!(trace.step_size, 1.0 / e.lipschitz());
}

#[test]
fn runaway_start_is_reported() {
    let e = QuadraticEnsemble::generate(3, 0).unwrap();
    let err = descend(&e, LossKind::Ground, &[1e7], 10).unwrap_err();
    assert_eq!(err.kind(), "descent_diverged");
    assert!(descend(&e, LossKind::Ground, &[1.0, 2.0], 10).is_err());
    assert!(QuadraticEnsemble::generate(0, 0).is_err());
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let args = QuadraticArgs { ns: vec![2, 5], seeds: 3, surface: true, out: Some(dir.path().into()), ..Default::default() };
    let report = quadratic(&args).unwrap();
    assert_eq!(report.rows.len(), 2 * 3 * LossKind::ALL.len());
    for name in ["summary.csv", "rates.csv", "surface_n2.csv", "surface_n5.csv", "manifest.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    assert!(dir.path().join("traces/n5_seed2_reverse-attention.csv").is_file());
    let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert!(rates.starts_with("n,kind,median_iterations,reached,max_final_error\n"));
    assert_eq!(rates.lines().count(), 1 + 2 * LossKind::ALL.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ground_descent_respects_the_rate_bound(n in 1usize..40, seed in any::<u64>(), x0 in -50.0f64..50.0) {
        let e = QuadraticEnsemble::generate(n, seed).unwrap();
        let trace = descend(&e, LossKind::Ground, &[x0], 200).unwrap();
        prop_assert!(rate_bound_excess(&trace, &e.optimum()) <= 1e-9);
        // gaps never increase under a 1/C step on a convex quadratic
        prop_assert!(trace.ground_gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn ground_descent_reaches_threshold(n in 1usize..40, seed in any::<u64>()) {
        let e = QuadraticEnsemble::generate(n, seed).unwrap();
        let trace = descend(&e, LossKind::Ground, &[10.0], 500).unwrap();
        prop_assert!(iterations_to_threshold(&trace, 1e-4).is_some());
    }
}
