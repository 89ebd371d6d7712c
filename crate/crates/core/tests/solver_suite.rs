mod common;

use common::random_system;
use hnf_precoding::solver::{delta_update, penalty_objective, v_update};
use hnf_precoding::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_real(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

#[test]
fn oracle_never_loses_to_iterative_or_to_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let (n, k) = (rng.random_range(2..=8), rng.random_range(1..=2));
        let system = random_system(&mut rng, n, k.min(n), 4);
        let oracle = solve_oracle(&system).unwrap();
        assert!(system.is_satisfied(&oracle.v_stacked, 1e-9));
        let (it, _) = solve_iterative(&system, &SolverConfig::default()).unwrap();
        if !it.repair.failed() {
            assert!(oracle.objective <= it.objective + 1e-6);
        }
        // random feasible points: scale random directions outward
        for _ in 0..25 {
            let dir = gaussian_real(&mut rng, 2 * n);
            let (p, outcome) = solver::scale_to_feasibility(&system, &dir);
            if !outcome.failed() {
                assert!(p.norm_squared() >= oracle.objective * (1.0 - 1e-9));
            }
        }
    }
}

#[test]
fn oracle_beats_a_thousand_feasible_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let system = random_system(&mut rng, 4, 2, 4);
    let oracle = solve_oracle(&system).unwrap();
    let mut feasible = 0;
    for _ in 0..1000 {
        // sample near the optimum as well as far away
        let spread = rng.random_range(0.01..3.0) * oracle.v_stacked.norm();
        let candidate = &oracle.v_stacked + gaussian_real(&mut rng, 8) * spread;
        if system.is_satisfied(&candidate, 0.0) {
            feasible += 1;
            assert!(candidate.norm_squared() >= oracle.objective * (1.0 - 1e-12));
        }
    }
    assert!(feasible > 50, "only {feasible} feasible samples");
}

#[test]
fn traces_never_increase() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for lambda in [1.0, 1e2, 1e3] {
        for equilibrate in [true, false] {
            for _ in 0..20 {
                let system = random_system(&mut rng, 8, 2, 4);
                let cfg = SolverConfig {
                    lambda,
                    equilibrate,
                    max_iter: 3000,
                    ..Default::default()
                };
                let (_, trace) = solve_iterative(&system, &cfg).unwrap();
                assert!(
                    trace.max_increase() <= 1e-12,
                    "increase {}",
                    trace.max_increase()
                );
            }
        }
    }
}

#[test]
fn block_updates_are_exact_minimizers() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for (n, k) in [(3usize, 2usize), (8, 2), (2, 2)] {
        let system = random_system(&mut rng, n, k, 8);
        let lambda = 50.0;
        let delta = gaussian_real(&mut rng, 2 * k).map(f64::abs);
        let v = v_update(&delta, &system, lambda).unwrap();
        // gradient of the penalty objective in v
        let grad = &v * (2.0 / lambda)
            + system.f().transpose() * (system.f() * &v - system.rho() - &delta) * 2.0;
        assert!(
            grad.amax() < 1e-9 * (1.0 + v.amax()),
            "grad {}",
            grad.amax()
        );
        let best = penalty_objective(&v, &delta, &system, lambda);
        for _ in 0..50 {
            let w = &v + gaussian_real(&mut rng, 2 * n) * 1e-3;
            assert!(penalty_objective(&w, &delta, &system, lambda) >= best);
        }

        let d = delta_update(&v, &system);
        assert!(d.iter().all(|&x| x >= 0.0));
        let best = penalty_objective(&v, &d, &system, lambda);
        for _ in 0..50 {
            let other = gaussian_real(&mut rng, 2 * k).map(f64::abs);
            assert!(penalty_objective(&v, &other, &system, lambda) >= best - 1e-12);
        }
    }
}

#[test]
fn penalty_gap_shrinks_with_lambda() {
    let mut means = Vec::new();
    for lambda in [1.0, 10.0, 1e2, 1e3] {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut gaps = Vec::new();
        for _ in 0..100 {
            let system = random_system(&mut rng, 8, 2, 4);
            let oracle = solve_oracle(&system).unwrap();
            let (it, _) = solve_iterative(
                &system,
                &SolverConfig {
                    lambda,
                    ..Default::default()
                },
            )
            .unwrap();
            if it.repair.failed() {
                // weak penalties may leave rows that outward scaling cannot fix
                assert!(lambda < 1e2, "repair failed at lambda {lambda}");
                continue;
            }
            gaps.push(it.objective / oracle.objective - 1.0);
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let worst = gaps.iter().copied().fold(f64::MIN, f64::max);
        means.push((lambda, mean, worst));
    }
    for w in means.windows(2) {
        assert!(w[1].1 < w[0].1, "{means:?}");
    }
    let (_, _, worst) = means[3];
    assert!(worst <= 0.02, "{means:?}");
}

#[test]
fn strictly_feasible_warm_start_has_no_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let system = random_system(&mut rng, 5, 2, 4);
    let start = solve_oracle(&system).unwrap().v_stacked * 1.5;
    assert!(system.is_satisfied(&start, 0.0));
    for equilibrate in [false, true] {
        let lambda = 20.0;
        let cfg = SolverConfig {
            lambda,
            equilibrate,
            warm_start: Some(start.clone()),
            ..Default::default()
        };
        let (sol, trace) = solve_iterative(&system, &cfg).unwrap();
        if !equilibrate {
            let f0 = trace.records[0].objective;
            assert!((f0 - start.norm_squared() / lambda).abs() < 1e-12 * f0);
        }
        assert_eq!(trace.records[0].violation, 0.0);
        assert!(sol.objective <= start.norm_squared());
    }
}

#[test]
fn oracle_is_independent_of_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let system = random_system(&mut rng, 8, 2, 8);
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| solve_oracle(&system).unwrap());
    let b = many.install(|| solve_oracle(&system).unwrap());
    assert_eq!(a.v_stacked, b.v_stacked);
}

#[test]
fn scenario_slots_satisfy_every_sector() {
    let scenario = common::four_user_scenario(8);
    let channels = scenario.legit_channels(ChannelModel::Hybrid);
    for slot in 0..20 {
        let a = scenario.draw_assignment(3, slot);
        let out = scenario.solve_slot(&channels, &a).unwrap();
        assert!(out.trace.max_increase() <= 1e-12);
        for u in 0..4 {
            let z = out.system.rotated_point(u, out.v());
            assert!(
                out.system.sector(u).contains_within(z, 1e-9),
                "slot {slot} user {u}"
            );
        }
    }
}
