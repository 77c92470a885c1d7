mod common;

use catbound::bounds::{compute_report, BoundOptions};
use catbound::generator::{apply_weights, build_a, build_a_star, Closure};
use catbound::model::{examples, TimeFunction, WeightSequence};
use catbound::montecarlo::{simulate_paths, JumpKind};
use catbound::solver::{delta, pair_from_trajectories, solve_forward, uniform_grid};
use common::{random_model, random_stochastic};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn reflecting_columns_sum_to_zero(seed in any::<u64>(), n in 1usize..=8, t in 0.0f64..5.0) {
        let m = random_model(seed, n, false);
        let a = build_a(&m, n, t, Closure::Reflecting).unwrap();
        for j in 0..=n {
            prop_assert!(a.column_sum(j).abs() <= 1e-12, "column {} sums to {}", j, a.column_sum(j));
            for i in 0..=n {
                if i != j {
                    prop_assert!(a.get(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn defect_equals_leaked_rate(seed in any::<u64>(), n in 1usize..=8, t in 0.0f64..5.0) {
        let m = random_model(seed, n, false);
        let defect = build_a(&m, n, t, Closure::DefectTracking).unwrap();
        let reflecting = build_a(&m, n, t, Closure::Reflecting).unwrap();
        for j in 0..=n {
            let leak = -defect.column_sum(j);
            prop_assert!(leak >= -1e-12);
            // The reflecting diagonal is the defect-tracking one with the leak removed.
            let shift = reflecting.get(j, j) - defect.get(j, j);
            prop_assert!((shift - leak).abs() <= 1e-12 * (1.0 + leak.abs()));
        }
    }

    #[test]
    fn reduced_system_matches_full(seed in any::<u64>(), n in 1usize..=8, t in 0.0f64..5.0, ps in any::<u64>()) {
        let m = random_model(seed, n, false);
        let p = random_stochastic(ps, n + 1);
        let a = build_a(&m, n, t, Closure::Reflecting).unwrap();
        let (a_star, g) = build_a_star(&m, n, t, Closure::Reflecting).unwrap();
        let gv = g.to_vec();
        prop_assert!(gv[1..].iter().all(|v| *v == 0.0));
        prop_assert!(gv[0] >= 0.0);
        prop_assert_eq!(gv[0], m.beta_star(t).unwrap());
        let mut lhs = vec![0.0; n + 1];
        let mut rhs = vec![0.0; n + 1];
        a.matvec(&p, &mut lhs);
        a_star.matvec(&p, &mut rhs);
        g.add_to(&mut rhs);
        prop_assert!(common::max_abs_diff(&lhs, &rhs) <= 1e-14, "{:?} vs {:?}", lhs, rhs);
        for j in 0..=n {
            let lost = a.column_sum(j) - a_star.column_sum(j);
            prop_assert!((lost - gv[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn weighting_is_a_similarity(seed in any::<u64>(), n in 1usize..=8, t in 0.0f64..5.0, ps in any::<u64>()) {
        let m = random_model(seed, n, false);
        let w = WeightSequence::linear();
        let (a_star, _) = build_a_star(&m, n, t, Closure::DefectTracking).unwrap();
        let weighted = apply_weights(&a_star, &w).unwrap();
        let x = random_stochastic(ps, n + 1);
        let dx: Vec<f64> = x.iter().enumerate().map(|(k, v)| v * w.d(k)).collect();
        let mut lhs = vec![0.0; n + 1];
        weighted.matvec(&dx, &mut lhs);
        let mut ax = vec![0.0; n + 1];
        a_star.matvec(&x, &mut ax);
        let rhs: Vec<f64> = ax.iter().enumerate().map(|(k, v)| v * w.d(k)).collect();
        prop_assert!(common::max_abs_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn time_functions_are_periodic_and_nonnegative(a in 0.0f64..5.0, frac in -1.0f64..=1.0, t in 0.0f64..50.0) {
        let f = TimeFunction::harmonic(a, 1.0, frac * a, 0.0).unwrap();
        prop_assert!(f.value(t) >= -1e-12);
        prop_assert!((f.value(t + 1.0) - f.value(t)).abs() <= 1e-12 * (1.0 + a));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn trajectories_stay_stochastic(seed in any::<u64>(), n in 1usize..=8, k in 0usize..=8) {
        let m = random_model(seed, n, false);
        let tr = solve_forward(&m, n, &delta(n, k.min(n)), &uniform_grid(3.0, 31), 1e-10).unwrap();
        prop_assert!(tr.min_entry() >= -1e-12);
        for p in &tr.probs {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn simulated_paths_are_well_formed(seed in any::<u64>(), n in 1usize..=6, sim_seed in any::<u64>()) {
        let m = random_model(seed, n, false);
        let ens = simulate_paths(&m, 0, 3.0, &[1.0, 3.0], 20, sim_seed, true).unwrap();
        for path in ens.events.as_ref().unwrap() {
            for w in path.windows(2) {
                prop_assert!(w[1].t > w[0].t);
                prop_assert_eq!(w[1].from, w[0].to);
            }
            for ev in path {
                prop_assert!(ev.t > 0.0 && ev.t <= 3.0);
                if ev.kind == JumpKind::Catastrophe {
                    prop_assert_eq!(ev.to, 0);
                }
            }
        }
    }
}

#[test]
fn weighted_norms_are_equivalent() {
    let m = examples::corrected_model(examples::default_mu());
    let n = 40;
    let opts = BoundOptions { n, t_max: 2.0, grid: 21, ..Default::default() };
    let analysis = compute_report(&m, &WeightSequence::explicit(vec![1.0, 1.5, 2.5], 3.0, 0.0).unwrap(), &opts).unwrap();
    let grid = uniform_grid(2.0, 21);
    let a = solve_forward(&m, n, &delta(n, 0), &grid, 1e-10).unwrap();
    let b = solve_forward(&m, n, &delta(n, 3), &grid, 1e-10).unwrap();
    let pair = pair_from_trajectories(&a, &b, &analysis).unwrap();
    assert!(pair.norm_equivalence);
    for (l1, l1d) in pair.norm_l1.iter().zip(&pair.norm_1d) {
        assert!(*l1d >= *l1 - 1e-15 && *l1d <= 3.0 * l1 + 1e-15);
    }
}
