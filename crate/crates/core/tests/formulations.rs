mod common;

use std::time::Duration;

use approx::assert_relative_eq;
use backhaul::formulations::*;
use backhaul::interference::{build_neighborhoods, global_neighborhoods};
use backhaul::lp::{solve_lp, solve_milp, solve_milp_with, MilpParams, Solution, SolveStatus};
use backhaul::propagation::InterferenceMatrix;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn comb_dl(
    net: &backhaul::net::Network,
    m: &InterferenceMatrix,
    lambda: Option<f64>,
) -> (Solution, CombinatorialMap) {
    let w = ServiceWeights::downlink(net);
    let (model, map) = build_combinatorial_dl(net, m, &w, lambda, DEFAULT_PATTERN_CAP).unwrap();
    (solve_lp(&model).unwrap(), map)
}

#[test]
fn single_link_gets_the_whole_frame() {
    let net = chain(2);
    let (sol, map) = comb_dl(&net, &conflicts(&net), Some(0.0));
    assert_relative_eq!(sol.value(map.objective), 3.4594316186, epsilon = 1e-9);
    let alloc = map.allocation(&sol);
    assert_eq!(alloc.patterns, vec![(vec![0], 1.0)]);
}

#[test]
fn chain_splits_two_thirds_one_third() {
    let net = chain(3);
    let (sol, map) = comb_dl(&net, &conflicts(&net), None);
    assert_relative_eq!(sol.value(map.objective), 1.1531438729, epsilon = 1e-9);
    let alloc = map.allocation(&sol).merged();
    let share = |p: &[usize]| {
        alloc
            .patterns
            .iter()
            .find(|q| q.0 == p)
            .map_or(0.0, |q| q.1)
    };
    assert_relative_eq!(share(&[0]), 2.0 / 3.0, epsilon = 1e-9);
    assert_relative_eq!(share(&[2]), 1.0 / 3.0, epsilon = 1e-9);
}

#[test]
fn delay_weight_above_bound_is_rejected() {
    let net = chain(3);
    let w = ServiceWeights::downlink(&net);
    let bound = priority_bound(net.num_links(), w.alpha_sum(&net));
    let err = build_combinatorial_dl(&net, &conflicts(&net), &w, Some(bound), 16).unwrap_err();
    assert!(matches!(
        err,
        FormulationError::PriorityBoundViolation { .. }
    ));
    let m = conflicts(&net);
    let nb = build_neighborhoods(&m, 3.0);
    let err = build_scalable_dl(&net, &m, &nb, 2, &w, Some(2.0 * bound)).unwrap_err();
    assert!(matches!(
        err,
        FormulationError::PriorityBoundViolation { .. }
    ));
}

#[test]
fn too_many_links_for_enumeration() {
    let net = chain(10);
    let w = ServiceWeights::downlink(&net);
    let err = build_combinatorial_dl(&net, &conflicts(&net), &w, None, 16).unwrap_err();
    assert_eq!(err, FormulationError::TooManyLinks { links: 18, cap: 16 });
}

#[test]
fn all_zero_weights_are_rejected() {
    let net = chain(3);
    let w = ServiceWeights::uniform(&net, 0.0, 0.0);
    let err = build_combinatorial_uldl(&net, &conflicts(&net), &w, 16).unwrap_err();
    assert!(matches!(err, FormulationError::InvalidWeights(_)));
}

#[test]
fn delay_penalty_keeps_the_max_min_optimum() {
    for seed in 0..6 {
        let net = small_random(seed);
        let m = suburban_matrix(&net, seed);
        let (plain, pm) = comb_dl(&net, &m, Some(0.0));
        let (pen, qm) = comb_dl(&net, &m, None);
        assert_relative_eq!(
            plain.value(pm.objective),
            pen.value(qm.objective),
            max_relative = 1e-6
        );
    }
}

#[test]
fn uplink_free_joint_model_matches_downlink() {
    for seed in 0..4 {
        let net = small_random(seed);
        let m = suburban_matrix(&net, seed);
        let (dl, dm) = comb_dl(&net, &m, Some(0.0));
        let w = ServiceWeights::uniform(&net, 1.0, 0.0);
        let (model, map) = build_combinatorial_uldl(&net, &m, &w, 16).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert_relative_eq!(
            sol.value(map.objective),
            dl.value(dm.objective),
            max_relative = 1e-7
        );
    }
}

#[test]
fn joint_service_costs_downlink_throughput() {
    let net = chain(3);
    let m = conflicts(&net);
    let (dl, dm) = comb_dl(&net, &m, Some(0.0));
    let w = ServiceWeights::uniform(&net, 1.0, 1.0);
    let (model, map) = build_combinatorial_uldl(&net, &m, &w, 16).unwrap();
    let c = solve_lp(&model).unwrap().value(map.objective);
    // The relay receives 2c from the gateway while the far node sends it c,
    // then forwards 2c and c at once: 4c of airtime per unit rate.
    assert_relative_eq!(c, nominal() / 4.0, epsilon = 1e-9);
    assert!(c <= dl.value(dm.objective));
}

#[test]
fn pure_uplink_mirrors_pure_downlink() {
    let net = chain(4);
    let m = conflicts(&net);
    let (dl, dm) = comb_dl(&net, &m, Some(0.0));
    let w = ServiceWeights::uniform(&net, 0.0, 1.0);
    let (model, _) = build_combinatorial_uldl(&net, &m, &w, 16).unwrap();
    assert_relative_eq!(
        solve_lp(&model).unwrap().objective,
        dl.value(dm.objective),
        epsilon = 1e-9
    );
}

#[test]
fn scalable_chain_with_two_slots() {
    let net = chain(3);
    let m = conflicts(&net);
    let nb = build_neighborhoods(&m, 3.0);
    let w = ServiceWeights::downlink(&net);
    let (model, map) = build_scalable_dl(&net, &m, &nb, 2, &w, None).unwrap();
    let sol = solve_milp(&model, 1e-9, 100_000).unwrap();
    assert_relative_eq!(sol.value(map.objective), 1.1531438729, epsilon = 1e-7);
}

#[test]
fn scalable_matches_combinatorial_under_global_neighborhoods() {
    for seed in 100..105 {
        let net = small_random(seed);
        let m = suburban_matrix(&net, seed);
        let (comb, cm) = comb_dl(&net, &m, Some(0.0));
        let nb = global_neighborhoods(&m);
        let w = ServiceWeights::downlink(&net);
        let (model, map) =
            build_scalable_dl(&net, &m, &nb, net.num_clients(), &w, Some(0.0)).unwrap();
        // The combinatorial optimum bounds the scalable one from above, so
        // reaching it proves optimality.
        let params = MilpParams {
            gap_tol: 1e-7,
            starts: scalable_start(&map, &net, &m, &nb, &w)
                .into_iter()
                .collect(),
            known_bound: Some(comb.value(cm.objective)),
            lazy_integral_only: true,
            time_limit: Some(Duration::from_secs(30)),
            ..MilpParams::default()
        };
        let sol = solve_milp_with(&model, &params).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
        assert_relative_eq!(
            sol.value(map.objective),
            comb.value(cm.objective),
            max_relative = 1e-6
        );
    }
}

#[test]
fn scalable_is_monotone_in_slots() {
    let net = small_random(7);
    let m = suburban_matrix(&net, 7);
    let nb = build_neighborhoods(&m, 3.0);
    let w = ServiceWeights::downlink(&net);
    let mut last = 0.0;
    for t in 1..=4 {
        let (model, map) = build_scalable_dl(&net, &m, &nb, t, &w, Some(0.0)).unwrap();
        let d = solve_milp(&model, 1e-9, 1_000_000)
            .unwrap()
            .value(map.objective);
        assert!(d >= last - 1e-9, "T={t}: {d} < {last}");
        last = d;
    }
}

#[test]
fn scalable_never_beats_combinatorial() {
    for seed in 200..204 {
        let net = small_random(seed);
        let m = suburban_matrix(&net, seed);
        let (comb, cm) = comb_dl(&net, &m, Some(0.0));
        let nb = build_neighborhoods(&m, 3.0);
        let w = ServiceWeights::downlink(&net);
        let (model, map) = build_scalable_dl(&net, &m, &nb, 3, &w, Some(0.0)).unwrap();
        let d = solve_milp(&model, 1e-9, 1_000_000)
            .unwrap()
            .value(map.objective);
        assert!(d <= comb.value(cm.objective) * (1.0 + 1e-7));
    }
}

#[test]
fn scalable_uplink_free_matches_downlink() {
    let net = small_random(3);
    let m = suburban_matrix(&net, 3);
    let nb = build_neighborhoods(&m, 3.0);
    let (model, map) =
        build_scalable_dl(&net, &m, &nb, 3, &ServiceWeights::downlink(&net), Some(0.0)).unwrap();
    let d = solve_milp(&model, 1e-9, 1_000_000)
        .unwrap()
        .value(map.objective);
    let w = ServiceWeights::uniform(&net, 1.0, 0.0);
    let (model, map) = build_scalable_uldl(&net, &m, &nb, 3, &w).unwrap();
    let c = solve_milp(&model, 1e-9, 1_000_000)
        .unwrap()
        .value(map.objective);
    assert_relative_eq!(c, d, max_relative = 1e-7);
}

#[test]
fn uplink_weight_never_helps() {
    let net = small_random(11);
    let m = suburban_matrix(&net, 11);
    let mut last = f64::INFINITY;
    for beta in [0.0, 0.3, 0.6, 1.0] {
        let w = ServiceWeights::uniform(&net, 1.0, beta);
        let (model, _) = build_combinatorial_uldl(&net, &m, &w, 16).unwrap();
        let c = solve_lp(&model).unwrap().objective;
        assert!(c <= last + 1e-9);
        last = c;
    }
}

#[test]
fn start_from_slots_is_feasible() {
    let net = chain(4);
    let m = conflicts(&net);
    let nb = build_neighborhoods(&m, 3.0);
    let w = ServiceWeights::downlink(&net);
    let (model, map) = build_scalable_dl(&net, &m, &nb, 3, &w, None).unwrap();
    let start = map
        .start_from_slots(&[(vec![0, 4], 0.5), (vec![2], 0.5)])
        .unwrap();
    for (i, v) in model.variables.iter().enumerate() {
        if v.kind == backhaul::lp::VarKind::Binary {
            assert!(start[i] == 0.0 || start[i] == 1.0);
        }
    }
    // Links 0 and 2 conflict at node 1.
    assert!(map.start_from_slots(&[(vec![0, 2], 1.0)]).is_none());
}

#[test]
fn perturbation_is_small_and_keeps_structure() {
    let net = small_random(5);
    let m = suburban_matrix(&net, 5);
    let p = perturb_interference(&m, 1e-4, 42).unwrap();
    for k in 0..m.num_links() {
        for l in 0..m.num_links() {
            let (a, b) = (m.get(k, l), p.get(k, l));
            if a == 0.0 || a.is_infinite() {
                assert_eq!(a, b);
            } else {
                assert!(((b - a) / a).abs() <= 1e-4 * (1.0 + 1e-12));
            }
        }
    }
    assert_eq!(p, perturb_interference(&m, 1e-4, 42).unwrap());
    assert!(perturb_interference(&m, 0.0, 1).is_err());
    assert!(perturb_interference(&m, 0.02, 1).is_err());
}

#[test]
fn perturbation_barely_moves_the_optimum() {
    for seed in 0..5 {
        let net = small_random(seed);
        let m = suburban_matrix(&net, seed);
        let p = perturb_interference(&m, 1e-4, seed).unwrap();
        let (a, am) = comb_dl(&net, &m, Some(0.0));
        let (b, bm) = comb_dl(&net, &p, Some(0.0));
        let (a, b) = (a.value(am.objective), b.value(bm.objective));
        assert!(((a - b) / a).abs() < 1e-3);
    }
}

fn random_allocation(
    net: &backhaul::net::Network,
    m: &InterferenceMatrix,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Allocation {
    let pats = enumerate_patterns(m, 16).unwrap();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum::<f64>() / rng.gen_range(0.5..1.0);
    let _ = net;
    Allocation {
        patterns: raw
            .iter()
            .map(|&v| (pats[rng.gen_range(0..pats.len())].clone(), v / total))
            .collect(),
    }
}

#[test]
fn sparsify_reaches_n_plus_one_patterns() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nodes = (0..5)
        .map(|i| {
            node(
                i,
                40.0 * i as f64,
                if i % 2 == 0 { 0.0 } else { 30.0 },
                i == 0,
            )
        })
        .collect();
    let net =
        backhaul::net::build_network(nodes, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)]).unwrap();
    let m = suburban_matrix(&net, 3);
    for _ in 0..10 {
        let alloc = random_allocation(&net, &m, 20, &mut rng);
        let sparse = sparsify_allocation(&alloc, &net, &m);
        assert!(sparse.len() <= net.num_nodes() + 1);
        assert_relative_eq!(sparse.total(), alloc.total(), epsilon = 1e-9);
        for (a, b) in node_service(&alloc, &net, &m)
            .iter()
            .zip(node_service(&sparse, &net, &m))
        {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
        assert!(sparse.patterns.iter().all(|p| p.1 > 0.0));
    }
}

#[test]
fn sparsify_leaves_small_allocations_alone() {
    let net = chain(3);
    let m = conflicts(&net);
    let alloc = Allocation {
        patterns: vec![(vec![0], 0.3), (vec![2], 0.4), (vec![0], 0.2)],
    };
    let out = sparsify_allocation(&alloc, &net, &m);
    assert_eq!(out.patterns, vec![(vec![0], 0.5), (vec![2], 0.4)]);
}
