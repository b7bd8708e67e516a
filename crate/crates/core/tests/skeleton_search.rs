//! Behaviour of the full skeleton search on simulated data.

use pclpgm_core::matrix::default_names;
use pclpgm_core::rng::stream_rng;
use pclpgm_core::sim::simulate_counts;
use pclpgm_core::skeleton::{enumerate_cond_sets, test_ordered_pair};
use pclpgm_core::{
    learn_skeleton, CountMatrix, Execution, SkeletonOptions, SkeletonResult, UndirectedGraph,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

fn independent_poisson(seed: u64, n: usize, p: usize, rate: f64) -> CountMatrix {
    let mut rng = stream_rng(seed, 0);
    let pois = Poisson::new(rate).unwrap();
    let cols = (0..p)
        .map(|_| (0..n).map(|_| pois.sample(&mut rng) as u32).collect())
        .collect();
    CountMatrix::from_columns(default_names(p), cols).unwrap()
}

fn simulated(seed: u64, truth: &UndirectedGraph, n: usize) -> CountMatrix {
    simulate_counts(truth, n, 1.0, 0.5, &mut stream_rng(seed, 1)).unwrap()
}

fn random_truth(seed: u64, p: usize, prob: f64) -> UndirectedGraph {
    let mut rng = stream_rng(seed, 2);
    let mut g = UndirectedGraph::empty(p);
    for u in 0..p {
        for v in u + 1..p {
            if rng.random_bool(prob) {
                g.add_edge(u, v).unwrap();
            }
        }
    }
    g
}

#[test]
fn independent_pair_is_usually_separated() {
    let opts = SkeletonOptions::default();
    let deleted = (0..200)
        .filter(|&seed| {
            let data = independent_poisson(seed, 5000, 2, 1.0);
            learn_skeleton(&data, &opts).unwrap().graph.edge_count() == 0
        })
        .count();
    assert!(
        (192..=200).contains(&deleted),
        "deleted in {deleted} of 200"
    );
}

#[test]
fn chain_is_recovered() {
    let truth = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let opts = SkeletonOptions::default();
    let mut exact = 0;
    let mut marginal_kept_out = 0;
    for seed in 0..100 {
        let data = simulated(seed, &truth, 5000);
        if learn_skeleton(&data, &opts).unwrap().graph == truth {
            exact += 1;
        }
        // the end points share no latent, so they separate marginally
        if !test_ordered_pair(&data, 0, 2, &[], &opts).unwrap().rejected {
            marginal_kept_out += 1;
        }
    }
    assert!(exact >= 90, "exact recovery in {exact} of 100");
    assert!(marginal_kept_out >= 90, "{marginal_kept_out}");
}

#[test]
fn chain_end_points_stay_dependent_given_the_middle() {
    // Conditioning on the middle count does not screen the end points off
    // under the shared-latent construction: X1 mixes both latents, so
    // knowing X0 still shifts the conditional law of X2.
    let truth = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let opts = SkeletonOptions::default();
    let data = simulated(3, &truth, 5000);
    let o = test_ordered_pair(&data, 0, 2, &[1], &opts).unwrap();
    assert!(o.rejected && o.z < 0.0, "{o:?}");
}

fn check_trace(result: &SkeletonResult, p: usize, m: Option<usize>) {
    let keys: Vec<_> = result
        .trace
        .iter()
        .map(|o| (o.level, o.s, o.t, o.cond_set.clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted, "trace out of canonical order");
    assert_eq!(result.tests_performed, result.trace.len());

    for u in 0..p {
        for v in u + 1..p {
            let tests: Vec<_> = result
                .trace
                .iter()
                .filter(|o| (o.s, o.t) == (u, v) || (o.s, o.t) == (v, u))
                .collect();
            if result.graph.has_edge(u, v) {
                assert!(tests.iter().all(|o| o.rejected));
            } else {
                assert!(tests.iter().any(|o| !o.rejected));
            }
        }
    }
    for o in &result.trace {
        assert_eq!(o.cond_set.len(), o.level);
        if let Some(m) = m {
            assert!(o.level <= m);
        }
    }
}

#[test]
fn trace_is_consistent_with_the_graph() {
    for seed in 0..5 {
        let p = 8;
        let truth = random_truth(seed, p, 0.3);
        let data = simulated(seed, &truth, 300);
        for m in [None, Some(0), Some(1)] {
            let opts = SkeletonOptions {
                max_cond_size: m,
                ..SkeletonOptions::default()
            };
            let r = learn_skeleton(&data, &opts).unwrap();
            check_trace(&r, p, m);
        }
    }
}

#[test]
fn work_is_bounded() {
    fn choose(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }
    let p = 9;
    let truth = random_truth(12, p, 0.35);
    let data = simulated(12, &truth, 400);
    let r = learn_skeleton(&data, &SkeletonOptions::default()).unwrap();
    let levels = r.trace.iter().map(|o| o.level).max().unwrap_or(0);
    let bound: usize = (0..=levels).map(|l| p * (p - 1) * choose(p - 2, l)).sum();
    assert!(r.tests_performed <= bound);
}

#[test]
fn candidate_sets_come_from_the_snapshot() {
    let snapshot = vec![
        [1, 2, 5, 7].into_iter().collect(),
        Default::default(),
        Default::default(),
        Default::default(),
        Default::default(),
        Default::default(),
        Default::default(),
        Default::default(),
    ];
    let sets: Vec<Vec<usize>> = enumerate_cond_sets(&snapshot, 0, 1, 2).collect();
    assert_eq!(sets, vec![vec![2, 5], vec![2, 7], vec![5, 7]]);
}

#[test]
fn execution_modes_agree() {
    for seed in 0..6 {
        let p = 10;
        let truth = random_truth(seed, p, 0.25);
        let data = simulated(100 + seed, &truth, 250);
        let seq = learn_skeleton(&data, &SkeletonOptions::default()).unwrap();
        let par = learn_skeleton(
            &data,
            &SkeletonOptions {
                execution: Execution::LevelParallel,
                ..SkeletonOptions::default()
            },
        )
        .unwrap();
        assert_eq!(seq.graph, par.graph);
        assert_eq!(seq.trace, par.trace);
    }
}

#[test]
fn worker_count_does_not_matter() {
    let truth = random_truth(5, 10, 0.25);
    let data = simulated(5, &truth, 300);
    let opts = SkeletonOptions {
        execution: Execution::LevelParallel,
        ..SkeletonOptions::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| learn_skeleton(&data, &opts).unwrap())
    };
    let one = run(1);
    let many = run(8);
    assert_eq!(one.graph.edges(), many.graph.edges());
    assert_eq!(one.trace, many.trace);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn column_order_does_not_matter(seed in 0u64..10_000, p in 3usize..8) {
        let truth = random_truth(seed, p, 0.4);
        let data = simulated(seed, &truth, 150);
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut stream_rng(seed, 3));
        // column j of the permuted data is column perm[j] of the original
        let permuted = data.select_columns(&perm).unwrap();
        let opts = SkeletonOptions::default();
        let a = learn_skeleton(&data, &opts).unwrap().graph;
        let b = learn_skeleton(&permuted, &opts).unwrap().graph;
        let mut inverse = vec![0; p];
        for (j, &orig) in perm.iter().enumerate() {
            inverse[orig] = j;
        }
        prop_assert_eq!(a.permute(&inverse).unwrap(), b);
    }
}
