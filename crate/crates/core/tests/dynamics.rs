mod common;

use biasdisp::dynamics::{self, acceptance_probabilities, DynamicsConfig, Reranker, Trajectory};
use biasdisp::recommender;
use biasdisp::rng;
use biasdisp::synthgen::SyntheticConfig;
use biasdisp::{InteractionMatrix, Labeling};
use rand::Rng;
use rayon::prelude::*;

use common::{random_matrix, shuffled};

#[test]
fn step_replays_the_pinned_streams() {
    let mut gen = rng::stream(1, &[]);
    let s = random_matrix(&mut gen, 12, 15, 0.3);
    let labels = Labeling::new(
        (0..12).map(|u| u32::from(u >= 6)).collect(),
        (0..15).map(|i| u32::from(i >= 7)).collect(),
    )
    .unwrap();
    let cfg = DynamicsConfig {
        k: 3,
        r: 4,
        seed: 77,
        ..Default::default()
    };
    let out = dynamics::step(&s, &labels, &cfg, 2).unwrap();
    let recs = recommender::recommend(&s, 3, 4);
    for u in 0..12 {
        let list = recs.recommended(u);
        let mut expected: Vec<u32> = s.row(u).to_vec();
        let mut accepted = 0;
        if !list.is_empty() {
            let utilities: Vec<f64> = list.iter().map(|x| x.utility).collect();
            let probs = acceptance_probabilities(&utilities).unwrap();
            assert_eq!(probs[0], 1.0);
            let mut stream = rng::stream(77, &[2, u as u64]);
            for (x, p) in list.iter().zip(probs) {
                if stream.gen_bool(p) {
                    expected.push(x.item as u32);
                    accepted += 1;
                }
            }
        }
        expected.sort_unstable();
        assert_eq!(out.matrix.row(u), &expected[..], "user {u}");
        assert_eq!(out.accepted[u], accepted);
    }
}

#[test]
fn selections_only_accumulate() {
    let mut gen = rng::stream(2, &[]);
    let s = random_matrix(&mut gen, 20, 25, 0.2);
    let labels = Labeling::new((0..20).map(|u| u % 2).collect(), (0..25).map(|i| u32::from(i >= 12)).collect()).unwrap();
    for reranker in [Reranker::None, Reranker::Gulm] {
        let cfg = DynamicsConfig {
            iterations: 4,
            k: 4,
            r: 3,
            seed: 9,
            reranker,
        };
        let mut current = s.clone();
        for t in 1..=4 {
            let out = dynamics::step(&current, &labels, &cfg, t).unwrap();
            assert!(current.is_subset_of(&out.matrix));
            assert_eq!(out.matrix.nnz(), current.nnz() + out.accepted.iter().sum::<usize>() as u64);
            current = out.matrix;
        }
        let (traj, last) = dynamics::run(&s, &labels, &cfg).unwrap();
        assert_eq!(traj.snapshots.len(), 5);
        assert_eq!(last, current);
    }
}

#[test]
fn runs_do_not_depend_on_thread_count() {
    let ds = shuffled(&SyntheticConfig {
        n_users: 300,
        n_items: 300,
        ..SyntheticConfig::symmetric(0.75, 6)
    });
    let cfg = DynamicsConfig {
        iterations: 3,
        seed: 4,
        reranker: Reranker::Gulm,
        ..Default::default()
    };
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| dynamics::run(&ds.matrix, &ds.labeling, &cfg).unwrap())
    };
    let (a, am) = run_with(1);
    let (b, bm) = run_with(4);
    assert_eq!(a, b);
    assert_eq!(am, bm);
}

/// Ten default-size trajectories, K = 50, r = 10, T = 5.
fn trajectories(rho: f64, reranker: Reranker) -> Vec<Trajectory> {
    (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let ds = shuffled(&SyntheticConfig::symmetric(rho, 1000 + seed));
            let cfg = DynamicsConfig {
                seed: seed + 7,
                reranker,
                ..Default::default()
            };
            dynamics::run(&ds.matrix, &ds.labeling, &cfg).unwrap().0
        })
        .collect()
}

/// Seed-averaged PR of each group for its own category, per iteration.
fn mean_path(trajs: &[Trajectory]) -> Vec<f64> {
    (0..trajs[0].snapshots.len())
        .map(|t| {
            trajs
                .iter()
                .map(|tr| (tr.snapshots[t].table.pr(0, 0).unwrap() + tr.snapshots[t].table.pr(1, 1).unwrap()) / 2.0)
                .sum::<f64>()
                / trajs.len() as f64
        })
        .collect()
}

#[test]
fn users_accept_about_seven_items() {
    let trajs = trajectories(0.7, Reranker::None);
    let mut total = 0.0;
    for tr in &trajs {
        total += tr.snapshots[1..].iter().map(|s| s.mean_accepted.unwrap()).sum::<f64>() / 5.0;
    }
    let mean = total / trajs.len() as f64;
    assert!((mean - 7.0).abs() <= 1.0, "{mean}");
}

#[test]
fn moderate_bias_stays_flat() {
    let path = mean_path(&trajectories(0.6, Reranker::None));
    for (t, pr) in path.iter().enumerate() {
        assert!((pr - 0.6).abs() <= 0.02, "t={t}: {path:?}");
    }
}

#[test]
fn strong_bias_is_reinforced() {
    for rho in [0.7, 0.8] {
        let path = mean_path(&trajectories(rho, Reranker::None));
        assert!(path[5] > path[0], "rho {rho}: {path:?}");
    }
}

#[test]
fn weak_bias_fades() {
    for rho in [0.55] {
        let path = mean_path(&trajectories(rho, Reranker::None));
        assert!(path[5] < path[0], "rho {rho}: {path:?}");
    }
}

#[test]
fn groups_evolve_symmetrically() {
    for rho in [0.6, 0.8] {
        let trajs = trajectories(rho, Reranker::None);
        for t in 0..=5 {
            let gap: f64 = trajs
                .iter()
                .map(|tr| tr.snapshots[t].table.pr(0, 0).unwrap() - tr.snapshots[t].table.pr(1, 1).unwrap())
                .sum::<f64>()
                / trajs.len() as f64;
            assert!(gap.abs() <= 0.03, "rho {rho}, t={t}: {gap}");
        }
    }
}

#[test]
fn reranking_keeps_moderate_bias_constant() {
    for rho in [0.6, 0.65] {
        let path = mean_path(&trajectories(rho, Reranker::Gulm));
        assert!((path[5] - path[0]).abs() <= 0.03, "rho {rho}: {path:?}");
    }
}

#[test]
fn empty_data_is_a_fixed_point() {
    let s = InteractionMatrix::from_rows(3, vec![vec![], vec![]]).unwrap();
    let labels = Labeling::new(vec![0, 1], vec![0, 1, 1]).unwrap();
    let out = dynamics::step(&s, &labels, &DynamicsConfig::default(), 1).unwrap();
    assert_eq!(out.matrix, s);
    assert_eq!(out.mean_accepted(), 0.0);
}
