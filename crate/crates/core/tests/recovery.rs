use ndarray::{Array1, Axis};

use maskcp::eval::nmi;
use maskcp::nmf::fit;
use maskcp::synthetic::{generate, generate_overlapping};
use maskcp::{Hyperparameters, PlantedConfig};

fn planted(pair_sizes: Vec<usize>, p_cc: f64, seed: u64) -> PlantedConfig {
    PlantedConfig {
        pair_sizes,
        p_core_core: p_cc,
        p_core_periph: p_cc,
        seed,
        ..Default::default()
    }
}

fn single_pair_case(restarts: usize) {
    for seed in 0..5 {
        let (graph, truth) = generate(&planted(vec![40], 0.9, seed)).unwrap();
        let hp = Hyperparameters { k_init: 8, seed, restarts, ..Default::default() };
        let result = fit(graph.adjacency(), &hp).unwrap();

        let mass = result.state.w.sum_axis(Axis(0));
        let top = mass.iter().cloned().fold(0.0, f64::max);
        assert!(top > 0.5 * mass.sum(), "seed {seed}: no dominant pair in {mass}");

        let hits = truth
            .core_flags
            .iter()
            .zip(&result.core_flags)
            .filter(|(a, b)| a == b)
            .count();
        assert!(hits >= 36, "seed {seed}: {hits}/40 core flags correct");
    }
}

fn two_pair_pruning_case(restarts: usize) {
    let mut exact = 0;
    for seed in 0..5 {
        let (graph, _) = generate(&planted(vec![100, 100], 0.6, seed)).unwrap();
        let hp = Hyperparameters { seed, prune_threshold: 0.3, restarts, ..Default::default() };
        let result = fit(graph.adjacency(), &hp).unwrap();
        exact += usize::from(result.active_pairs.len() == 2);
    }
    assert!(exact >= 4, "{exact}/5 runs kept exactly 2 pairs");
}

fn strong_separation_case(restarts: usize) {
    let (graph, truth) = generate(&planted(vec![100, 100], 0.9, 11)).unwrap();
    let hp = Hyperparameters { seed: 11, restarts, ..Default::default() };
    let result = fit(graph.adjacency(), &hp).unwrap();
    let score = nmi(&truth.core_flags, &result.core_flags).unwrap();
    assert!(score > 0.6, "core NMI {score}");
}

#[test]
fn single_pair_cores_are_recovered() {
    single_pair_case(1);
}

#[test]
fn single_pair_cores_are_recovered_with_restarts() {
    single_pair_case(16);
}

#[test]
fn two_pairs_survive_pruning_at_a_relative_threshold() {
    two_pair_pruning_case(1);
}

#[test]
fn two_pairs_survive_pruning_with_restarts() {
    two_pair_pruning_case(8);
}

#[test]
fn core_flags_track_planted_cores_at_strong_separation() {
    strong_separation_case(1);
}

#[test]
fn core_flags_track_planted_cores_with_restarts() {
    strong_separation_case(8);
}

#[test]
fn overlap_nodes_score_as_core_only_in_the_second_pair() {
    let cfg = PlantedConfig { p_core_core: 0.9, p_core_periph: 0.9, ..planted(vec![60, 60], 0.9, 2) };
    let (graph, truth) = generate_overlapping(&cfg, 10).unwrap();
    let hp = Hyperparameters { k_init: 8, seed: 2, ..Default::default() };
    let result = fit(graph.adjacency(), &hp).unwrap();

    let shared = truth.overlapping_nodes();
    let pure = |pair: usize| -> Vec<usize> {
        (0..graph.n())
            .filter(|&i| truth.memberships[i].len() == 1 && truth.memberships[i][0].pair == pair)
            .collect()
    };
    let (pure_first, pure_second) = (pure(0), pure(1));
    let column_of = |nodes: &[usize]| {
        let mass = nodes.iter().fold(Array1::<f64>::zeros(result.state.k()), |acc, &i| acc + &result.state.w.row(i));
        mass.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    };
    let (k1, k2) = (column_of(&pure_first), column_of(&pure_second));
    assert_ne!(k1, k2);
    let mean = |k: usize| shared.iter().map(|&i| result.core_scores[[i, k]]).sum::<f64>() / shared.len() as f64;
    assert!(mean(k2) > mean(k1), "core score in pair 2 {} vs pair 1 {}", mean(k2), mean(k1));
}
