mod common;

use common::{random_dag, random_scores};
use dagbandit::dag::{build_cover_set, enumerate_paths, make_uniform_length, Dag};
use dagbandit::harness::best_fixed_path_loss;
use dagbandit::tracking::{best_partition_loss, solve_partition};
use dagbandit::weight_dp::{backward_aggregate, sampled_path_probability};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dag_from(seed: u64, max_vertices: usize) -> Dag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_dag(&mut rng, max_vertices, 0.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn cover_set_covers_every_edge(seed in any::<u64>()) {
        let dag = dag_from(seed, 12);
        let cover = build_cover_set(&dag);
        prop_assert!(cover.len() <= dag.edge_count());
        for e in 0..dag.edge_count() {
            prop_assert!(cover.paths.iter().any(|p| p.contains(e)), "edge {} uncovered", e);
            prop_assert!(cover.edge_cover_count[e] >= 1);
        }
        prop_assert_eq!(build_cover_set(&dag), cover);
    }

    #[test]
    fn every_edge_lies_on_an_enumerated_path(seed in any::<u64>()) {
        let dag = dag_from(seed, 12);
        let paths = enumerate_paths(&dag, 1024);
        prop_assume!(paths.is_ok());
        let paths = paths.unwrap();
        prop_assert_eq!(paths.len() as u128, dag.path_count());
        for e in 0..dag.edge_count() {
            prop_assert!(paths.iter().any(|p| p.contains(e)));
        }
    }

    #[test]
    fn padding_preserves_paths_and_losses(seed in any::<u64>()) {
        let dag = dag_from(seed, 10);
        let (longest, shortest) = dag.path_length_range();
        let pad = make_uniform_length(&dag);
        prop_assert_eq!(pad.k, longest);
        prop_assert!(pad.dag.is_uniform_length());
        prop_assert_eq!(pad.dag.path_count(), dag.path_count());
        let bound = (longest.saturating_sub(2) * dag.vertex_count().saturating_sub(2) + 1) as u64;
        prop_assert!(pad.added_vertices as u64 <= bound, "added {} > {}", pad.added_vertices, bound);

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let losses: Vec<f64> = (0..dag.edge_count()).map(|_| rng.random()).collect();
        let padded_losses = pad.pad_losses(&losses);
        let originals = enumerate_paths(&dag, 1 << 16).unwrap();
        let mut images: Vec<Vec<usize>> = Vec::new();
        for p in &originals {
            let image = pad.padded_path(p);
            prop_assert_eq!(image.len(), longest);
            prop_assert!(image.len() - p.len() <= longest - shortest);
            prop_assert_eq!(pad.original_edges(&image), p.edges().to_vec());
            prop_assert!((image.total(&padded_losses) - p.total(&losses)).abs() < 1e-12);
            images.push(image.edges().to_vec());
        }
        images.sort();
        images.dedup();
        prop_assert_eq!(images.len(), originals.len());
    }

    #[test]
    fn sampler_matches_brute_force(seed in any::<u64>()) {
        let dag = dag_from(seed, 9);
        let paths = enumerate_paths(&dag, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = random_scores(&mut rng, dag.edge_count(), 4.0);
        let log_b = backward_aggregate(&dag, &scores);
        let weights: Vec<f64> = paths.iter().map(|p| p.total(&scores).exp()).collect();
        let z: f64 = weights.iter().sum();
        for (p, w) in paths.iter().zip(&weights) {
            let exact = sampled_path_probability(&dag, &scores, &log_b, p);
            prop_assert!((exact - w / z).abs() < 1e-12);
        }
    }

    #[test]
    fn best_fixed_path_is_the_enumeration_minimum(seed in any::<u64>()) {
        let dag = dag_from(seed, 10);
        let paths = enumerate_paths(&dag, 1 << 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cumulative: Vec<f64> = (0..dag.edge_count()).map(|_| rng.random::<f64>() * 50.0).collect();
        let (value, path) = best_fixed_path_loss(&dag, &cumulative);
        let min = paths.iter().map(|p| p.total(&cumulative)).fold(f64::INFINITY, f64::min);
        prop_assert!((value - min).abs() < 1e-9);
        prop_assert!((path.total(&cumulative) - min).abs() < 1e-9);
    }

    #[test]
    fn partition_comparators_are_monotone(seed in any::<u64>(), n in 2usize..40) {
        let dag = dag_from(seed, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let losses: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dag.edge_count()).map(|_| rng.random()).collect())
            .collect();
        let cumulative: Vec<f64> = (0..dag.edge_count())
            .map(|e| losses.iter().map(|r| r[e]).sum())
            .collect();
        let (fixed, _) = best_fixed_path_loss(&dag, &cumulative);
        let mut previous = fixed + 1e-9;
        for m in 0..4.min(n) {
            let (value, partition) = best_partition_loss(&dag, &losses, m);
            prop_assert!(value <= previous + 1e-9);
            prop_assert!(partition.switches() <= m);
            prop_assert!((partition.loss(&losses) - value).abs() < 1e-9);
            previous = value;
        }
        let solution = solve_partition(&dag, &losses, 2.min(n - 1));
        prop_assert!(solution.prefix_values.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        prop_assert!((solution.prefix_values[n - 1] - solution.value).abs() < 1e-12);
    }
}

#[test]
fn padding_examples() {
    let chain = Dag::parallel_chain(2);
    let pad = make_uniform_length(&chain);
    assert_eq!((pad.added_vertices, pad.added_edges), (0, 0));
    assert_eq!(pad.dag.edges(), chain.edges());

    let shortcut = Dag::from_labeled_edges(3, vec![(0, 2), (0, 1), (1, 2)]).unwrap();
    let pad = make_uniform_length(&shortcut);
    assert_eq!(pad.added_vertices, 1);
    assert!(enumerate_paths(&pad.dag, 16).unwrap().iter().all(|p| p.len() == 2));
}
