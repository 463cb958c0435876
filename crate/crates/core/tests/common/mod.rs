#![allow(dead_code)]

use dagbandit::dag::{topological_label, Dag, RawGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DAG on at most `max_vertices` vertices: a spine `0 -> 1 -> ... -> v-1`
/// plus forward edges with probability `density`, with occasional parallel
/// edges. Vertex ids are shuffled so labeling is exercised.
pub fn random_dag(rng: &mut ChaCha8Rng, max_vertices: usize, density: f64) -> Dag {
    let v = rng.random_range(3..=max_vertices.max(3));
    let mut ids: Vec<u64> = (0..v as u64).map(|i| i * 7 + 3).collect();
    for i in (1..v).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for i in 0..v - 1 {
        edges.push((ids[i], ids[i + 1]));
    }
    for i in 0..v {
        for j in i + 2..v {
            if rng.random::<f64>() < density {
                edges.push((ids[i], ids[j]));
            }
        }
    }
    if rng.random::<f64>() < 0.3 {
        let i = rng.random_range(0..v - 1);
        edges.push((ids[i], ids[i + 1]));
    }
    let raw = RawGraph {
        edges,
        source: ids[0],
        sink: ids[v - 1],
    };
    topological_label(&raw).expect("spine keeps the graph connected").dag
}

/// Random DAG whose path count is within `2..=max_paths`.
pub fn random_dag_capped(seed: u64, max_vertices: usize, density: f64, max_paths: u128) -> Dag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let dag = random_dag(&mut rng, max_vertices, density);
        if (2..=max_paths).contains(&dag.path_count()) {
            return dag;
        }
    }
}

pub fn random_scores(rng: &mut ChaCha8Rng, edge_count: usize, scale: f64) -> Vec<f64> {
    (0..edge_count).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs()
}
