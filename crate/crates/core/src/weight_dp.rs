//! Weight pushing over a [`Dag`].
//!
//! Edge weights are `w_e = exp(score_e)`, so a path's weight is the exponential
//! of its summed scores. The backward aggregate `H(s)` sums path weights from
//! `s` to the sink and the forward aggregate `Ĥ(s)` sums them from the source
//! to `s`. Both are kept as natural logarithms: cumulative scores grow linearly
//! with the horizon and raw products overflow long before a run ends, while
//! every quantity the algorithms need is a ratio of aggregates.

use rand::Rng;

use crate::dag::{CoverSet, Dag, EdgeId, Path};

/// Per-edge scaled cumulative gains; the implicit edge weight is `exp(score)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScoreState {
    scaled_gain: Vec<f64>,
}

impl EdgeScoreState {
    pub fn zeros(edge_count: usize) -> Self {
        Self {
            scaled_gain: vec![0.0; edge_count],
        }
    }

    pub fn from_vec(scaled_gain: Vec<f64>) -> Self {
        assert!(scaled_gain.iter().all(|x| x.is_finite()), "scores must be finite");
        Self { scaled_gain }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scaled_gain
    }

    /// `score[e] += scale * delta[e]` for every edge.
    pub fn add_scaled(&mut self, delta: &[f64], scale: f64) {
        for (s, d) in self.scaled_gain.iter_mut().zip(delta) {
            *s += scale * d;
        }
        debug_assert!(self.scaled_gain.iter().all(|x| x.is_finite()));
    }
}

/// Edge-touch accounting used to check the per-round cost of the engine.
pub mod counters {
    use std::cell::Cell;

    thread_local! {
        static EDGE_TOUCHES: Cell<u64> = const { Cell::new(0) };
    }

    pub fn edge_touches() -> u64 {
        EDGE_TOUCHES.with(|c| c.get())
    }

    pub fn reset() {
        EDGE_TOUCHES.with(|c| c.set(0));
    }

    pub(crate) fn add(n: usize) {
        EDGE_TOUCHES.with(|c| c.set(c.get() + n as u64));
    }
}

fn lse_accumulate(terms: impl Iterator<Item = f64>, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(terms);
    crate::dag::log_sum_exp(buf)
}

/// `ln H(s)` for every vertex, in one reverse sweep.
pub fn backward_aggregate(dag: &Dag, scores: &[f64]) -> Vec<f64> {
    let n = dag.vertex_count();
    let mut log_h = vec![f64::NEG_INFINITY; n];
    log_h[dag.sink()] = 0.0;
    let mut buf = Vec::new();
    for s in (0..dag.sink()).rev() {
        let out = dag.out_edges(s);
        log_h[s] = lse_accumulate(out.iter().map(|&e| scores[e] + log_h[dag.edge(e).head]), &mut buf);
    }
    counters::add(dag.edge_count());
    log_h
}

/// `ln Ĥ(s)` for every vertex, in one forward sweep.
pub fn forward_aggregate(dag: &Dag, scores: &[f64]) -> Vec<f64> {
    let n = dag.vertex_count();
    let mut log_f = vec![f64::NEG_INFINITY; n];
    log_f[dag.source()] = 0.0;
    let mut buf = Vec::new();
    for s in 1..n {
        let inc = dag.in_edges(s);
        log_f[s] = lse_accumulate(inc.iter().map(|&e| log_f[dag.edge(e).tail] + scores[e]), &mut buf);
    }
    counters::add(dag.edge_count());
    log_f
}

/// Backward and forward aggregates for one score state.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAggregates {
    log_backward: Vec<f64>,
    log_forward: Vec<f64>,
}

impl FlowAggregates {
    pub fn compute(dag: &Dag, scores: &[f64]) -> Self {
        Self {
            log_backward: backward_aggregate(dag, scores),
            log_forward: forward_aggregate(dag, scores),
        }
    }

    pub fn log_backward(&self) -> &[f64] {
        &self.log_backward
    }

    pub fn log_forward(&self) -> &[f64] {
        &self.log_forward
    }

    /// `H(s)` in linear scale (may overflow for large scores).
    pub fn backward(&self, s: usize) -> f64 {
        self.log_backward[s].exp()
    }

    pub fn forward(&self, s: usize) -> f64 {
        self.log_forward[s].exp()
    }

    /// `ln W̄`, the log of the total path weight.
    pub fn log_total(&self) -> f64 {
        self.log_backward[0]
    }
}

/// Probability that the weight-driven walk at `tail(e)` takes `e`:
/// `w_e H(head) / H(tail)`.
pub fn hop_probability(dag: &Dag, scores: &[f64], log_backward: &[f64], e: EdgeId) -> f64 {
    let edge = dag.edge(e);
    (scores[e] + log_backward[edge.head] - log_backward[edge.tail]).exp()
}

/// Draws a path with probability proportional to its weight, one vertex at a
/// time. Uses one uniform per hop and scans outgoing edges in id order.
pub fn sample_path<R: Rng + ?Sized>(
    dag: &Dag,
    scores: &[f64],
    log_backward: &[f64],
    rng: &mut R,
) -> Path {
    let mut edges = Vec::new();
    let mut at = dag.source();
    while at != dag.sink() {
        let x: f64 = rng.random();
        let out = dag.out_edges(at);
        let mut acc = 0.0;
        let mut pick = *out.last().expect("non-sink vertices have out-edges");
        for &e in out {
            acc += hop_probability(dag, scores, log_backward, e);
            if acc > x {
                pick = e;
                break;
            }
        }
        counters::add(out.len());
        edges.push(pick);
        at = dag.edge(pick).head;
    }
    Path::from_edges_unchecked(dag.edge_count(), edges)
}

/// Exact probability that [`sample_path`] returns `path`, as the product of
/// its hop probabilities.
pub fn sampled_path_probability(dag: &Dag, scores: &[f64], log_backward: &[f64], path: &Path) -> f64 {
    path.edges()
        .iter()
        .map(|&e| hop_probability(dag, scores, log_backward, e))
        .product()
}

/// Fraction of exploration mass that lands on `e` when a covering path is
/// drawn uniformly.
pub fn cover_share(cover: &CoverSet, e: EdgeId) -> f64 {
    cover.edge_cover_count[e] as f64 / cover.len() as f64
}

/// `q_e = (1-γ) Ĥ(tail) w_e H(head) / H(u) + γ |{i ∈ C : e ∈ i}| / |C|`.
pub fn edge_marginal(
    dag: &Dag,
    scores: &[f64],
    agg: &FlowAggregates,
    cover: &CoverSet,
    gamma: f64,
    e: EdgeId,
) -> f64 {
    let edge = dag.edge(e);
    let through = (agg.log_forward[edge.tail] + scores[e] + agg.log_backward[edge.head]
        - agg.log_total())
    .exp();
    (1.0 - gamma) * through + gamma * cover_share(cover, e)
}

/// [`edge_marginal`] for every edge.
pub fn edge_marginals(
    dag: &Dag,
    scores: &[f64],
    agg: &FlowAggregates,
    cover: &CoverSet,
    gamma: f64,
) -> Vec<f64> {
    counters::add(dag.edge_count());
    (0..dag.edge_count())
        .map(|e| edge_marginal(dag, scores, agg, cover, gamma, e))
        .collect()
}

/// Probability of `path` under the mixture of exponential weights (mass
/// `1-γ`) and uniform covering-path exploration (mass `γ`).
pub fn path_probability(
    scores: &[f64],
    agg: &FlowAggregates,
    cover: &CoverSet,
    gamma: f64,
    path: &Path,
) -> f64 {
    let weight = (path.total(scores) - agg.log_total()).exp();
    let explore = if cover.contains(path) {
        1.0 / cover.len() as f64
    } else {
        0.0
    };
    (1.0 - gamma) * weight + gamma * explore
}

/// Aggregates for strictly positive linear edge weights.
///
/// Cheaper than the log-domain sweeps (no transcendental calls), but only
/// valid while every partial product stays a normal float. Callers must fall
/// back to the log-domain routines when [`LinearFlow::compute`] returns `None`.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    pub backward: Vec<f64>,
    pub forward: Vec<f64>,
}

impl LinearFlow {
    pub fn compute(dag: &Dag, weights: &[f64]) -> Option<Self> {
        let n = dag.vertex_count();
        let mut backward = vec![0.0; n];
        backward[dag.sink()] = 1.0;
        for s in (0..dag.sink()).rev() {
            let mut acc = 0.0;
            for &e in dag.out_edges(s) {
                acc += weights[e] * backward[dag.edge(e).head];
            }
            if !acc.is_normal() {
                return None;
            }
            backward[s] = acc;
        }
        let mut forward = vec![0.0; n];
        forward[0] = 1.0;
        for s in 1..n {
            let mut acc = 0.0;
            for &e in dag.in_edges(s) {
                acc += forward[dag.edge(e).tail] * weights[e];
            }
            if !acc.is_normal() {
                return None;
            }
            forward[s] = acc;
        }
        counters::add(2 * dag.edge_count());
        Some(Self { backward, forward })
    }

    pub fn total(&self) -> f64 {
        self.backward[0]
    }

    /// Probability mass of paths through `e` (no exploration mixture).
    pub fn through(&self, dag: &Dag, weights: &[f64], e: EdgeId) -> f64 {
        let edge = dag.edge(e);
        self.forward[edge.tail] * weights[e] * self.backward[edge.head] / self.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{build_cover_set, enumerate_paths, CoverSet, Dag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const E2: f64 = std::f64::consts::E * std::f64::consts::E;

    #[test]
    fn backward_counts_paths() {
        let d = Dag::diamond();
        let h = backward_aggregate(&d, &[0.0; 4]);
        let lin: Vec<f64> = h.iter().map(|x| x.exp()).collect();
        assert!((lin[3] - 1.0).abs() < 1e-15);
        assert!((lin[1] - 1.0).abs() < 1e-15);
        assert!((lin[2] - 1.0).abs() < 1e-15);
        assert!((lin[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn backward_with_upper_gains() {
        let d = Dag::diamond();
        let h = backward_aggregate(&d, &[1.0, 1.0, 0.0, 0.0]);
        assert!((h[0].exp() - (E2 + 1.0)).abs() < 1e-12);
        assert!((h[0].exp() - 8.389056).abs() < 1e-6);
        let single = Dag::single_edge();
        assert!((backward_aggregate(&single, &[0.7])[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn forward_mirrors_backward() {
        let d = Dag::diamond();
        let f = forward_aggregate(&d, &[0.0; 4]);
        assert_eq!(f[0], 0.0);
        assert!((f[1].exp() - 1.0).abs() < 1e-15);
        assert!((f[3].exp() - 2.0).abs() < 1e-15);
        let chain = Dag::parallel_chain(2);
        let f = forward_aggregate(&chain, &[0.0; 4]);
        assert!((f[2].exp() - 4.0).abs() < 1e-12);
        assert!((forward_aggregate(&Dag::single_edge(), &[-1.5])[1] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn aggregates_agree_at_extremes() {
        let chain = Dag::parallel_chain(3);
        let scores = [3.0, -2.0, 0.5, 1.5, -0.25, 2.0];
        let agg = FlowAggregates::compute(&chain, &scores);
        assert!((agg.log_backward()[0] - agg.log_forward()[3]).abs() < 1e-12);
    }

    #[test]
    fn sampled_law_and_marginals() {
        let d = Dag::diamond();
        let scores = [1.0, 1.0, 0.0, 0.0];
        let agg = FlowAggregates::compute(&d, &scores);
        let cover = build_cover_set(&d);
        let paths = enumerate_paths(&d, 16).unwrap();
        let p_upper = sampled_path_probability(&d, &scores, agg.log_backward(), &paths[0]);
        assert!((p_upper - E2 / (E2 + 1.0)).abs() < 1e-12);
        assert!((p_upper - 0.8808).abs() < 1e-4);
        let q = edge_marginals(&d, &scores, &agg, &cover, 0.0);
        assert!((q[0] - E2 / (E2 + 1.0)).abs() < 1e-12);
        assert!((path_probability(&scores, &agg, &cover, 0.0, &paths[0]) - p_upper).abs() < 1e-12);
        let from_source: f64 = d.out_edges(0).iter().map(|&e| q[e]).sum();
        assert!((from_source - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_marginals_with_exploration() {
        let d = Dag::diamond();
        let agg = FlowAggregates::compute(&d, &[0.0; 4]);
        let cover = build_cover_set(&d);
        for q in edge_marginals(&d, &[0.0; 4], &agg, &cover, 0.5) {
            assert!((q - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_with_partial_cover() {
        let d = Dag::diamond();
        let agg = FlowAggregates::compute(&d, &[0.0; 4]);
        let paths = enumerate_paths(&d, 16).unwrap();
        // A one-path "cover" is enough to exercise the mixture arithmetic.
        let cover = CoverSet {
            paths: vec![paths[0].clone()],
            edge_to_cover_path: vec![0, 0, 0, 0],
            edge_cover_count: vec![1, 1, 0, 0],
        };
        assert!((path_probability(&[0.0; 4], &agg, &cover, 0.5, &paths[0]) - 0.75).abs() < 1e-15);
        assert!((path_probability(&[0.0; 4], &agg, &cover, 0.5, &paths[1]) - 0.25).abs() < 1e-15);
        let uniform = path_probability(&[0.0; 4], &agg, &cover, 0.0, &paths[1]);
        assert!((uniform - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chain_probabilities_match_brute_force() {
        let chain = Dag::parallel_chain(2);
        let scores = [0.3, -1.2, 2.2, 0.4];
        let agg = FlowAggregates::compute(&chain, &scores);
        let cover = build_cover_set(&chain);
        let paths = enumerate_paths(&chain, 16).unwrap();
        let weights: Vec<f64> = paths.iter().map(|p| p.total(&scores).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut sum = 0.0;
        for (p, w) in paths.iter().zip(&weights) {
            let got = path_probability(&scores, &agg, &cover, 0.0, p);
            assert!((got - w / total).abs() < 1e-12);
            sum += path_probability(&scores, &agg, &cover, 0.3, p);
        }
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_path_always_sampled() {
        let d = Dag::from_labeled_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        let h = backward_aggregate(&d, &[5.0, -3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(sample_path(&d, &[5.0, -3.0], &h, &mut rng).edges(), &[0, 1]);
        }
    }

    #[test]
    fn uniform_diamond_sampling_chi_square() {
        let d = Dag::diamond();
        let h = backward_aggregate(&d, &[0.0; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000;
        let upper = (0..draws)
            .filter(|_| sample_path(&d, &[0.0; 4], &h, &mut rng).edges()[0] == 0)
            .count() as f64;
        let expected = draws as f64 / 2.0;
        let chi2 = 2.0 * (upper - expected).powi(2) / expected;
        // 1 dof, p = 0.001 critical value.
        assert!(chi2 < 10.828, "chi2 = {chi2}");
    }

    #[test]
    fn large_scores_stay_finite() {
        let chain = Dag::parallel_chain(10);
        let scores: Vec<f64> = (0..20).map(|e| if e % 2 == 0 { 700.0 } else { 650.0 }).collect();
        let agg = FlowAggregates::compute(&chain, &scores);
        assert!(agg.log_total().is_finite());
        // Each stage contributes ln(e^700 + e^650) = 700 + ln(1 + e^-50).
        let expected = 10.0 * (700.0 + (-50f64).exp().ln_1p());
        assert!((agg.log_total() - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn linear_flow_matches_log_domain() {
        let chain = Dag::parallel_chain(3);
        let scores = [0.2, -0.4, 1.0, 0.1, 0.0, -2.0];
        let weights: Vec<f64> = scores.iter().map(|s: &f64| s.exp()).collect();
        let lin = LinearFlow::compute(&chain, &weights).unwrap();
        let agg = FlowAggregates::compute(&chain, &scores);
        assert!((lin.total().ln() - agg.log_total()).abs() < 1e-12);
        let cover = build_cover_set(&chain);
        for e in 0..6 {
            let q = edge_marginal(&chain, &scores, &agg, &cover, 0.0, e);
            assert!((lin.through(&chain, &weights, e) - q).abs() < 1e-12);
        }
        assert!(LinearFlow::compute(&chain, &[1e-200; 6]).is_none());
    }
}
