//! Exponential weights on edges with covering-path exploration.
//!
//! Each round the learner draws a path from a mixture of the product-form
//! exponential-weights distribution (mass `1 - γ`) and a uniform covering path
//! (mass `γ`), observes the losses of the edges it used, and credits every
//! edge with an optimistic importance-weighted gain estimate
//! `g'_e = (1{e ∈ I_t} g_e + β) / q_e`, where `q_e` is the probability that
//! the round's path contains `e`.
//!
//! The score of an edge stores `η · Σ g'` so that [`crate::weight_dp`] never
//! needs to know `η`.

use rand::Rng;

use crate::dag::{build_cover_set, CoverSet, Dag, EdgeId, Path};
use crate::error::{check_unit, FeedbackError, ParamError};
use crate::weight_dp::{
    edge_marginals, path_probability, sample_path, EdgeScoreState, FlowAggregates,
};

/// Graph quantities the tuning formulas depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    /// Common length of every source-to-sink path.
    pub k: usize,
    pub edge_count: usize,
    pub cover_size: usize,
    /// `ln N`, the log of the number of paths.
    pub ln_paths: f64,
}

impl GraphStats {
    pub fn new(k: usize, edge_count: usize, cover_size: usize, paths: f64) -> Self {
        Self {
            k,
            edge_count,
            cover_size,
            ln_paths: paths.ln(),
        }
    }

    pub fn of(dag: &Dag, cover: &CoverSet) -> Self {
        Self {
            k: dag.longest_path_len(),
            edge_count: dag.edge_count(),
            cover_size: cover.len(),
            ln_paths: dag.ln_path_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditParams {
    pub eta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub horizon: u64,
    pub delta: f64,
}

impl BanditParams {
    /// Range-checked manual parameters. `γ` and `β` may take any value in
    /// `[0, 1]` here; the tuned setting additionally satisfies
    /// [`BanditParams::meets_bound_conditions`].
    pub fn new(eta: f64, gamma: f64, beta: f64, horizon: u64, delta: f64) -> Result<Self, ParamError> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(ParamError::Invalid {
                name: "eta",
                value: eta,
                reason: "must be positive",
            });
        }
        check_unit("gamma", gamma, false)?;
        check_unit("beta", beta, false)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ParamError::Invalid {
                name: "delta",
                value: delta,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self {
            eta,
            gamma,
            beta,
            horizon,
            delta,
        })
    }

    /// `0 ≤ γ < 1/2`, `0 < β ≤ 1` and `2ηK|C| ≤ γ`.
    pub fn meets_bound_conditions(&self, stats: &GraphStats) -> bool {
        let need = 2.0 * self.eta * stats.k as f64 * stats.cover_size as f64;
        self.gamma < 0.5 && self.beta > 0.0 && self.beta <= 1.0 && need <= self.gamma * (1.0 + 1e-12)
    }
}

pub(crate) fn require(
    condition: &'static str,
    required: f64,
    horizon: u64,
) -> Result<(), ParamError> {
    if (horizon as f64) < required {
        Err(ParamError::HorizonTooShort {
            condition,
            required,
            horizon,
        })
    } else {
        Ok(())
    }
}

fn check_horizon(n: u64, delta: f64, stats: &GraphStats) -> Result<(), ParamError> {
    if stats.ln_paths <= 0.0 {
        return Err(ParamError::SinglePath);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ParamError::Invalid {
            name: "delta",
            value: delta,
            reason: "must lie in (0, 1)",
        });
    }
    let k = stats.k as f64;
    let e = stats.edge_count as f64;
    require("(K/|E|) ln(|E|/delta)", k / e * (e / delta).ln(), n)?;
    require("4|C| ln N", 4.0 * stats.cover_size as f64 * stats.ln_paths, n)
}

/// Tuned parameters for horizon `n` and confidence `δ`:
/// `β = sqrt(K ln(|E|/δ) / (n|E|))`, `η = sqrt(ln N / (4nK²|C|))`, `γ = 2ηK|C|`.
pub fn derive_params(n: u64, delta: f64, stats: &GraphStats) -> Result<BanditParams, ParamError> {
    check_horizon(n, delta, stats)?;
    let (nf, k, e, c) = (
        n as f64,
        stats.k as f64,
        stats.edge_count as f64,
        stats.cover_size as f64,
    );
    let beta = (k * (e / delta).ln() / (nf * e)).sqrt();
    let eta = (stats.ln_paths / (4.0 * nf * k * k * c)).sqrt();
    let gamma = 2.0 * eta * k * c;
    Ok(BanditParams {
        eta,
        gamma,
        beta,
        horizon: n,
        delta,
    })
}

/// High-probability bound on the normalized regret under [`derive_params`]:
/// `2 sqrt(K/n) (sqrt(4K|C| ln N) + sqrt(|E| ln(|E|/δ)))`.
pub fn regret_bound(n: u64, delta: f64, stats: &GraphStats) -> Result<f64, ParamError> {
    check_horizon(n, delta, stats)?;
    let (nf, k, e, c) = (
        n as f64,
        stats.k as f64,
        stats.edge_count as f64,
        stats.cover_size as f64,
    );
    Ok(2.0 * (k / nf).sqrt() * ((4.0 * k * c * stats.ln_paths).sqrt() + (e * (e / delta).ln()).sqrt()))
}

/// Checks that `losses` names every edge of `chosen` exactly once with a value
/// in `[0, 1]`, and returns them indexed by edge.
pub(crate) fn chosen_losses(
    edge_count: usize,
    chosen: &Path,
    losses: &[(EdgeId, f64)],
) -> Result<Vec<Option<f64>>, FeedbackError> {
    let mut by_edge = vec![None; edge_count];
    for &(e, value) in losses {
        if e >= edge_count || !chosen.contains(e) || by_edge[e].is_some() {
            return Err(FeedbackError::PathMismatch(e));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(FeedbackError::LossOutOfRange { edge: e, value });
        }
        by_edge[e] = Some(value);
    }
    if let Some(&e) = chosen.edges().iter().find(|&&e| by_edge[e].is_none()) {
        return Err(FeedbackError::MissingEdgeLoss(e));
    }
    Ok(by_edge)
}

/// `g'_e = (g_e + β)/q_e` on chosen edges and `β/q_e` elsewhere, `g = 1 - ℓ`.
pub(crate) fn gain_estimates(q: &[f64], beta: f64, losses: &[Option<f64>]) -> Vec<f64> {
    q.iter()
        .zip(losses)
        .map(|(&q, loss)| match loss {
            Some(l) => (1.0 - l + beta) / q,
            None => beta / q,
        })
        .collect()
}

/// Learner state for the edge-feedback bandit.
#[derive(Debug, Clone)]
pub struct EdgeBandit {
    dag: Dag,
    cover: CoverSet,
    params: BanditParams,
    scores: EdgeScoreState,
    agg: FlowAggregates,
    round: u64,
}

impl EdgeBandit {
    /// Requires every source-to-sink path of `dag` to have the same length.
    pub fn new(dag: Dag, cover: CoverSet, params: BanditParams) -> Result<Self, ParamError> {
        let (longest, shortest) = dag.path_length_range();
        if longest != shortest {
            return Err(ParamError::NotUniformLength { shortest, longest });
        }
        let scores = EdgeScoreState::zeros(dag.edge_count());
        let agg = FlowAggregates::compute(&dag, scores.as_slice());
        Ok(Self {
            dag,
            cover,
            params,
            scores,
            agg,
            round: 0,
        })
    }

    /// Builds the greedy cover set and tuned parameters for horizon `n`.
    pub fn tuned(dag: Dag, n: u64, delta: f64) -> Result<Self, ParamError> {
        let cover = build_cover_set(&dag);
        let params = derive_params(n, delta, &GraphStats::of(&dag, &cover))?;
        Self::new(dag, cover, params)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cover(&self) -> &CoverSet {
        &self.cover
    }

    pub fn params(&self) -> &BanditParams {
        &self.params
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats::of(&self.dag, &self.cover)
    }

    pub fn scores(&self) -> &[f64] {
        self.scores.as_slice()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Draws the round's path. The flag is `true` when the exploration coin
    /// picked a uniform covering path.
    pub fn choose_path<R: Rng + ?Sized>(&self, rng: &mut R) -> (Path, bool) {
        let coin: f64 = rng.random();
        if coin < self.params.gamma {
            let i = rng.random_range(0..self.cover.len());
            (self.cover.paths[i].clone(), true)
        } else {
            let path = sample_path(&self.dag, self.scores.as_slice(), self.agg.log_backward(), rng);
            (path, false)
        }
    }

    /// `q_e` for every edge under the current distribution.
    pub fn edge_marginals(&self) -> Vec<f64> {
        edge_marginals(
            &self.dag,
            self.scores.as_slice(),
            &self.agg,
            &self.cover,
            self.params.gamma,
        )
    }

    pub fn path_probability(&self, path: &Path) -> f64 {
        path_probability(self.scores.as_slice(), &self.agg, &self.cover, self.params.gamma, path)
    }

    /// Gain estimates `g'` the update would apply for this feedback.
    pub fn gain_estimates(&self, chosen: &Path, losses: &[(EdgeId, f64)]) -> Result<Vec<f64>, FeedbackError> {
        let by_edge = chosen_losses(self.dag.edge_count(), chosen, losses)?;
        let q = self.edge_marginals();
        for (e, &qe) in q.iter().enumerate() {
            debug_assert!(
                qe >= self.params.gamma * crate::weight_dp::cover_share(&self.cover, e) * (1.0 - 1e-12),
                "exploration floor violated on edge {e}"
            );
        }
        Ok(gain_estimates(&q, self.params.beta, &by_edge))
    }

    /// Applies one round of edge feedback: estimates, then `score += η g'`.
    pub fn update(&mut self, chosen: &Path, losses: &[(EdgeId, f64)]) -> Result<(), FeedbackError> {
        let g = self.gain_estimates(chosen, losses)?;
        self.apply_estimates(&g, 1.0);
        Ok(())
    }

    /// `score += η · scale · g'`, advancing the round.
    pub(crate) fn apply_estimates(&mut self, g_prime: &[f64], scale: f64) {
        if scale != 0.0 {
            self.scores.add_scaled(g_prime, self.params.eta * scale);
            self.agg = FlowAggregates::compute(&self.dag, self.scores.as_slice());
        }
        self.round += 1;
    }

    pub(crate) fn skip_round(&mut self) {
        self.round += 1;
    }
}
