//! Label-efficient variant of the edge bandit.
//!
//! After choosing its path the learner flips an independent query coin
//! `S_t ~ Bernoulli(ε)`. Losses are revealed only when `S_t = 1`, and the gain
//! estimates are the edge-bandit estimates scaled by `S_t / ε`. The loss of the
//! chosen path is incurred every round whether or not it was queried.

use rand::Rng;

use crate::dag::{build_cover_set, CoverSet, Dag, EdgeId, Path};
use crate::edge_bandit::{require, BanditParams, EdgeBandit, GraphStats};
use crate::error::{check_unit, FeedbackError, ParamError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelEfficientParams {
    pub base: BanditParams,
    pub epsilon: f64,
}

/// Tuned parameters:
/// `η = sqrt(ε ln N / (4nK²|C|))`, `γ = 2ηK|C|/ε`,
/// `β = sqrt(K ln(2|E|/δ) / (n|E|ε))`.
pub fn le_derive_params(
    n: u64,
    delta: f64,
    epsilon: f64,
    stats: &GraphStats,
) -> Result<LabelEfficientParams, ParamError> {
    check_unit("epsilon", epsilon, true)?;
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
    let (nf, k, e, c, ln_n) = (
        n as f64,
        stats.k as f64,
        stats.edge_count as f64,
        stats.cover_size as f64,
        stats.ln_paths,
    );
    let log_term = (2.0 * e / delta).ln();
    require(
        "(1/eps) K^2 ln^2(2|E|/delta) / (|E| ln N)",
        k * k * log_term * log_term / (e * ln_n) / epsilon,
        n,
    )?;
    require("(1/eps) |E| ln(2|E|/delta) / K", e * log_term / k / epsilon, n)?;
    require("(1/eps) 4|C| ln N", 4.0 * c * ln_n / epsilon, n)?;

    let eta = (epsilon * ln_n / (4.0 * nf * k * k * c)).sqrt();
    let gamma = 2.0 * eta * k * c / epsilon;
    let beta = (k * log_term / (nf * e * epsilon)).sqrt();
    debug_assert!(gamma <= 0.5 + 1e-12 && beta <= 1.0 + 1e-12);
    Ok(LabelEfficientParams {
        base: BanditParams {
            eta,
            gamma,
            beta,
            horizon: n,
            delta,
        },
        epsilon,
    })
}

/// Query rate for a budget of `m` queries over `n` rounds:
/// `ε = (m - sqrt(2m ln(1/δ))) / n`, so that more than `m` queries happen
/// with probability at most `δ`. Capped at 1.
pub fn epsilon_from_budget(m: f64, n: u64, delta: f64) -> Result<f64, ParamError> {
    let minimum = 2.0 * (1.0 / delta).ln();
    if m.is_nan() || m <= minimum {
        return Err(ParamError::BudgetTooSmall { budget: m, minimum });
    }
    let eps = (m - (2.0 * m * (1.0 / delta).ln()).sqrt()) / n as f64;
    Ok(eps.min(1.0))
}

/// The itemized normalized-regret bound under [`le_derive_params`].
pub fn le_regret_bound(n: u64, delta: f64, epsilon: f64, stats: &GraphStats) -> f64 {
    let (nf, k, e, c) = (
        n as f64,
        stats.k as f64,
        stats.edge_count as f64,
        stats.cover_size as f64,
    );
    let ln_n = stats.ln_paths;
    (k / (nf * epsilon)).sqrt()
        * (4.0 * (k * c * ln_n).sqrt()
            + 5.0 * (e * (2.0 * e / delta).ln()).sqrt()
            + (8.0 * k * (2.0 / delta).ln()).sqrt())
        + 4.0 * k / (3.0 * nf * epsilon) * (std::f64::consts::LN_2 + ln_n - delta.ln())
}

/// The simplified form `(27K/2) sqrt(|E| ln(2N/δ) / (nε))`.
pub fn le_regret_bound_simple(n: u64, delta: f64, epsilon: f64, stats: &GraphStats) -> f64 {
    let k = stats.k as f64;
    let e = stats.edge_count as f64;
    let ln_2n_delta = std::f64::consts::LN_2 + stats.ln_paths - delta.ln();
    13.5 * k * (e * ln_2n_delta / (n as f64 * epsilon)).sqrt()
}

#[derive(Debug, Clone)]
pub struct LabelEfficientBandit {
    inner: EdgeBandit,
    epsilon: f64,
    queries: u64,
}

impl LabelEfficientBandit {
    pub fn new(dag: Dag, cover: CoverSet, params: LabelEfficientParams) -> Result<Self, ParamError> {
        check_unit("epsilon", params.epsilon, true)?;
        Ok(Self {
            inner: EdgeBandit::new(dag, cover, params.base)?,
            epsilon: params.epsilon,
            queries: 0,
        })
    }

    pub fn tuned(dag: Dag, n: u64, delta: f64, epsilon: f64) -> Result<Self, ParamError> {
        let cover = build_cover_set(&dag);
        let params = le_derive_params(n, delta, epsilon, &GraphStats::of(&dag, &cover))?;
        Self::new(dag, cover, params)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn bandit(&self) -> &EdgeBandit {
        &self.inner
    }

    pub fn choose_path<R: Rng + ?Sized>(&self, rng: &mut R) -> (Path, bool) {
        self.inner.choose_path(rng)
    }

    /// Flips the query coin. With `ε = 1` no randomness is consumed.
    pub fn draw_query<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.epsilon >= 1.0 || rng.random::<f64>() < self.epsilon
    }

    /// Estimates for one round: zero unless queried, otherwise the
    /// edge-bandit estimates divided by `ε`.
    pub fn gain_estimates(
        &self,
        chosen: &Path,
        queried: bool,
        losses: Option<&[(EdgeId, f64)]>,
    ) -> Result<Vec<f64>, FeedbackError> {
        match (queried, losses) {
            (false, None) => Ok(vec![0.0; self.inner.dag().edge_count()]),
            (false, Some(_)) => Err(FeedbackError::LossesPresentWithoutQuery),
            (true, None) => Err(FeedbackError::LossesMissingOnQuery),
            (true, Some(l)) => {
                let g = self.inner.gain_estimates(chosen, l)?;
                Ok(g.into_iter().map(|x| x / self.epsilon).collect())
            }
        }
    }

    pub fn update(
        &mut self,
        chosen: &Path,
        queried: bool,
        losses: Option<&[(EdgeId, f64)]>,
    ) -> Result<(), FeedbackError> {
        let g = self.gain_estimates(chosen, queried, losses)?;
        if queried {
            self.queries += 1;
            self.inner.apply_estimates(&g, 1.0);
        } else {
            self.inner.skip_round();
        }
        Ok(())
    }
}
