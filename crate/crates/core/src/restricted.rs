//! Restricted bandit: only the total loss of the chosen path is observed.
//!
//! The learner fixes a basis of paths (a barycentric spanner of the path
//! set), occasionally plays a uniformly random basis path to obtain an
//! unbiased estimate of the basis losses, and maps those to edge-loss
//! estimates through the pseudoinverse `B⁺ = Bᵀ(BBᵀ)⁻¹`. Every other round it
//! plays exponential weights over paths, maintained per edge as in
//! [`crate::weight_dp`].

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::dag::{enumerate_paths, Dag, GraphError, Path, DEFAULT_PATH_CAP};
use crate::edge_bandit::require;
use crate::error::{FeedbackError, ParamError};
use crate::weight_dp::{backward_aggregate, sample_path, sampled_path_probability, EdgeScoreState};

/// Tolerance for rank decisions and span residuals.
pub const SPAN_TOLERANCE: f64 = 1e-9;
/// Smallest Gram determinant accepted as nonsingular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RestrictedError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("path is not in the span of the basis (residual {residual:e})")]
    NotInSpan { residual: f64 },
    #[error("basis rows are linearly dependent (|det(BBᵀ)| = {det:e})")]
    Singular { det: f64 },
    #[error("spanner constant must be at least 1, got {0}")]
    BadSpannerConstant(f64),
}

/// Linearly independent paths spanning every path's incidence vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub rows: Vec<Path>,
    /// `b × |E|` incidence matrix.
    pub matrix: DMatrix<f64>,
    /// `|E| × b` pseudoinverse.
    pub pinv: DMatrix<f64>,
    /// `|det(BBᵀ)|`.
    pub gram_det: f64,
}

impl Basis {
    pub fn from_rows(edge_count: usize, rows: Vec<Path>) -> Result<Self, RestrictedError> {
        let b = rows.len();
        let matrix: DMatrix<f64> = DMatrix::from_fn(b, edge_count, |r, e| if rows[r].contains(e) { 1.0 } else { 0.0 });
        let lu = (&matrix * matrix.transpose()).lu();
        let det = lu.determinant().abs();
        if det.is_nan() || det < SINGULAR_DET {
            return Err(RestrictedError::Singular { det });
        }
        let inv = lu.try_inverse().ok_or(RestrictedError::Singular { det })?;
        let pinv = matrix.transpose() * inv;
        Ok(Self {
            rows,
            matrix,
            pinv,
            gram_det: det,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of the basis row equal to `path`.
    pub fn position(&self, path: &Path) -> Option<usize> {
        self.rows.iter().position(|r| r == path)
    }

    /// `|det(B'B'ᵀ)|` where `B'` is the basis with row `j` replaced by `path`.
    pub fn replaced_det(&self, j: usize, path: &Path) -> f64 {
        let mut m = self.matrix.clone();
        for e in 0..m.ncols() {
            m[(j, e)] = if path.contains(e) { 1.0 } else { 0.0 };
        }
        (&m * m.transpose()).determinant().abs()
    }

    /// Expansion coefficients `α` with `path = Σ_j α_j b^j`.
    pub fn coefficients(&self, path: &Path) -> Result<Vec<f64>, RestrictedError> {
        let x = DMatrix::from_row_slice(1, self.matrix.ncols(), &path.incidence_vector());
        let alpha = &x * &self.pinv;
        let residual = (&x - &alpha * &self.matrix).amax();
        if residual >= SPAN_TOLERANCE {
            return Err(RestrictedError::NotInSpan { residual });
        }
        Ok(alpha.iter().copied().collect())
    }

    /// Edge-loss vector `B⁺ v` for basis-loss vector `v`.
    pub fn to_edges(&self, basis_losses: &[f64]) -> Vec<f64> {
        let v = DMatrix::from_column_slice(self.len(), 1, basis_losses);
        (&self.pinv * v).iter().copied().collect()
    }

    /// Largest coefficient magnitude over `paths`.
    pub fn spanner_constant(&self, paths: &[Path]) -> Result<f64, RestrictedError> {
        let mut worst: f64 = 0.0;
        for p in paths {
            for a in self.coefficients(p)? {
                worst = worst.max(a.abs());
            }
        }
        Ok(worst)
    }
}

/// Greedy rank extension over paths in enumeration order: a path joins the
/// basis when its incidence vector has a component of norm above
/// [`SPAN_TOLERANCE`] outside the span of the rows chosen so far.
pub fn find_basis(dag: &Dag) -> Result<Basis, RestrictedError> {
    let paths = enumerate_paths(dag, DEFAULT_PATH_CAP)?;
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    let mut rows = Vec::new();
    for p in paths {
        let mut v = p.incidence_vector();
        for q in &ortho {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > SPAN_TOLERANCE {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            rows.push(p);
        }
    }
    Basis::from_rows(dag.edge_count(), rows)
}

/// Source of candidate rows for the spanner search.
pub trait SpannerOracle {
    /// The path maximizing `|det(B'B'ᵀ)|` when it replaces row `j`, with
    /// that determinant.
    fn best_replacement(&self, basis: &Basis, j: usize) -> (Path, f64);
}

/// Exhaustive maximization over an enumerated path set.
#[derive(Debug, Clone)]
pub struct EnumerationOracle {
    paths: Vec<Path>,
}

impl EnumerationOracle {
    pub fn new(dag: &Dag) -> Result<Self, GraphError> {
        Ok(Self {
            paths: enumerate_paths(dag, DEFAULT_PATH_CAP)?,
        })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }
}

impl SpannerOracle for EnumerationOracle {
    fn best_replacement(&self, basis: &Basis, j: usize) -> (Path, f64) {
        let mut best = (basis.rows[j].clone(), basis.gram_det);
        for p in &self.paths {
            let det = basis.replaced_det(j, p);
            if det > best.1 {
                best = (p.clone(), det);
            }
        }
        best
    }
}

/// Replaces rows while some replacement multiplies `|det(BBᵀ)|` by more than
/// `c²`. The result is a `c`-barycentric spanner.
pub fn spanner_search(
    basis: Basis,
    oracle: &impl SpannerOracle,
    c: f64,
) -> Result<Basis, RestrictedError> {
    if c.is_nan() || c < 1.0 {
        return Err(RestrictedError::BadSpannerConstant(c));
    }
    let edge_count = basis.matrix.ncols();
    let mut basis = basis;
    'search: loop {
        for j in 0..basis.len() {
            let (path, det) = oracle.best_replacement(&basis, j);
            if det > c * c * basis.gram_det * (1.0 + 1e-12) {
                let mut rows = basis.rows.clone();
                rows[j] = path;
                basis = Basis::from_rows(edge_count, rows)?;
                continue 'search;
            }
        }
        return Ok(basis);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedParams {
    pub epsilon: f64,
    pub eta: f64,
    pub horizon: u64,
    pub delta: f64,
}

/// Graph quantities for the restricted tuning: longest path length `K`,
/// basis size `b` and `ln N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedStats {
    pub k: usize,
    pub b: usize,
    pub ln_paths: f64,
}

impl RestrictedStats {
    pub fn of(dag: &Dag, basis: &Basis) -> Self {
        Self {
            k: dag.longest_path_len(),
            b: basis.len(),
            ln_paths: dag.ln_path_count(),
        }
    }

    fn log_term(&self, delta: f64) -> f64 {
        (4.0 * self.b as f64).ln() + self.ln_paths - delta.ln()
    }

    /// `n ≥ (8b/ε²) ln(4bN/δ)`.
    pub fn min_horizon(&self, delta: f64, epsilon: f64) -> f64 {
        8.0 * self.b as f64 / (epsilon * epsilon) * self.log_term(delta)
    }
}

/// The closed-form tuning `ε = (Kb ln(4bN/δ)/n)^(1/3)`, `η = ε²`, without the
/// validity checks of [`restricted_derive_params`]. `ε` is capped at 1.
pub fn restricted_params_unchecked(n: u64, delta: f64, stats: &RestrictedStats) -> RestrictedParams {
    let kb = (stats.k * stats.b) as f64;
    let epsilon = (kb * stats.log_term(delta) / n as f64).cbrt().min(1.0);
    RestrictedParams {
        epsilon,
        eta: epsilon * epsilon,
        horizon: n,
        delta,
    }
}

/// Tuned parameters, requiring `ε ≤ 1/K` and `n ≥ (8b/ε²) ln(4bN/δ)`.
pub fn restricted_derive_params(
    n: u64,
    delta: f64,
    stats: &RestrictedStats,
) -> Result<RestrictedParams, ParamError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ParamError::Invalid {
            name: "delta",
            value: delta,
            reason: "must lie in (0, 1)",
        });
    }
    let p = restricted_params_unchecked(n, delta, stats);
    let limit = 1.0 / stats.k as f64;
    if p.epsilon > limit {
        return Err(ParamError::EpsilonTooLarge {
            epsilon: p.epsilon,
            limit,
        });
    }
    require("(8b/eps^2) ln(4bN/delta)", stats.min_horizon(delta, p.epsilon), n)?;
    Ok(p)
}

/// Cumulative regret bound `9.1 K²b (Kb ln(4bN/δ))^(1/3) n^(2/3)`.
pub fn restricted_regret_bound(n: u64, delta: f64, stats: &RestrictedStats) -> f64 {
    let (k, b) = (stats.k as f64, stats.b as f64);
    9.1 * k * k * b * (k * b * stats.log_term(delta)).cbrt() * (n as f64).powf(2.0 / 3.0)
}

/// Learner state for the restricted bandit.
#[derive(Debug, Clone)]
pub struct RestrictedBandit {
    dag: Dag,
    basis: Basis,
    params: RestrictedParams,
    /// `-η Σ ℓ̃_e`: exploitation weights are `exp(score)`.
    scores: EdgeScoreState,
    log_backward: Vec<f64>,
    round: u64,
    explorations: u64,
}

impl RestrictedBandit {
    pub fn new(dag: Dag, basis: Basis, params: RestrictedParams) -> Result<Self, ParamError> {
        if !(params.epsilon > 0.0 && params.epsilon <= 1.0) {
            return Err(ParamError::Invalid {
                name: "epsilon",
                value: params.epsilon,
                reason: "must lie in (0, 1]",
            });
        }
        if !(params.eta > 0.0 && params.eta.is_finite()) {
            return Err(ParamError::Invalid {
                name: "eta",
                value: params.eta,
                reason: "must be positive",
            });
        }
        let scores = EdgeScoreState::zeros(dag.edge_count());
        let log_backward = backward_aggregate(&dag, scores.as_slice());
        Ok(Self {
            dag,
            basis,
            params,
            scores,
            log_backward,
            round: 0,
            explorations: 0,
        })
    }

    /// Greedy basis, spanner search with constant `c`, checked tuning.
    pub fn tuned(dag: Dag, n: u64, delta: f64, c: f64) -> Result<Self, RestrictedError> {
        let basis = spanner_search(find_basis(&dag)?, &EnumerationOracle::new(&dag)?, c)?;
        let params = restricted_derive_params(n, delta, &RestrictedStats::of(&dag, &basis))?;
        Ok(Self::new(dag, basis, params)?)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn params(&self) -> &RestrictedParams {
        &self.params
    }

    pub fn scores(&self) -> &[f64] {
        self.scores.as_slice()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn explorations(&self) -> u64 {
        self.explorations
    }

    /// Draws `S_t`; on `S_t = 1` a uniform basis row, otherwise an
    /// exponential-weights path. Returns the path and `S_t`.
    pub fn choose_path<R: Rng + ?Sized>(&self, rng: &mut R) -> (Path, bool) {
        let explore = self.params.epsilon >= 1.0 || rng.random::<f64>() < self.params.epsilon;
        if explore {
            let j = rng.random_range(0..self.basis.len());
            (self.basis.rows[j].clone(), true)
        } else {
            (
                sample_path(&self.dag, self.scores.as_slice(), &self.log_backward, rng),
                false,
            )
        }
    }

    /// Exact probability of each of `paths` under [`RestrictedBandit::choose_path`].
    pub fn path_law(&self, paths: &[Path]) -> Vec<f64> {
        let eps = self.params.epsilon;
        paths
            .iter()
            .map(|p| {
                let explore = if self.basis.position(p).is_some() {
                    eps / self.basis.len() as f64
                } else {
                    0.0
                };
                explore
                    + (1.0 - eps) * sampled_path_probability(&self.dag, self.scores.as_slice(), &self.log_backward, p)
            })
            .collect()
    }

    /// `ℓ̃^B`: `(b/ε) · path_loss` on the matching row of an exploration
    /// round, zero elsewhere.
    pub fn basis_estimates(
        &self,
        explored: bool,
        chosen: &Path,
        path_loss: f64,
    ) -> Result<Vec<f64>, FeedbackError> {
        let max = chosen.len() as f64;
        if !(0.0..=max).contains(&path_loss) {
            return Err(FeedbackError::PathLossOutOfRange { value: path_loss, max });
        }
        let b = self.basis.len();
        let mut out = vec![0.0; b];
        if explored {
            if let Some(j) = self.basis.position(chosen) {
                out[j] = b as f64 / self.params.epsilon * path_loss;
            }
        }
        Ok(out)
    }

    /// Edge-loss estimates `B⁺ ℓ̃^B`.
    pub fn edge_estimates(
        &self,
        explored: bool,
        chosen: &Path,
        path_loss: f64,
    ) -> Result<Vec<f64>, FeedbackError> {
        Ok(self.basis.to_edges(&self.basis_estimates(explored, chosen, path_loss)?))
    }

    /// Consumes `S_t`, the chosen path and its total loss; nothing else.
    pub fn update(&mut self, explored: bool, chosen: &Path, path_loss: f64) -> Result<(), FeedbackError> {
        let basis_est = self.basis_estimates(explored, chosen, path_loss)?;
        if explored {
            self.explorations += 1;
        }
        if basis_est.iter().any(|&x| x != 0.0) {
            let est = self.basis.to_edges(&basis_est);
            self.scores.add_scaled(&est, -self.params.eta);
            self.log_backward = backward_aggregate(&self.dag, self.scores.as_slice());
        }
        self.round += 1;
        Ok(())
    }
}
