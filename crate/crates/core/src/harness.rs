//! Experiment engine.
//!
//! Loss models, baselines, comparators and seeded multi-run experiments, plus
//! CSV, metadata and plot output. Learners interact with the engine only
//! through [`Learner`]: each round a learner names its path and the kind of
//! feedback it asks for, and the engine checks that request against the
//! learner's [`FeedbackModel`] before building the feedback from the chosen
//! path's losses. Losses of edges off the chosen path never reach a learner.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::dag::{
    enumerate_paths, extremal_path, make_uniform_length, log_sum_exp, Dag, EdgeId, GraphError, Objective,
    PaddedDag, Path, DEFAULT_PATH_CAP,
};
use crate::edge_bandit::{regret_bound, EdgeBandit};
use crate::error::{FeedbackError, ParamError};
use crate::label_efficient::{epsilon_from_budget, le_regret_bound, LabelEfficientBandit};
use crate::restricted::{
    find_basis, restricted_derive_params, restricted_params_unchecked, restricted_regret_bound,
    spanner_search, EnumerationOracle, RestrictedBandit, RestrictedError, RestrictedStats,
};
use crate::tracking::{shortest_value, solve_partition, tracking_regret_bound, TrackingBandit};
use crate::weight_dp::{backward_aggregate, sample_path};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("graph shape mismatch: {0}")]
    GraphShapeMismatch(String),
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("{algo} asked for {request:?} feedback, which its model does not allow")]
    FirewallViolation { algo: String, request: Request },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Restricted(#[from] RestrictedError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("plot: {0}")]
    Plot(String),
}

fn config_error(field: &'static str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field,
        reason: reason.into(),
    }
}

/// Generator for run `run` and role `role` (0 for losses, `1 + i` for the
/// `i`-th algorithm). Streams are derived from the master seed by index, so
/// adding runs or algorithms never perturbs existing ones.
pub fn run_rng(seed: u64, run: usize, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64 * 64 + role);
    rng
}

/// Callback for a non-oblivious adversary: given the round (1-based), the
/// learner's earlier paths and a generator, returns per-edge losses.
pub type AdaptiveFn = Arc<dyn Fn(u64, &[Path], &mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// Per-edge uniform bands in force from round `start` onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub start: u64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone)]
pub enum LossModel {
    /// Independent uniform draws from `[lo_e, hi_e]` every round.
    Bands { lo: Vec<f64>, hi: Vec<f64> },
    /// Bands that change at fixed rounds.
    Phased(Vec<Phase>),
    /// Fixed matrix, one row per round.
    Scripted(Vec<Vec<f64>>),
    Adaptive(AdaptiveFn),
}

impl fmt::Debug for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bands { lo, hi } => f.debug_struct("Bands").field("lo", lo).field("hi", hi).finish(),
            Self::Phased(p) => f.debug_tuple("Phased").field(p).finish(),
            Self::Scripted(m) => write!(f, "Scripted({} rounds)", m.len()),
            Self::Adaptive(_) => f.write_str("Adaptive"),
        }
    }
}

fn check_bands(lo: &[f64], hi: &[f64], edge_count: usize) -> Result<(), HarnessError> {
    if lo.len() != edge_count || hi.len() != edge_count {
        return Err(config_error("losses", format!("bands must list {edge_count} edges")));
    }
    for (a, b) in lo.iter().zip(hi) {
        if !(0.0 <= *a && a <= b && *b <= 1.0) {
            return Err(config_error("losses", format!("band [{a}, {b}] is not inside [0, 1]")));
        }
    }
    Ok(())
}

fn draw_bands(lo: &[f64], hi: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| a + (b - a) * rng.random::<f64>())
        .collect()
}

impl LossModel {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Bands { .. } => "uniform-bands",
            Self::Phased(_) => "phased-bands",
            Self::Scripted(_) => "scripted",
            Self::Adaptive(_) => "adaptive",
        }
    }

    pub fn is_oblivious(&self) -> bool {
        !matches!(self, Self::Adaptive(_))
    }

    pub fn validate(&self, dag: &Dag, n: u64) -> Result<(), HarnessError> {
        let edge_count = dag.edge_count();
        match self {
            Self::Bands { lo, hi } => check_bands(lo, hi, edge_count),
            Self::Phased(phases) => {
                if phases.first().map(|p| p.start) != Some(1) {
                    return Err(config_error("losses", "the first phase must start at round 1"));
                }
                if phases.windows(2).any(|w| w[0].start >= w[1].start) {
                    return Err(config_error("losses", "phase starts must increase"));
                }
                phases.iter().try_for_each(|p| check_bands(&p.lo, &p.hi, edge_count))
            }
            Self::Scripted(rows) => {
                if (rows.len() as u64) < n {
                    return Err(config_error(
                        "losses",
                        format!("scripted matrix has {} rounds, need {n}", rows.len()),
                    ));
                }
                for row in rows {
                    if row.len() != edge_count {
                        return Err(config_error("losses", format!("rows must list {edge_count} edges")));
                    }
                    if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(config_error("losses", format!("loss {v} is outside [0, 1]")));
                    }
                }
                Ok(())
            }
            Self::Adaptive(_) => Ok(()),
        }
    }

    /// Losses for round `t` (1-based); dummy edges are pinned to 0.
    pub fn losses(
        &self,
        dag: &Dag,
        t: u64,
        history: &[Path],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>, HarnessError> {
        let mut row = match self {
            Self::Bands { lo, hi } => draw_bands(lo, hi, rng),
            Self::Phased(phases) => {
                let p = phases.iter().rev().find(|p| p.start <= t).expect("validated");
                draw_bands(&p.lo, &p.hi, rng)
            }
            Self::Scripted(rows) => rows[(t - 1) as usize].clone(),
            Self::Adaptive(f) => {
                let row = f(t, history, rng);
                if row.len() != dag.edge_count() {
                    return Err(config_error("losses", "adaptive adversary returned a row of the wrong size"));
                }
                if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(config_error("losses", format!("adaptive loss {v} is outside [0, 1]")));
                }
                row
            }
        };
        for e in dag.dummy_edges() {
            row[e] = 0.0;
        }
        Ok(row)
    }

    /// Full `n × |E|` matrix of an oblivious model.
    pub fn draw_matrix(&self, dag: &Dag, n: u64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, HarnessError> {
        assert!(self.is_oblivious(), "adaptive losses depend on the learner");
        (1..=n).map(|t| self.losses(dag, t, &[], rng)).collect()
    }
}

/// Number of stages if `dag` is a parallel chain with the standard labeling.
pub fn chain_stages(dag: &Dag) -> Option<usize> {
    let k = dag.vertex_count().checked_sub(1)?;
    (k >= 1 && dag.edges() == Dag::parallel_chain(k).edges()).then_some(k)
}

fn chain_bands(dag: &Dag, upper: (f64, f64), lower: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let k = chain_stages(dag).ok_or_else(|| {
        HarnessError::GraphShapeMismatch(format!("expected a parallel chain, got {}", dag.descriptor()))
    })?;
    let lo = (0..2 * k).map(|e| if e % 2 == 0 { upper.0 } else { lower.0 }).collect();
    let hi = (0..2 * k).map(|e| if e % 2 == 0 { upper.1 } else { lower.1 }).collect();
    Ok((lo, hi))
}

/// Uniform `[0, 1]` losses on upper edges and uniform `[0.32, 1]` on lower
/// edges of a parallel chain.
pub fn paper_sim_model(dag: &Dag) -> Result<LossModel, HarnessError> {
    let (lo, hi) = chain_bands(dag, (0.0, 1.0), (0.32, 1.0))?;
    Ok(LossModel::Bands { lo, hi })
}

/// The same bands with the favourable side swapped after rounds `n/3` and
/// `2n/3`.
pub fn swapped_paper_sim_model(dag: &Dag, n: u64) -> Result<LossModel, HarnessError> {
    let (lo, hi) = chain_bands(dag, (0.0, 1.0), (0.32, 1.0))?;
    let (lo_s, hi_s) = chain_bands(dag, (0.32, 1.0), (0.0, 1.0))?;
    Ok(LossModel::Phased(vec![
        Phase {
            start: 1,
            lo: lo.clone(),
            hi: hi.clone(),
        },
        Phase {
            start: n / 3 + 1,
            lo: lo_s,
            hi: hi_s,
        },
        Phase {
            start: 2 * n / 3 + 1,
            lo,
            hi,
        },
    ]))
}

/// `n` rounds of [`paper_sim_model`] losses.
pub fn gen_losses_paper_sim(dag: &Dag, n: u64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, HarnessError> {
    paper_sim_model(dag)?.draw_matrix(dag, n, rng)
}

/// Best fixed path for cumulative per-edge losses; ties go to the
/// lexicographically smallest vertex sequence.
pub fn best_fixed_path_loss(dag: &Dag, cumulative: &[f64]) -> (f64, Path) {
    let (value, edges) =
        extremal_path(dag, dag.source(), dag.sink(), cumulative, Objective::Minimize).expect("sink reachable");
    (value, Path::from_edges_unchecked(dag.edge_count(), edges))
}

/// Which offline reference the regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    BestFixedPath,
    Partition { switches: usize },
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BestFixedPath => f.write_str("best-fixed-path"),
            Self::Partition { switches } => write!(f, "best-partition(m={switches})"),
        }
    }
}

/// Comparator value for every prefix of the horizon.
pub fn comparator_trace(dag: &Dag, losses: &[Vec<f64>], comparator: Comparator) -> Vec<f64> {
    match comparator {
        Comparator::BestFixedPath => {
            let mut cumulative = vec![0.0; dag.edge_count()];
            let mut dist = vec![0.0; dag.vertex_count()];
            losses
                .iter()
                .map(|row| {
                    cumulative.iter_mut().zip(row).for_each(|(c, l)| *c += l);
                    shortest_value(dag, &cumulative, &mut dist)
                })
                .collect()
        }
        Comparator::Partition { switches } => solve_partition(dag, losses, switches).prefix_values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp3Params {
    pub eta: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// `β = sqrt(ln(N/δ)/(nN))`, `η = sqrt(ln N/(4nN))`, `γ = 2ηN`: the edge-bandit
/// tuning on a graph of `N` parallel edges with every edge its own cover path.
pub fn exp3_params(n: u64, delta: f64, arms: usize) -> Result<Exp3Params, ParamError> {
    let (nf, a) = (n as f64, arms as f64);
    if arms < 2 {
        return Err(ParamError::SinglePath);
    }
    let gamma = 2.0 * (a.ln() / (4.0 * nf * a)).sqrt() * a;
    if gamma >= 0.5 {
        return Err(ParamError::HorizonTooShort {
            condition: "4N ln N",
            required: 4.0 * a * a.ln(),
            horizon: n,
        });
    }
    Ok(Exp3Params {
        eta: (a.ln() / (4.0 * nf * a)).sqrt(),
        gamma,
        beta: ((a / delta).ln() / (nf * a)).sqrt().min(1.0),
    })
}

/// `(11K/2) sqrt(N ln(N/δ)/n) + K ln N/(2n)`.
pub fn exp3_regret_bound(n: u64, delta: f64, k: usize, arms: usize) -> f64 {
    let (nf, kf, a) = (n as f64, k as f64, arms as f64);
    5.5 * kf * (a * (a / delta).ln() / nf).sqrt() + kf * a.ln() / (2.0 * nf)
}

/// EXP3 with optimistic estimates over enumerated paths, observing only the
/// chosen path's total loss. Gains are `(K - ℓ)/K` with `K` the longest path
/// length.
#[derive(Debug, Clone)]
pub struct Exp3 {
    paths: Vec<Path>,
    k: f64,
    params: Exp3Params,
    log_w: Vec<f64>,
    probs: Vec<f64>,
}

impl Exp3 {
    pub fn new(dag: &Dag, params: Exp3Params) -> Result<Self, GraphError> {
        let paths = enumerate_paths(dag, DEFAULT_PATH_CAP)?;
        let n = paths.len();
        Ok(Self {
            paths,
            k: dag.longest_path_len() as f64,
            params,
            log_w: vec![0.0; n],
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn tuned(dag: &Dag, n: u64, delta: f64) -> Result<Self, HarnessError> {
        let arms = usize::try_from(dag.path_count()).unwrap_or(usize::MAX);
        let params = exp3_params(n, delta, arms)?;
        Ok(Self::new(dag, params)?)
    }

    pub fn params(&self) -> &Exp3Params {
        &self.params
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if acc > x {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn update(&mut self, arm: usize, path_loss: f64) -> Result<(), FeedbackError> {
        let max = self.paths[arm].len() as f64;
        if !(0.0..=max).contains(&path_loss) {
            return Err(FeedbackError::PathLossOutOfRange { value: path_loss, max });
        }
        let x = (self.k - path_loss) / self.k;
        let Exp3Params { eta, gamma, beta } = self.params;
        for (i, (lw, p)) in self.log_w.iter_mut().zip(&self.probs).enumerate() {
            let hit = if i == arm { x } else { 0.0 };
            *lw += eta * (hit + beta) / p;
        }
        let total = log_sum_exp(&self.log_w);
        let uniform = 1.0 / self.paths.len() as f64;
        for (p, lw) in self.probs.iter_mut().zip(&self.log_w) {
            *p = (1.0 - gamma) * (lw - total).exp() + gamma * uniform;
        }
        Ok(())
    }
}

/// What a learner is allowed to observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackModel {
    /// Losses of every edge on the chosen path.
    EdgeLosses,
    /// Edge losses on queried rounds only.
    LabelEfficient,
    /// The chosen path's total loss.
    PathLoss,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Request {
    EdgeLosses,
    PathLoss,
    Nothing,
}

impl FeedbackModel {
    pub fn permits(self, request: Request) -> bool {
        matches!(
            (self, request),
            (Self::EdgeLosses, Request::EdgeLosses)
                | (Self::LabelEfficient, Request::EdgeLosses | Request::Nothing)
                | (Self::PathLoss, Request::PathLoss | Request::Nothing)
                | (Self::None, Request::Nothing)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feedback {
    EdgeLosses(Vec<(EdgeId, f64)>),
    PathLoss(f64),
    Nothing,
}

/// An online policy as seen by the engine. Paths are expressed on the
/// experiment's graph.
pub trait Learner {
    fn model(&self) -> FeedbackModel;
    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request);
    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError>;
}

/// Embeds the experiment graph into a uniform-length graph when needed.
#[derive(Debug, Clone)]
struct Embedding {
    original_edges: usize,
    pad: Option<PaddedDag>,
}

impl Embedding {
    fn new(dag: &Dag) -> (Self, Dag) {
        let original_edges = dag.edge_count();
        if dag.is_uniform_length() {
            (
                Self {
                    original_edges,
                    pad: None,
                },
                dag.clone(),
            )
        } else {
            let pad = make_uniform_length(dag);
            let inner = pad.dag.clone();
            (
                Self {
                    original_edges,
                    pad: Some(pad),
                },
                inner,
            )
        }
    }

    fn to_original(&self, path: &Path) -> Path {
        match &self.pad {
            None => path.clone(),
            Some(pad) => Path::from_edges_unchecked(self.original_edges, pad.original_edges(path)),
        }
    }

    fn pad_feedback(&self, inner: &Path, losses: Vec<(EdgeId, f64)>) -> Vec<(EdgeId, f64)> {
        let mut out = losses;
        out.extend(inner.edges().iter().filter(|&&e| e >= self.original_edges).map(|&e| (e, 0.0)));
        out
    }
}

struct EdgeLearner {
    bandit: EdgeBandit,
    embed: Embedding,
    pending: Option<Path>,
}

impl Learner for EdgeLearner {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::EdgeLosses
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        let (path, _) = self.bandit.choose_path(rng);
        let out = self.embed.to_original(&path);
        self.pending = Some(path);
        (out, Request::EdgeLosses)
    }

    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError> {
        let path = self.pending.take().expect("choose before observe");
        let Feedback::EdgeLosses(l) = feedback else {
            return Err(FeedbackError::LossesMissingOnQuery);
        };
        self.bandit.update(&path, &self.embed.pad_feedback(&path, l))
    }
}

struct LabelEfficientLearner {
    bandit: LabelEfficientBandit,
    embed: Embedding,
    pending: Option<(Path, bool)>,
}

impl Learner for LabelEfficientLearner {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::LabelEfficient
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        let (path, _) = self.bandit.choose_path(rng);
        let queried = self.bandit.draw_query(rng);
        let out = self.embed.to_original(&path);
        self.pending = Some((path, queried));
        (out, if queried { Request::EdgeLosses } else { Request::Nothing })
    }

    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError> {
        let (path, queried) = self.pending.take().expect("choose before observe");
        match feedback {
            Feedback::EdgeLosses(l) => {
                let l = self.embed.pad_feedback(&path, l);
                self.bandit.update(&path, queried, Some(&l))
            }
            _ => self.bandit.update(&path, queried, None),
        }
    }
}

struct TrackingLearner {
    bandit: TrackingBandit,
    embed: Embedding,
    pending: Option<Path>,
}

impl Learner for TrackingLearner {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::EdgeLosses
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        let (path, _) = self.bandit.choose_path(rng);
        let out = self.embed.to_original(&path);
        self.pending = Some(path);
        (out, Request::EdgeLosses)
    }

    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError> {
        let path = self.pending.take().expect("choose before observe");
        let Feedback::EdgeLosses(l) = feedback else {
            return Err(FeedbackError::LossesMissingOnQuery);
        };
        self.bandit.update(&path, &self.embed.pad_feedback(&path, l))
    }
}

struct RestrictedLearner {
    bandit: RestrictedBandit,
    pending: Option<(Path, bool)>,
}

impl Learner for RestrictedLearner {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::PathLoss
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        let (path, explored) = self.bandit.choose_path(rng);
        self.pending = Some((path.clone(), explored));
        (path, Request::PathLoss)
    }

    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError> {
        let (path, explored) = self.pending.take().expect("choose before observe");
        let Feedback::PathLoss(loss) = feedback else {
            return Err(FeedbackError::LossesMissingOnQuery);
        };
        self.bandit.update(explored, &path, loss)
    }
}

struct Exp3Learner {
    exp3: Exp3,
    pending: Option<usize>,
}

impl Learner for Exp3Learner {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::PathLoss
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        let arm = self.exp3.choose(rng);
        self.pending = Some(arm);
        (self.exp3.paths()[arm].clone(), Request::PathLoss)
    }

    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError> {
        let arm = self.pending.take().expect("choose before observe");
        let Feedback::PathLoss(loss) = feedback else {
            return Err(FeedbackError::LossesMissingOnQuery);
        };
        self.exp3.update(arm, loss)
    }
}

/// Replays one path every round.
pub struct FixedPathPolicy {
    pub path: Path,
}

impl Learner for FixedPathPolicy {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::None
    }

    fn choose(&mut self, _rng: &mut ChaCha8Rng) -> (Path, Request) {
        (self.path.clone(), Request::Nothing)
    }

    fn observe(&mut self, _feedback: Feedback) -> Result<(), FeedbackError> {
        Ok(())
    }
}

/// Draws a path uniformly at random every round.
pub struct UniformPolicy {
    dag: Dag,
    zeros: Vec<f64>,
    log_backward: Vec<f64>,
}

impl UniformPolicy {
    pub fn new(dag: &Dag) -> Self {
        let zeros = vec![0.0; dag.edge_count()];
        let log_backward = backward_aggregate(dag, &zeros);
        Self {
            dag: dag.clone(),
            zeros,
            log_backward,
        }
    }
}

impl Learner for UniformPolicy {
    fn model(&self) -> FeedbackModel {
        FeedbackModel::None
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        (sample_path(&self.dag, &self.zeros, &self.log_backward, rng), Request::Nothing)
    }

    fn observe(&mut self, _feedback: Feedback) -> Result<(), FeedbackError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryRate {
    Epsilon(f64),
    Budget(f64),
}

/// An algorithm to run, tuned from the horizon and confidence.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgoSpec {
    Edge,
    LabelEfficient(QueryRate),
    Tracking { switches: usize },
    Restricted { spanner_c: f64 },
    Exp3,
    /// Path index in [`enumerate_paths`] order.
    Fixed(usize),
    Uniform,
}

impl AlgoSpec {
    pub fn id(&self) -> String {
        match self {
            Self::Edge => "edge".into(),
            Self::LabelEfficient(_) => "le".into(),
            Self::Tracking { .. } => "track".into(),
            Self::Restricted { .. } => "restricted".into(),
            Self::Exp3 => "exp3".into(),
            Self::Fixed(i) => format!("fixed:{i}"),
            Self::Uniform => "uniform".into(),
        }
    }
}

/// Tuned parameters and bound information recorded for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSetup {
    pub params: Value,
    /// Normalized regret bound and the comparator it refers to.
    pub bound: Option<(f64, Comparator)>,
    /// Theorem preconditions that the tuned setting does not meet.
    pub violations: Vec<String>,
}

/// Builds a fresh learner for `spec` on `dag` together with its setup record.
pub fn build_learner(
    spec: &AlgoSpec,
    dag: &Dag,
    n: u64,
    delta: f64,
) -> Result<(Box<dyn Learner>, AlgoSetup), HarnessError> {
    let fixed = Comparator::BestFixedPath;
    match spec {
        AlgoSpec::Edge => {
            let (embed, inner) = Embedding::new(dag);
            let bandit = EdgeBandit::tuned(inner, n, delta)?;
            let stats = bandit.stats();
            let p = *bandit.params();
            let setup = AlgoSetup {
                params: json!({"eta": p.eta, "gamma": p.gamma, "beta": p.beta,
                    "K": stats.k, "edges": stats.edge_count, "cover_size": stats.cover_size,
                    "padded": embed.pad.is_some()}),
                bound: Some((regret_bound(n, delta, &stats)?, fixed)),
                violations: Vec::new(),
            };
            Ok((
                Box::new(EdgeLearner {
                    bandit,
                    embed,
                    pending: None,
                }),
                setup,
            ))
        }
        AlgoSpec::LabelEfficient(rate) => {
            let epsilon = match *rate {
                QueryRate::Epsilon(e) => e,
                QueryRate::Budget(m) => epsilon_from_budget(m, n, delta)?,
            };
            let (embed, inner) = Embedding::new(dag);
            let bandit = LabelEfficientBandit::tuned(inner, n, delta, epsilon)?;
            let stats = bandit.bandit().stats();
            let p = *bandit.bandit().params();
            let setup = AlgoSetup {
                params: json!({"eta": p.eta, "gamma": p.gamma, "beta": p.beta, "epsilon": epsilon,
                    "K": stats.k, "edges": stats.edge_count, "cover_size": stats.cover_size,
                    "padded": embed.pad.is_some()}),
                bound: Some((le_regret_bound(n, delta, epsilon, &stats), fixed)),
                violations: Vec::new(),
            };
            Ok((
                Box::new(LabelEfficientLearner {
                    bandit,
                    embed,
                    pending: None,
                }),
                setup,
            ))
        }
        AlgoSpec::Tracking { switches } => {
            let (embed, inner) = Embedding::new(dag);
            let bandit = TrackingBandit::tuned(inner, n, *switches, delta)?;
            let stats = crate::edge_bandit::GraphStats::of(bandit.dag(), bandit.cover());
            let p = *bandit.params();
            let setup = AlgoSetup {
                params: json!({"eta": p.base.eta, "gamma": p.base.gamma, "beta": p.base.beta,
                    "alpha": p.alpha, "switches": p.switches, "K": stats.k, "edges": stats.edge_count,
                    "cover_size": stats.cover_size, "padded": embed.pad.is_some()}),
                bound: Some((
                    tracking_regret_bound(n, *switches, delta, &stats)?,
                    Comparator::Partition { switches: *switches },
                )),
                violations: Vec::new(),
            };
            Ok((
                Box::new(TrackingLearner {
                    bandit,
                    embed,
                    pending: None,
                }),
                setup,
            ))
        }
        AlgoSpec::Restricted { spanner_c } => {
            let oracle = EnumerationOracle::new(dag)?;
            let basis = spanner_search(find_basis(dag)?, &oracle, *spanner_c)?;
            let stats = RestrictedStats::of(dag, &basis);
            let mut violations = Vec::new();
            let params = match restricted_derive_params(n, delta, &stats) {
                Ok(p) => p,
                Err(e @ (ParamError::EpsilonTooLarge { .. } | ParamError::HorizonTooShort { .. })) => {
                    violations.push(e.to_string());
                    let p = restricted_params_unchecked(n, delta, &stats);
                    let need = stats.min_horizon(delta, p.epsilon);
                    if matches!(e, ParamError::EpsilonTooLarge { .. }) && (n as f64) < need {
                        violations.push(format!("(8b/eps^2) ln(4bN/delta) requires n >= {need:.1}"));
                    }
                    p
                }
                Err(e) => return Err(e.into()),
            };
            let rows: Vec<String> = basis.rows.iter().map(|r| r.to_string()).collect();
            let setup = AlgoSetup {
                params: json!({"epsilon": params.epsilon, "eta": params.eta, "spanner_c": spanner_c,
                    "basis": rows, "b": stats.b, "K": stats.k,
                    "spanner_constant": basis.spanner_constant(oracle.paths())?}),
                bound: Some((restricted_regret_bound(n, delta, &stats) / n as f64, fixed)),
                violations,
            };
            let bandit = RestrictedBandit::new(dag.clone(), basis, params)?;
            Ok((
                Box::new(RestrictedLearner {
                    bandit,
                    pending: None,
                }),
                setup,
            ))
        }
        AlgoSpec::Exp3 => {
            let exp3 = Exp3::tuned(dag, n, delta)?;
            let p = *exp3.params();
            let arms = exp3.paths().len();
            let setup = AlgoSetup {
                params: json!({"eta": p.eta, "gamma": p.gamma, "beta": p.beta, "arms": arms}),
                bound: Some((exp3_regret_bound(n, delta, dag.longest_path_len(), arms), fixed)),
                violations: Vec::new(),
            };
            Ok((Box::new(Exp3Learner { exp3, pending: None }), setup))
        }
        AlgoSpec::Fixed(i) => {
            let paths = enumerate_paths(dag, DEFAULT_PATH_CAP)?;
            let path = paths.get(*i).cloned().ok_or_else(|| {
                config_error("algo", format!("fixed path id {i} out of range (graph has {} paths)", paths.len()))
            })?;
            let setup = AlgoSetup {
                params: json!({"path": path.to_string()}),
                bound: None,
                violations: Vec::new(),
            };
            Ok((Box::new(FixedPathPolicy { path }), setup))
        }
        AlgoSpec::Uniform => Ok((
            Box::new(UniformPolicy::new(dag)),
            AlgoSetup {
                params: json!({}),
                bound: None,
                violations: Vec::new(),
            },
        )),
    }
}

/// Whether a bound proved against `own` also holds against `measured`.
fn bound_applies(own: Comparator, measured: Comparator) -> bool {
    match (own, measured) {
        (_, Comparator::BestFixedPath) => true,
        (Comparator::Partition { switches: a }, Comparator::Partition { switches: b }) => b <= a,
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dag: Dag,
    pub losses: LossModel,
    pub algorithms: Vec<AlgoSpec>,
    pub comparator: Comparator,
    pub n: u64,
    pub delta: f64,
    pub runs: usize,
    pub seed: u64,
    /// Add a series per fixed path (oblivious losses only).
    pub fixed_path_series: bool,
    /// Keep per-run traces of the algorithms in the result.
    pub keep_runs: bool,
}

impl ExperimentConfig {
    pub fn new(dag: Dag, losses: LossModel, algorithms: Vec<AlgoSpec>, n: u64) -> Self {
        Self {
            dag,
            losses,
            algorithms,
            comparator: Comparator::BestFixedPath,
            n,
            delta: 0.001,
            runs: 1,
            seed: 0,
            fixed_path_series: false,
            keep_runs: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n < 2 {
            return Err(config_error("n", "horizon must be at least 2"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_error("delta", format!("{} is not in (0, 1)", self.delta)));
        }
        if self.runs == 0 {
            return Err(config_error("runs", "need at least one run"));
        }
        if self.algorithms.is_empty() {
            return Err(config_error("algo", "no algorithms given"));
        }
        if self.algorithms.len() > 63 {
            return Err(config_error("algo", "at most 63 algorithms per experiment"));
        }
        if let Comparator::Partition { switches } = self.comparator {
            if switches as u64 >= self.n {
                return Err(config_error("track", "switch count must be below the horizon"));
            }
        }
        self.losses.validate(&self.dag, self.n)
    }
}

/// One run of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub series: String,
    pub run: usize,
    pub cumulative_loss: Vec<f64>,
    pub comparator_loss: Vec<f64>,
}

impl RegretTrace {
    /// `(L̂_t - L*_t) / t` per round.
    pub fn normalized_regret(&self) -> Vec<f64> {
        self.cumulative_loss
            .iter()
            .zip(&self.comparator_loss)
            .enumerate()
            .map(|(i, (a, c))| (a - c) / (i + 1) as f64)
            .collect()
    }

    pub fn final_regret(&self) -> f64 {
        let n = self.cumulative_loss.len();
        (self.cumulative_loss[n - 1] - self.comparator_loss[n - 1]) / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Algorithm,
    FixedPath,
}

/// Per-round means across runs plus per-run final values for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub series: String,
    pub kind: SeriesKind,
    pub mean_cumulative_loss: Vec<f64>,
    pub mean_comparator_loss: Vec<f64>,
    pub mean_normalized_regret: Vec<f64>,
    pub final_regrets: Vec<f64>,
    pub setup: Option<AlgoSetup>,
    /// Runs whose final normalized regret exceeded the applicable bound.
    pub bound_violations: Option<usize>,
}

impl SeriesSummary {
    fn new(series: String, kind: SeriesKind, n: usize) -> Self {
        Self {
            series,
            kind,
            mean_cumulative_loss: vec![0.0; n],
            mean_comparator_loss: vec![0.0; n],
            mean_normalized_regret: vec![0.0; n],
            final_regrets: Vec::new(),
            setup: None,
            bound_violations: None,
        }
    }

    fn accumulate(&mut self, trace: &RegretTrace) {
        for (i, ((m, a), (c, r))) in self
            .mean_cumulative_loss
            .iter_mut()
            .zip(&trace.cumulative_loss)
            .zip(self.mean_comparator_loss.iter_mut().zip(&trace.comparator_loss))
            .enumerate()
        {
            *m += a;
            *c += r;
            self.mean_normalized_regret[i] += (a - r) / (i + 1) as f64;
        }
        self.final_regrets.push(trace.final_regret());
    }

    fn finish(&mut self, runs: usize) {
        let r = runs as f64;
        for v in [
            &mut self.mean_cumulative_loss,
            &mut self.mean_comparator_loss,
            &mut self.mean_normalized_regret,
        ] {
            v.iter_mut().for_each(|x| *x /= r);
        }
    }

    pub fn mean_final_regret(&self) -> f64 {
        *self.mean_normalized_regret.last().expect("nonempty horizon")
    }

    /// Mean normalized regret over rounds `from..=to` (1-based).
    pub fn window_mean(&self, from: usize, to: usize) -> f64 {
        let w = &self.mean_normalized_regret[from - 1..to];
        w.iter().sum::<f64>() / w.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub metadata: Value,
    pub series: Vec<SeriesSummary>,
    pub runs: Vec<RegretTrace>,
}

impl ExperimentResult {
    pub fn series(&self, name: &str) -> Option<&SeriesSummary> {
        self.series.iter().find(|s| s.series == name)
    }
}

/// Plays `learner` for `n` rounds. Returns the per-round cumulative loss and
/// the loss rows it faced.
#[allow(clippy::too_many_arguments)]
pub fn play(
    learner: &mut dyn Learner,
    id: &str,
    dag: &Dag,
    model: &LossModel,
    oblivious_rows: Option<&[Vec<f64>]>,
    n: u64,
    learner_rng: &mut ChaCha8Rng,
    loss_rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), HarnessError> {
    let mut cumulative = Vec::with_capacity(n as usize);
    let mut faced = Vec::new();
    let mut history: Vec<Path> = Vec::new();
    let mut total = 0.0;
    for t in 1..=n {
        let (path, request) = learner.choose(learner_rng);
        if !learner.model().permits(request) {
            return Err(HarnessError::FirewallViolation {
                algo: id.to_string(),
                request,
            });
        }
        let owned;
        let row: &[f64] = match oblivious_rows {
            Some(rows) => &rows[(t - 1) as usize],
            None => {
                owned = model.losses(dag, t, &history, loss_rng)?;
                &owned
            }
        };
        let loss = path.total(row);
        total += loss;
        cumulative.push(total);
        let feedback = match request {
            Request::EdgeLosses => Feedback::EdgeLosses(path.edges().iter().map(|&e| (e, row[e])).collect()),
            Request::PathLoss => Feedback::PathLoss(loss),
            Request::Nothing => Feedback::Nothing,
        };
        learner.observe(feedback)?;
        if oblivious_rows.is_none() {
            faced.push(row.to_vec());
            history.push(path);
        }
    }
    Ok((cumulative, faced))
}

/// Runs every algorithm of `config` for `config.runs` independent runs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let dag = &config.dag;
    let n = config.n as usize;
    let ids: Vec<String> = config.algorithms.iter().map(AlgoSpec::id).collect();
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(config_error("algo", format!("{id} listed twice")));
        }
    }
    let fixed_paths = if config.fixed_path_series && config.losses.is_oblivious() {
        enumerate_paths(dag, DEFAULT_PATH_CAP)?
    } else {
        Vec::new()
    };
    let mut series: Vec<SeriesSummary> = ids
        .iter()
        .map(|id| SeriesSummary::new(id.clone(), SeriesKind::Algorithm, n))
        .collect();
    series.extend(
        (0..fixed_paths.len()).map(|i| SeriesSummary::new(format!("path:{i}"), SeriesKind::FixedPath, n)),
    );
    let mut runs = Vec::new();

    for run in 0..config.runs {
        let mut loss_rng = run_rng(config.seed, run, 0);
        let shared = if config.losses.is_oblivious() {
            let rows = config.losses.draw_matrix(dag, config.n, &mut loss_rng)?;
            let comp = comparator_trace(dag, &rows, config.comparator);
            Some((rows, comp))
        } else {
            None
        };
        for (idx, spec) in config.algorithms.iter().enumerate() {
            let (mut learner, setup) = build_learner(spec, dag, config.n, config.delta)?;
            let mut rng = run_rng(config.seed, run, 1 + idx as u64);
            let mut adversary_rng = run_rng(config.seed, run, 0);
            let (cumulative, faced) = play(
                learner.as_mut(),
                &ids[idx],
                dag,
                &config.losses,
                shared.as_ref().map(|(rows, _)| rows.as_slice()),
                config.n,
                &mut rng,
                &mut adversary_rng,
            )?;
            let comparator_loss = match &shared {
                Some((_, comp)) => comp.clone(),
                None => comparator_trace(dag, &faced, config.comparator),
            };
            let trace = RegretTrace {
                series: ids[idx].clone(),
                run,
                cumulative_loss: cumulative,
                comparator_loss,
            };
            let s = &mut series[idx];
            s.accumulate(&trace);
            if let Some((bound, own)) = setup.bound {
                if bound_applies(own, config.comparator) {
                    let over = usize::from(trace.final_regret() > bound);
                    s.bound_violations = Some(s.bound_violations.unwrap_or(0) + over);
                }
            }
            s.setup.get_or_insert(setup);
            if config.keep_runs {
                runs.push(trace);
            }
        }
        if let Some((rows, comp)) = &shared {
            for (i, p) in fixed_paths.iter().enumerate() {
                let mut total = 0.0;
                let cumulative_loss = rows
                    .iter()
                    .map(|r| {
                        total += p.total(r);
                        total
                    })
                    .collect();
                let trace = RegretTrace {
                    series: format!("path:{i}"),
                    run,
                    cumulative_loss,
                    comparator_loss: comp.clone(),
                };
                series[ids.len() + i].accumulate(&trace);
                if config.keep_runs {
                    runs.push(trace);
                }
            }
        }
    }
    for s in &mut series {
        s.finish(config.runs);
    }
    let metadata = experiment_metadata(config, &series, &fixed_paths);
    Ok(ExperimentResult {
        metadata,
        series,
        runs,
    })
}

fn experiment_metadata(config: &ExperimentConfig, series: &[SeriesSummary], fixed: &[Path]) -> Value {
    let algos: Vec<Value> = series
        .iter()
        .filter(|s| s.kind == SeriesKind::Algorithm)
        .map(|s| {
            let setup = s.setup.as_ref().expect("algorithm series have a setup");
            json!({
                "id": s.series,
                "params": setup.params,
                "bound": setup.bound.map(|(b, _)| b),
                "bound_comparator": setup.bound.map(|(_, c)| c.to_string()),
                "bound_checked": s.bound_violations.is_some(),
                "bound_violations": s.bound_violations,
                "precondition_violations": setup.violations,
                "mean_final_regret": s.mean_final_regret(),
                "final_regrets": s.final_regrets,
            })
        })
        .collect();
    let fixed: Vec<Value> = fixed
        .iter()
        .zip(series.iter().filter(|s| s.kind == SeriesKind::FixedPath))
        .map(|(p, s)| json!({"id": s.series, "edges": p.to_string(), "mean_final_regret": s.mean_final_regret()}))
        .collect();
    json!({
        "graph": config.dag.descriptor(),
        "loss_model": config.losses.kind(),
        "comparator": config.comparator.to_string(),
        "n": config.n,
        "delta": config.delta,
        "runs": config.runs,
        "seed": config.seed,
        "stream_derivation": "ChaCha8(seed), stream = run * 64 + role; role 0 = losses, 1 + i = algorithm i",
        "algorithms": algos,
        "fixed_paths": fixed,
    })
}

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub metadata: PathBuf,
    pub plot: Option<PathBuf>,
    pub plotted_series: usize,
}

fn io_error(path: &FsPath, e: impl fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Writes `regret.csv` (per-round means per series), `metadata.json` and,
/// when `plot` is set, `regret.svg` into `dir`.
pub fn emit_outputs(result: &ExperimentResult, dir: &FsPath, plot: bool) -> Result<OutputFiles, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let csv = dir.join("regret.csv");
    let mut out = String::from("round,series,cumulative_loss,comparator_loss,normalized_regret\n");
    for s in &result.series {
        for (i, ((a, c), r)) in s
            .mean_cumulative_loss
            .iter()
            .zip(&s.mean_comparator_loss)
            .zip(&s.mean_normalized_regret)
            .enumerate()
        {
            out.push_str(&format!("{},{},{a},{c},{r}\n", i + 1, s.series));
        }
    }
    fs::File::create(&csv)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| io_error(&csv, e))?;

    let metadata = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&result.metadata).expect("metadata serializes");
    fs::write(&metadata, text + "\n").map_err(|e| io_error(&metadata, e))?;

    let (plot_path, plotted) = if plot {
        let p = dir.join("regret.svg");
        let count = render_plot(result, &p)?;
        (Some(p), count)
    } else {
        (None, 0)
    };
    Ok(OutputFiles {
        csv,
        metadata,
        plot: plot_path,
        plotted_series: plotted,
    })
}

fn render_plot(result: &ExperimentResult, path: &FsPath) -> Result<usize, HarnessError> {
    use plotters::prelude::*;

    let plot_err = |e: &dyn fmt::Display| HarnessError::Plot(e.to_string());
    let n = result.series.first().map_or(1, |s| s.mean_normalized_regret.len());
    let step = (n / 500).max(1);
    let points = |s: &SeriesSummary| -> Vec<(f64, f64)> {
        s.mean_normalized_regret
            .iter()
            .enumerate()
            .filter(|(i, _)| i % step == 0 || i + 1 == n)
            .map(|(i, &r)| ((i + 1) as f64, r))
            .collect()
    };
    let (lo, hi) = result
        .series
        .iter()
        .flat_map(|s| s.mean_normalized_regret.iter().skip(n / 100))
        .fold((0.0f64, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let hi = if hi > lo { hi * 1.05 } else { lo + 1.0 };

    let root = SVGBackend::new(path, (960, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Normalized regret", ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(1.0..n as f64, lo..hi)
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("round")
        .y_desc("normalized regret")
        .draw()
        .map_err(|e| plot_err(&e))?;

    let mut count = 0;
    for s in result.series.iter().filter(|s| s.kind == SeriesKind::FixedPath) {
        chart
            .draw_series(LineSeries::new(points(s), RGBColor(170, 170, 170).stroke_width(1)))
            .map_err(|e| plot_err(&e))?;
        count += 1;
    }
    let algos: Vec<&SeriesSummary> = result.series.iter().filter(|s| s.kind == SeriesKind::Algorithm).collect();
    for (i, s) in algos.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(points(s), color.stroke_width(2)))
            .map_err(|e| plot_err(&e))?
            .label(s.series.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        count += 1;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_bands_hold() {
        let dag = Dag::parallel_chain(5);
        let mut rng = run_rng(1, 0, 0);
        let rows = gen_losses_paper_sim(&dag, 10_000, &mut rng).unwrap();
        for row in &rows {
            for (e, &l) in row.iter().enumerate() {
                let lo = if e % 2 == 0 { 0.0 } else { 0.32 };
                assert!((lo..=1.0).contains(&l));
            }
        }
        let upper: f64 = rows.iter().map(|r| (0..5).map(|s| r[2 * s]).sum::<f64>()).sum::<f64>() / 1e4;
        let lower: f64 = rows.iter().map(|r| (0..5).map(|s| r[2 * s + 1]).sum::<f64>()).sum::<f64>() / 1e4;
        assert!((upper - 2.5).abs() < 0.05 && (lower - 3.3).abs() < 0.05);
        assert!(matches!(
            paper_sim_model(&Dag::diamond()),
            Err(HarnessError::GraphShapeMismatch(_))
        ));
    }

    #[test]
    fn best_fixed_path_examples() {
        let dag = Dag::diamond();
        let (v, p) = best_fixed_path_loss(&dag, &[0.0; 4]);
        assert_eq!((v, p.edges()), (0.0, &[0, 1][..]));
        let (v, p) = best_fixed_path_loss(&dag, &[1.0, 1.0, 3.0, 3.0]);
        assert_eq!((v, p.edges()), (2.0, &[0, 1][..]));
    }

    #[test]
    fn exp3_probabilities_sum_to_one() {
        let dag = Dag::parallel_chain(3);
        let mut exp3 = Exp3::tuned(&dag, 1000, 0.01).unwrap();
        let mut rng = run_rng(2, 0, 1);
        for _ in 0..50 {
            let arm = exp3.choose(&mut rng);
            exp3.update(arm, rng.random::<f64>() * 3.0).unwrap();
            assert!((exp3.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn firewall_table() {
        assert!(FeedbackModel::EdgeLosses.permits(Request::EdgeLosses));
        assert!(!FeedbackModel::EdgeLosses.permits(Request::PathLoss));
        assert!(!FeedbackModel::PathLoss.permits(Request::EdgeLosses));
        assert!(FeedbackModel::LabelEfficient.permits(Request::Nothing));
        assert!(!FeedbackModel::None.permits(Request::PathLoss));
    }

    #[test]
    fn swapped_model_phases() {
        let dag = Dag::parallel_chain(2);
        let LossModel::Phased(p) = swapped_paper_sim_model(&dag, 30).unwrap() else {
            panic!("phased");
        };
        assert_eq!(p.iter().map(|x| x.start).collect::<Vec<_>>(), vec![1, 11, 21]);
        assert_eq!(p[1].lo, vec![0.32, 0.0, 0.32, 0.0]);
    }
}
