//! Tracking the best switching path with share updates.
//!
//! The compound weight of a path mixes its exponential weight with a fraction
//! `α/N` of the total weight every round, so a path that performs well over a
//! recent interval regains mass quickly. The learner never stores per-path
//! weights. Instead it draws a segment start `τ_t` and then a path from
//! exponential weights restricted to the estimated gains of rounds
//! `τ_t..t-1`, which gives the same marginal law.
//!
//! With `P[r]` the prefix of scaled gains after `r` rounds, `Z(t', t-1)` the
//! path-weight total for the interval scores `P[t-1] - P[t'-1]`, and `W̄_r`
//! the compound total after round `r` (`W̄_0 = N`):
//!
//! ```text
//! P(τ_t = 1)  ∝ (1-α)^(t-1) Z(1, t-1)
//! P(τ_t = t') ∝ α (1-α)^(t-t') W̄_(t'-1) Z(t', t-1) / N    for 2 ≤ t' ≤ t
//! ```
//!
//! with `Z(t, t-1) = N`. The weights sum to `W̄_(t-1)`.

use rand::Rng;

use crate::dag::{
    build_cover_set, enumerate_paths, extremal_path, log_sum_exp, CoverSet, Dag, EdgeId, GraphError,
    Objective, Path,
};
use crate::edge_bandit::{chosen_losses, gain_estimates, require, BanditParams, GraphStats};
use crate::error::{check_unit, FeedbackError, ParamError};
use crate::weight_dp::{
    backward_aggregate, counters, cover_share, sample_path, sampled_path_probability, FlowAggregates,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingParams {
    pub base: BanditParams,
    pub alpha: f64,
    pub switches: usize,
}

/// `D = (m+1) ln N + m (1 + ln((n-1)/m))`, reduced to `ln N` when `m = 0`.
pub fn switching_complexity(n: u64, m: usize, ln_paths: f64) -> f64 {
    let mf = m as f64;
    if m == 0 {
        ln_paths
    } else {
        (mf + 1.0) * ln_paths + mf * (1.0 + ((n as f64 - 1.0) / mf).ln())
    }
}

fn check_inputs(n: u64, m: usize, delta: f64, stats: &GraphStats) -> Result<(), ParamError> {
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
    if m as u64 >= n.max(1) {
        return Err(ParamError::Invalid {
            name: "switches",
            value: m as f64,
            reason: "must be smaller than the horizon",
        });
    }
    let (k, e, c) = (stats.k as f64, stats.edge_count as f64, stats.cover_size as f64);
    let m1 = m as f64 + 1.0;
    require(
        "(K(m+1)/|E|) ln(|E|(m+1)/delta)",
        k * m1 / e * (e * m1 / delta).ln(),
        n,
    )?;
    require("4|C| D", 4.0 * c * switching_complexity(n, m, stats.ln_paths), n)
}

/// Tuned parameters for `m` switches:
/// `β = sqrt(K(m+1) ln(|E|(m+1)/δ) / (n|E|))`, `η = sqrt(D / (4nK²|C|))`,
/// `γ = 2ηK|C|`, `α = m/(n-1)`.
pub fn tracking_derive_params(
    n: u64,
    m: usize,
    delta: f64,
    stats: &GraphStats,
) -> Result<TrackingParams, ParamError> {
    check_inputs(n, m, delta, stats)?;
    let (nf, k, e, c) = (
        n as f64,
        stats.k as f64,
        stats.edge_count as f64,
        stats.cover_size as f64,
    );
    let m1 = m as f64 + 1.0;
    let d = switching_complexity(n, m, stats.ln_paths);
    let beta = (k * m1 * (e * m1 / delta).ln() / (nf * e)).sqrt();
    let eta = (d / (4.0 * nf * k * k * c)).sqrt();
    let gamma = 2.0 * eta * k * c;
    let alpha = if m == 0 { 0.0 } else { m as f64 / (nf - 1.0) };
    Ok(TrackingParams {
        base: BanditParams {
            eta,
            gamma,
            beta,
            horizon: n,
            delta,
        },
        alpha,
        switches: m,
    })
}

/// Normalized bound against the best `m`-partition under
/// [`tracking_derive_params`]:
/// `2 sqrt(nK) (sqrt(4K|C|D) + sqrt(|E|(m+1) ln(|E|(m+1)/δ))) / n`.
pub fn tracking_regret_bound(n: u64, m: usize, delta: f64, stats: &GraphStats) -> Result<f64, ParamError> {
    check_inputs(n, m, delta, stats)?;
    let (nf, k, e, c) = (
        n as f64,
        stats.k as f64,
        stats.edge_count as f64,
        stats.cover_size as f64,
    );
    let m1 = m as f64 + 1.0;
    let d = switching_complexity(n, m, stats.ln_paths);
    Ok(2.0 * (nf * k).sqrt() * ((4.0 * k * c * d).sqrt() + (e * m1 * (e * m1 / delta).ln()).sqrt()) / nf)
}

/// Prefix rows of scaled estimated gains; row `r` holds `η Σ_{s ≤ r} g'_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainHistory {
    edge_count: usize,
    flat: Vec<f64>,
}

impl GainHistory {
    pub fn new(edge_count: usize) -> Self {
        Self {
            edge_count,
            flat: vec![0.0; edge_count],
        }
    }

    /// Number of stored rows (rounds played plus one).
    pub fn len(&self) -> usize {
        self.flat.len() / self.edge_count.max(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.flat[r * self.edge_count..(r + 1) * self.edge_count]
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    /// Scores for the interval of rounds `from..=to` (1-based).
    pub fn interval(&self, from: usize, to: usize) -> Vec<f64> {
        let hi = self.row(to);
        let lo = self.row(from - 1);
        hi.iter().zip(lo).map(|(h, l)| h - l).collect()
    }

    fn push_increment(&mut self, g_prime: &[f64], eta: f64) {
        let start = self.flat.len() - self.edge_count;
        for (e, g) in g_prime.iter().enumerate() {
            let next = self.flat[start + e] + eta * g;
            self.flat.push(next);
        }
    }
}

/// Rows rescaled by their maximum so that interval weights can be formed by
/// one multiplication: `exp(P[hi] - P[lo]) = X[hi] · Y[lo] · exp(a[hi] - a[lo])`.
#[derive(Debug, Clone)]
struct ScaledRows {
    x: Vec<f64>,
    y: Vec<f64>,
    shift: Vec<f64>,
    safe: Vec<bool>,
}

const LINEAR_SPREAD_LIMIT: f64 = 600.0;

impl ScaledRows {
    fn new() -> Self {
        Self {
            x: Vec::new(),
            y: Vec::new(),
            shift: Vec::new(),
            safe: Vec::new(),
        }
    }

    /// Stores `row` permuted into `order`.
    fn push(&mut self, row: &[f64], order: &[usize]) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        self.x.extend(order.iter().map(|&e| (row[e] - max).exp()));
        self.y.extend(order.iter().map(|&e| (max - row[e]).exp()));
        self.shift.push(max);
        self.safe.push(max - min < LINEAR_SPREAD_LIMIT);
    }
}

/// Per-round quantities shared by sampling and estimation.
#[derive(Debug, Clone)]
struct Sweep {
    /// `ln` of the unnormalized weight of `τ = t'` before the `(1-α)` factor,
    /// indexed by `t' - 1` for `t' < t`.
    log_a: Vec<f64>,
    log_wbar: f64,
    /// Edge marginals of the share mixture, without exploration.
    q_mix: Vec<f64>,
}

const LANES: usize = 4;

#[derive(Debug, Clone, Default)]
struct Scratch {
    w: Vec<f64>,
    backward: Vec<f64>,
    forward: Vec<f64>,
    ratio: Vec<f64>,
    num: Vec<f64>,
    lane_w: Vec<[f64; LANES]>,
    lane_backward: Vec<[f64; LANES]>,
    lane_forward: Vec<[f64; LANES]>,
}

/// Edges sorted by tail, so one ascending pass fills forward sums and one
/// descending pass fills backward sums.
#[derive(Debug, Clone)]
pub(crate) struct Topology {
    order: Vec<usize>,
    /// `(tail, head)` per position of `order`.
    arcs: Vec<(usize, usize)>,
}

impl Topology {
    pub(crate) fn new(dag: &Dag) -> Self {
        let mut order: Vec<usize> = (0..dag.edge_count()).collect();
        order.sort_by_key(|&e| dag.edge(e).tail);
        let arcs = order.iter().map(|&e| (dag.edge(e).tail, dag.edge(e).head)).collect();
        Self { order, arcs }
    }
}

/// `k · ln(1-α)`, with `0 · ln 0 = 0`.
fn pow_log(k: usize, ln_keep: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_keep
    }
}

/// Learner state for the tracking bandit.
#[derive(Debug, Clone)]
pub struct TrackingBandit {
    dag: Dag,
    cover: CoverSet,
    params: TrackingParams,
    k: usize,
    ln_paths: f64,
    uniform_share: Vec<f64>,
    history: GainHistory,
    scaled: ScaledRows,
    log_wbar: Vec<f64>,
    current: Sweep,
    scratch: Scratch,
    topo: Topology,
}

impl TrackingBandit {
    /// Requires every source-to-sink path of `dag` to have the same length.
    pub fn new(dag: Dag, cover: CoverSet, params: TrackingParams) -> Result<Self, ParamError> {
        let (longest, shortest) = dag.path_length_range();
        if longest != shortest {
            return Err(ParamError::NotUniformLength { shortest, longest });
        }
        check_unit("alpha", params.alpha, false)?;
        let edge_count = dag.edge_count();
        let zeros = vec![0.0; edge_count];
        let agg = FlowAggregates::compute(&dag, &zeros);
        let uniform_share: Vec<f64> = (0..edge_count)
            .map(|e| {
                let edge = dag.edge(e);
                (agg.log_forward()[edge.tail] + agg.log_backward()[edge.head] - agg.log_total()).exp()
            })
            .collect();
        let history = GainHistory::new(edge_count);
        let topo = Topology::new(&dag);
        let mut scaled = ScaledRows::new();
        scaled.push(history.row(0), &topo.order);
        let ln_paths = dag.ln_path_count();
        let mut out = Self {
            k: longest,
            ln_paths,
            current: Sweep {
                log_a: Vec::new(),
                log_wbar: ln_paths,
                q_mix: uniform_share.clone(),
            },
            uniform_share,
            history,
            scaled,
            log_wbar: vec![ln_paths],
            scratch: Scratch {
                w: vec![0.0; edge_count],
                backward: vec![0.0; dag.vertex_count()],
                forward: vec![0.0; dag.vertex_count()],
                ratio: vec![0.0; edge_count],
                num: vec![0.0; edge_count],
                lane_w: vec![[0.0; LANES]; edge_count],
                lane_backward: vec![[0.0; LANES]; dag.vertex_count()],
                lane_forward: vec![[0.0; LANES]; dag.vertex_count()],
            },
            topo,
            dag,
            cover,
            params,
        };
        out.current = out.sweep();
        Ok(out)
    }

    /// Greedy cover set and tuned parameters for horizon `n` and `m` switches.
    pub fn tuned(dag: Dag, n: u64, m: usize, delta: f64) -> Result<Self, ParamError> {
        let cover = build_cover_set(&dag);
        let params = tracking_derive_params(n, m, delta, &GraphStats::of(&dag, &cover))?;
        Self::new(dag, cover, params)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cover(&self) -> &CoverSet {
        &self.cover
    }

    pub fn params(&self) -> &TrackingParams {
        &self.params
    }

    pub fn history(&self) -> &GainHistory {
        &self.history
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.history.len() as u64 - 1
    }

    /// `ln W̄_r` for `r = 0..=round()`.
    pub fn log_compound_totals(&self) -> &[f64] {
        &self.log_wbar
    }

    /// Law of `τ_t` for the upcoming round, indexed by `t' - 1`.
    pub fn tau_distribution(&self) -> Vec<f64> {
        let t = self.history.len();
        if t == 1 {
            return vec![1.0];
        }
        let alpha = self.params.alpha;
        let mut out: Vec<f64> = self
            .current
            .log_a
            .iter()
            .map(|&la| (1.0 - alpha) * (la - self.current.log_wbar).exp())
            .collect();
        out.push(alpha);
        out
    }

    /// Exploration coin, then `τ_t`, then a path from exponential weights on
    /// the interval `τ_t..t-1`. The flag is `true` on exploration rounds.
    pub fn choose_path<R: Rng + ?Sized>(&self, rng: &mut R) -> (Path, bool) {
        let coin: f64 = rng.random();
        if coin < self.params.base.gamma {
            let i = rng.random_range(0..self.cover.len());
            return (self.cover.paths[i].clone(), true);
        }
        let t = self.history.len();
        let tau = if t == 1 || self.params.alpha == 0.0 {
            1
        } else {
            let law = self.tau_distribution();
            let x: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = t;
            for (i, p) in law.iter().enumerate() {
                acc += p;
                if acc > x {
                    pick = i + 1;
                    break;
                }
            }
            pick
        };
        let scores = self.interval_scores(tau);
        let log_b = backward_aggregate(&self.dag, &scores);
        (sample_path(&self.dag, &scores, &log_b, rng), false)
    }

    /// Scores for segment start `tau` in the upcoming round (all zero when
    /// `tau` is the upcoming round itself).
    fn interval_scores(&self, tau: usize) -> Vec<f64> {
        let t = self.history.len();
        if tau == t {
            vec![0.0; self.dag.edge_count()]
        } else {
            self.history.interval(tau, t - 1)
        }
    }

    /// Exact probability that [`TrackingBandit::choose_path`] returns each of
    /// `paths`.
    pub fn path_law(&self, paths: &[Path]) -> Vec<f64> {
        let gamma = self.params.base.gamma;
        let tau_law = self.tau_distribution();
        let mut out: Vec<f64> = paths
            .iter()
            .map(|p| {
                if self.cover.contains(p) {
                    gamma / self.cover.len() as f64
                } else {
                    0.0
                }
            })
            .collect();
        for (i, &pt) in tau_law.iter().enumerate() {
            if pt == 0.0 {
                continue;
            }
            let scores = self.interval_scores(i + 1);
            let log_b = backward_aggregate(&self.dag, &scores);
            for (o, p) in out.iter_mut().zip(paths) {
                *o += (1.0 - gamma) * pt * sampled_path_probability(&self.dag, &scores, &log_b, p);
            }
        }
        out
    }

    /// `q_e` for the upcoming round: share-mixture marginals plus exploration.
    pub fn edge_marginals(&self) -> Vec<f64> {
        let gamma = self.params.base.gamma;
        self.current
            .q_mix
            .iter()
            .enumerate()
            .map(|(e, &q)| (1.0 - gamma) * q + gamma * cover_share(&self.cover, e))
            .collect()
    }

    pub fn gain_estimates(&self, chosen: &Path, losses: &[(EdgeId, f64)]) -> Result<Vec<f64>, FeedbackError> {
        let by_edge = chosen_losses(self.dag.edge_count(), chosen, losses)?;
        Ok(gain_estimates(&self.edge_marginals(), self.params.base.beta, &by_edge))
    }

    pub fn update(&mut self, chosen: &Path, losses: &[(EdgeId, f64)]) -> Result<(), FeedbackError> {
        let g = self.gain_estimates(chosen, losses)?;
        self.apply_gains(&g);
        Ok(())
    }

    /// Advances one round with externally supplied estimates `g'`.
    pub fn apply_gains(&mut self, g_prime: &[f64]) {
        assert_eq!(g_prime.len(), self.dag.edge_count());
        self.history.push_increment(g_prime, self.params.base.eta);
        self.scaled.push(self.history.last(), &self.topo.order);
        self.current = self.sweep();
        self.log_wbar.push(self.current.log_wbar);
    }

    /// Computes the `τ` weights, `W̄_(t-1)` and the mixture marginals for the
    /// upcoming round `t` in one pass over segment starts.
    fn sweep(&mut self) -> Sweep {
        let t = self.history.len();
        let edge_count = self.dag.edge_count();
        if t == 1 {
            return Sweep {
                log_a: Vec::new(),
                log_wbar: self.ln_paths,
                q_mix: self.uniform_share.clone(),
            };
        }
        let alpha = self.params.alpha;
        let ln_keep = (1.0 - alpha).ln();
        let ln_alpha = alpha.ln();
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.num.iter_mut().for_each(|x| *x = 0.0);
        let mut log_a = Vec::with_capacity(t - 1);
        let mut run_max = f64::NEG_INFINITY;
        let mut total = 0.0;
        let hi = t - 1;
        let log_prefix = |tp: usize| {
            let log_c = if tp == 1 {
                0.0
            } else {
                ln_alpha + self.log_wbar[tp - 1] - self.ln_paths
            };
            pow_log(t - 1 - tp, ln_keep) + log_c
        };
        let add = |la: f64, scratch: &mut Scratch, run_max: &mut f64, total: &mut f64| -> f64 {
            if la > *run_max {
                let rescale = (*run_max - la).exp();
                *total *= rescale;
                scratch.num.iter_mut().for_each(|x| *x *= rescale);
                *run_max = la;
            }
            let f = (la - *run_max).exp();
            *total += f;
            f
        };
        let mut tp = 1;
        while tp < t {
            let lanes = (t - tp).min(LANES);
            let batch = if lanes == LANES && self.scaled.safe[hi] {
                self.lane_flow(hi, tp - 1, &mut scratch)
            } else {
                [None; LANES]
            };
            for (l, log_z) in batch.iter().enumerate().take(lanes) {
                let start = tp + l;
                let prefix = log_prefix(start);
                if prefix == f64::NEG_INFINITY {
                    log_a.push(f64::NEG_INFINITY);
                    continue;
                }
                match log_z {
                    Some(log_z) => {
                        let la = prefix + log_z;
                        log_a.push(la);
                        let f = add(la, &mut scratch, &mut run_max, &mut total);
                        let Scratch {
                            lane_w,
                            lane_backward,
                            lane_forward,
                            num,
                            ..
                        } = &mut scratch;
                        let coef = f / lane_backward[self.dag.source()][l];
                        for ((acc, we), &(tail, head)) in num.iter_mut().zip(lane_w.iter()).zip(&self.topo.arcs) {
                            *acc += coef * lane_forward[tail][l] * we[l] * lane_backward[head][l];
                        }
                    }
                    None => {
                        let (log_z, linear) = self.interval_flow(hi, start - 1, &mut scratch);
                        let la = prefix + log_z;
                        log_a.push(la);
                        let f = add(la, &mut scratch, &mut run_max, &mut total);
                        if linear {
                            let Scratch {
                                w, backward, forward, num, ..
                            } = &mut scratch;
                            let coef = f / backward[self.dag.source()];
                            for ((acc, we), &(tail, head)) in num.iter_mut().zip(w.iter()).zip(&self.topo.arcs) {
                                *acc += coef * forward[tail] * we * backward[head];
                            }
                        } else {
                            for (acc, &e) in scratch.num.iter_mut().zip(&self.topo.order) {
                                *acc += f * scratch.ratio[e];
                            }
                        }
                    }
                }
            }
            tp += lanes;
        }
        let log_wbar = run_max + total.ln();
        let mut q_mix = vec![0.0; edge_count];
        for (&e, num) in self.topo.order.iter().zip(&scratch.num) {
            q_mix[e] = (1.0 - alpha) * num / total + alpha * self.uniform_share[e];
        }
        self.scratch = scratch;
        Sweep {
            log_a,
            log_wbar,
            q_mix,
        }
    }

    /// Log of the total weight of paths under scores `P[hi] - P[lo]`, and
    /// whether the linear fast path was taken. On the fast path `scratch`
    /// holds the edge weights (in topological edge order) and flow sums;
    /// otherwise `scratch.ratio` holds the edge marginals.
    fn interval_flow(&self, hi: usize, lo: usize, s: &mut Scratch) -> (f64, bool) {
        if self.scaled.safe[hi] && self.scaled.safe[lo] {
            if let Some(log_z) = self.interval_flow_linear(hi, lo, s) {
                return (log_z, true);
            }
        }
        let scores = self.history.interval(lo + 1, hi);
        let agg = FlowAggregates::compute(&self.dag, &scores);
        for ((ratio, edge), score) in s.ratio.iter_mut().zip(self.dag.edges()).zip(&scores) {
            *ratio = (agg.log_forward()[edge.tail] + score + agg.log_backward()[edge.head] - agg.log_total()).exp();
        }
        counters::add(self.dag.edge_count());
        (agg.log_total(), false)
    }

    /// Linear flows for the `LANES` lower rows starting at `lo`, side by side.
    /// A lane is `None` when its row is unsafe or its flow leaves the normal
    /// range.
    fn lane_flow(&self, hi: usize, lo: usize, s: &mut Scratch) -> [Option<f64>; LANES] {
        let edge_count = self.dag.edge_count();
        let xs = &self.scaled.x[hi * edge_count..(hi + 1) * edge_count];
        let ys = &self.scaled.y[lo * edge_count..(lo + LANES) * edge_count];
        for (i, (w, x)) in s.lane_w.iter_mut().zip(xs).enumerate() {
            for (l, wl) in w.iter_mut().enumerate() {
                *wl = x * ys[l * edge_count + i];
            }
        }
        let (source, sink) = (self.dag.source(), self.dag.sink());
        let (backward, forward) = (&mut s.lane_backward, &mut s.lane_forward);
        backward.fill([0.0; LANES]);
        backward[sink] = [1.0; LANES];
        for (w, &(tail, head)) in s.lane_w.iter().zip(&self.topo.arcs).rev() {
            let b = backward[head];
            for l in 0..LANES {
                backward[tail][l] += w[l] * b[l];
            }
        }
        forward.fill([0.0; LANES]);
        forward[source] = [1.0; LANES];
        for (w, &(tail, head)) in s.lane_w.iter().zip(&self.topo.arcs) {
            let f = forward[tail];
            for l in 0..LANES {
                forward[head][l] += f[l] * w[l];
            }
        }
        counters::add(3 * LANES * edge_count);
        std::array::from_fn(|l| {
            let (z, zf) = (backward[source][l], forward[sink][l]);
            (self.scaled.safe[lo + l] && z.is_normal() && zf.is_normal())
                .then(|| z.ln() + self.k as f64 * (self.scaled.shift[hi] - self.scaled.shift[lo + l]))
        })
    }

    fn interval_flow_linear(&self, hi: usize, lo: usize, s: &mut Scratch) -> Option<f64> {
        let edge_count = self.dag.edge_count();
        let xs = &self.scaled.x[hi * edge_count..(hi + 1) * edge_count];
        let ys = &self.scaled.y[lo * edge_count..(lo + 1) * edge_count];
        for ((w, x), y) in s.w.iter_mut().zip(xs).zip(ys) {
            *w = x * y;
        }
        let arcs = &self.topo.arcs;
        let (source, sink) = (self.dag.source(), self.dag.sink());
        let (backward, forward) = (&mut s.backward, &mut s.forward);
        backward.fill(0.0);
        backward[sink] = 1.0;
        for (w, &(tail, head)) in s.w.iter().zip(arcs).rev() {
            backward[tail] += w * backward[head];
        }
        forward.fill(0.0);
        forward[source] = 1.0;
        for (w, &(tail, head)) in s.w.iter().zip(arcs) {
            forward[head] += forward[tail] * w;
        }
        counters::add(3 * edge_count);
        let z = s.backward[source];
        if !z.is_normal() || !s.forward[sink].is_normal() {
            return None;
        }
        Some(z.ln() + self.k as f64 * (self.scaled.shift[hi] - self.scaled.shift[lo]))
    }
}

/// Per-round path laws of the compound-weight recursion maintained literally
/// over enumerated paths, given scripted estimates `g'` for each round.
///
/// Entry `t` is the law used in round `t + 1`, over paths in
/// [`enumerate_paths`] order; there are `estimates.len() + 1` entries.
pub fn direct_compound_oracle(
    dag: &Dag,
    cover: &CoverSet,
    params: &TrackingParams,
    estimates: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, GraphError> {
    let paths = enumerate_paths(dag, 1024)?;
    let n_paths = paths.len() as f64;
    let (eta, gamma, alpha) = (params.base.eta, params.base.gamma, params.alpha);
    let in_cover: Vec<bool> = paths.iter().map(|p| cover.contains(p)).collect();
    let law = |log_w: &[f64]| -> Vec<f64> {
        let total = log_sum_exp(log_w);
        log_w
            .iter()
            .zip(&in_cover)
            .map(|(&lw, &c)| {
                let explore = if c { gamma / cover.len() as f64 } else { 0.0 };
                (1.0 - gamma) * (lw - total).exp() + explore
            })
            .collect()
    };
    let mut log_w = vec![0.0; paths.len()];
    let mut out = vec![law(&log_w)];
    for g in estimates {
        let log_v: Vec<f64> = log_w
            .iter()
            .zip(&paths)
            .map(|(&lw, p)| lw + eta * p.total(g))
            .collect();
        let log_total = log_sum_exp(&log_v);
        log_w = log_v
            .iter()
            .map(|&lv| {
                let keep = if alpha < 1.0 {
                    (1.0 - alpha).ln() + lv
                } else {
                    f64::NEG_INFINITY
                };
                let share = if alpha > 0.0 {
                    alpha.ln() + log_total - n_paths.ln()
                } else {
                    f64::NEG_INFINITY
                };
                log_sum_exp(&[keep, share])
            })
            .collect();
        out.push(law(&log_w));
    }
    Ok(out)
}

/// A sequence of paths with switch rounds: segment `j` starts at
/// `boundaries[j-1]` (segment 0 at round 1) and uses `paths[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub boundaries: Vec<usize>,
    pub paths: Vec<Path>,
}

impl Partition {
    pub fn switches(&self) -> usize {
        self.boundaries.len()
    }

    /// Path in force at round `t` (1-based).
    pub fn path_at(&self, t: usize) -> &Path {
        let seg = self.boundaries.iter().take_while(|&&b| b <= t).count();
        &self.paths[seg]
    }

    /// `Σ_t Σ_{e ∈ path_at(t)} losses[t-1][e]`.
    pub fn loss(&self, losses: &[Vec<f64>]) -> f64 {
        losses
            .iter()
            .enumerate()
            .map(|(i, row)| self.path_at(i + 1).total(row))
            .sum()
    }
}

/// Best partition with at most `m` switches, together with the best value
/// for every prefix of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSolution {
    pub value: f64,
    pub partition: Partition,
    /// `prefix_values[t-1]` is the optimum over rounds `1..=t`.
    pub prefix_values: Vec<f64>,
}

/// Minimum loss of a partition with at most `m` switches over the rounds of
/// `losses` (one row of per-edge losses per round).
///
/// Ties go to fewer switches, then to later switch rounds, then to the
/// lexicographically smallest segment paths.
pub fn best_partition_loss(dag: &Dag, losses: &[Vec<f64>], m: usize) -> (f64, Partition) {
    let sol = solve_partition(dag, losses, m);
    (sol.value, sol.partition)
}

pub fn solve_partition(dag: &Dag, losses: &[Vec<f64>], m: usize) -> PartitionSolution {
    let n = losses.len();
    let edge_count = dag.edge_count();
    assert!(n > 0, "need at least one round");
    let mut prefix = vec![0.0; (n + 1) * edge_count];
    for (t, row) in losses.iter().enumerate() {
        assert_eq!(row.len(), edge_count);
        for e in 0..edge_count {
            prefix[(t + 1) * edge_count + e] = prefix[t * edge_count + e] + row[e];
        }
    }
    // cost[j][t]: best loss over rounds 1..=t with at most j switches.
    let mut cost = vec![vec![0.0; n + 1]; m + 1];
    let mut arg: Vec<Vec<Option<usize>>> = vec![vec![None; n + 1]; m + 1];
    let mut sp = vec![0.0; n + 1];
    let mut dist = vec![0.0; dag.vertex_count()];
    let topo = Topology::new(dag);
    for t in 1..=n {
        let hi = &prefix[t * edge_count..(t + 1) * edge_count];
        for tp in 1..=t {
            let lo = &prefix[(tp - 1) * edge_count..tp * edge_count];
            sp[tp] = shortest_value_topo(&topo, dag.sink(), |e| hi[e] - lo[e], &mut dist);
        }
        cost[0][t] = sp[1];
        for j in 1..=m {
            let mut best = cost[j - 1][t];
            let mut at = None;
            for tp in (2..=t).rev() {
                let v = cost[j - 1][tp - 1] + sp[tp];
                if v < best {
                    best = v;
                    at = Some(tp);
                }
            }
            cost[j][t] = best;
            arg[j][t] = at;
        }
    }
    counters::add(n * (n + 1) / 2 * edge_count);

    let value = cost[m][n];
    let mut j = (0..=m).find(|&j| cost[j][n] == value).unwrap_or(m);
    let mut t = n;
    let mut segments = Vec::new();
    loop {
        if j == 0 {
            segments.push((1, t));
            break;
        }
        match arg[j][t] {
            None => j -= 1,
            Some(tp) => {
                segments.push((tp, t));
                t = tp - 1;
                j -= 1;
            }
        }
    }
    segments.reverse();
    let boundaries = segments.iter().skip(1).map(|&(s, _)| s).collect();
    let paths = segments
        .iter()
        .map(|&(s, e)| {
            let w: Vec<f64> = (0..edge_count)
                .map(|x| prefix[e * edge_count + x] - prefix[(s - 1) * edge_count + x])
                .collect();
            let (_, edges) = extremal_path(dag, dag.source(), dag.sink(), &w, Objective::Minimize)
                .expect("sink reachable");
            Path::from_edges_unchecked(edge_count, edges)
        })
        .collect();
    PartitionSolution {
        value,
        partition: Partition { boundaries, paths },
        prefix_values: cost[m][1..].to_vec(),
    }
}

pub(crate) fn shortest_value(dag: &Dag, w: &[f64], dist: &mut [f64]) -> f64 {
    shortest_value_topo(&Topology::new(dag), dag.sink(), |e| w[e], dist)
}

/// Shortest source-to-sink value with edge weights `w(e)`; `dist[0]` is the
/// source.
pub(crate) fn shortest_value_topo(topo: &Topology, sink: usize, w: impl Fn(usize) -> f64, dist: &mut [f64]) -> f64 {
    dist.fill(f64::INFINITY);
    dist[0] = 0.0;
    for (&e, &(tail, head)) in topo.order.iter().zip(&topo.arcs) {
        let c = dist[tail] + w(e);
        let h = &mut dist[head];
        if c < *h {
            *h = c;
        }
    }
    dist[sink]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge_bandit::{derive_params, EdgeBandit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig6(a: f64, b: f64) -> bool {
        ((a - b) / b).abs() < 5e-6
    }

    fn small_params(eta: f64, gamma: f64, alpha: f64) -> TrackingParams {
        TrackingParams {
            base: BanditParams::new(eta, gamma, 0.05, 10, 0.1).unwrap(),
            alpha,
            switches: 1,
        }
    }

    #[test]
    fn worked_parameters() {
        let stats = GraphStats::new(2, 4, 2, 2.0);
        let p = tracking_derive_params(10_000, 2, 0.001, &stats).unwrap();
        assert!(sig6(switching_complexity(10_000, 2, stats.ln_paths), 21.1136279));
        assert!(sig6(p.base.eta, 0.00812281277));
        assert!(sig6(p.base.gamma, 0.0649825021));
        assert!(sig6(p.alpha, 2.00020002e-4));
        assert!(sig6(p.base.beta, 0.0375353072));
        assert!(sig6(tracking_regret_bound(10_000, 2, 0.001, &stats).unwrap(), 0.820142475));
    }

    #[test]
    fn zero_switches_reduce_to_static_tuning() {
        let stats = GraphStats::new(2, 4, 2, 2.0);
        let p = tracking_derive_params(10_000, 0, 0.001, &stats).unwrap();
        let q = derive_params(10_000, 0.001, &stats).unwrap();
        assert_eq!(p.alpha, 0.0);
        assert!((p.base.eta - q.eta).abs() < 1e-15);
        assert!((p.base.gamma - q.gamma).abs() < 1e-15);
        assert!((p.base.beta - q.beta).abs() < 1e-15);
    }

    #[test]
    fn short_horizon_rejected() {
        let stats = GraphStats::new(2, 4, 2, 2.0);
        assert!(matches!(
            tracking_derive_params(20, 2, 0.001, &stats),
            Err(ParamError::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn first_round_is_uniform() {
        let dag = Dag::diamond();
        let cover = build_cover_set(&dag);
        let t = TrackingBandit::new(dag, cover, small_params(0.1, 0.5, 0.2)).unwrap();
        for q in t.edge_marginals() {
            assert!((q - 0.5).abs() < 1e-15);
        }
        assert_eq!(t.tau_distribution(), vec![1.0]);
    }

    #[test]
    fn matches_direct_recursion() {
        let dag = Dag::parallel_chain(3);
        let cover = build_cover_set(&dag);
        let params = small_params(0.3, 0.1, 0.25);
        let mut t = TrackingBandit::new(dag.clone(), cover.clone(), params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scripted: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..dag.edge_count()).map(|_| rng.random::<f64>() * 3.0).collect())
            .collect();
        let oracle = direct_compound_oracle(&dag, &cover, &params, &scripted).unwrap();
        let paths = enumerate_paths(&dag, 1024).unwrap();
        for (round, law) in oracle.iter().enumerate() {
            let ours = t.path_law(&paths);
            let tv: f64 = ours.iter().zip(law).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv < 1e-12, "round {round}: tv {tv}");
            let tau_sum: f64 = t.tau_distribution().iter().sum();
            assert!((tau_sum - 1.0).abs() < 1e-12);
            let q = t.edge_marginals();
            for (e, qe) in q.iter().enumerate() {
                let direct: f64 = paths.iter().zip(law).filter(|(p, _)| p.contains(e)).map(|(_, w)| w).sum();
                assert!((qe - direct).abs() < 1e-12);
            }
            if round < scripted.len() {
                t.apply_gains(&scripted[round]);
            }
        }
    }

    #[test]
    fn full_share_resets_every_round() {
        let dag = Dag::diamond();
        let cover = build_cover_set(&dag);
        let params = small_params(0.5, 0.0, 1.0);
        let mut t = TrackingBandit::new(dag.clone(), cover, params).unwrap();
        t.apply_gains(&[3.0, 3.0, 0.0, 0.0]);
        let law = t.path_law(&enumerate_paths(&dag, 16).unwrap());
        assert!((law[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_share_follows_edge_bandit() {
        let dag = Dag::parallel_chain(3);
        let cover = build_cover_set(&dag);
        let base = BanditParams::new(0.05, 0.1, 0.02, 200, 0.1).unwrap();
        let params = TrackingParams {
            base,
            alpha: 0.0,
            switches: 0,
        };
        let mut edge = EdgeBandit::new(dag.clone(), cover.clone(), base).unwrap();
        let mut track = TrackingBandit::new(dag.clone(), cover, params).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let mut losses_rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let (p1, _) = edge.choose_path(&mut r1);
            let (p2, _) = track.choose_path(&mut r2);
            assert_eq!(p1, p2);
            let l: Vec<(usize, f64)> = p1.edges().iter().map(|&e| (e, losses_rng.random())).collect();
            edge.update(&p1, &l).unwrap();
            track.update(&p2, &l).unwrap();
        }
        for (a, b) in edge.scores().iter().zip(track.history().last()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn linear_and_log_sweeps_agree() {
        let dag = Dag::parallel_chain(2);
        let cover = build_cover_set(&dag);
        let mut t = TrackingBandit::new(dag, cover, small_params(1.0, 0.1, 0.3)).unwrap();
        t.apply_gains(&[2.0, 0.5, 1.0, 4.0]);
        t.apply_gains(&[0.0, 1.5, 2.0, 0.1]);
        let mut s = t.scratch.clone();
        let fast = t.interval_flow_linear(2, 0, &mut s).unwrap();
        let (slow, linear) = {
            let mut u = t.clone();
            u.scaled.safe[0] = false;
            u.interval_flow(2, 0, &mut s)
        };
        assert!(!linear && (fast - slow).abs() < 1e-12);

        for r in 0..9 {
            let g: Vec<f64> = (0..4).map(|e| ((r * 7 + e * 3) % 5) as f64 * 0.4).collect();
            t.apply_gains(&g);
        }
        let mut log_only = t.clone();
        log_only.scaled.safe.iter_mut().for_each(|x| *x = false);
        let (a, b) = (t.sweep(), log_only.sweep());
        assert!((a.log_wbar - b.log_wbar).abs() < 1e-12);
        for (x, y) in a.log_a.iter().zip(&b.log_a).chain(a.q_mix.iter().zip(&b.q_mix)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_expert_found() {
        let dag = Dag::diamond();
        // Path A = upper (edges 0, 1), path B = lower (edges 2, 3).
        let losses = vec![
            vec![0.0, 0.0, 0.5, 0.5],
            vec![0.0, 0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
        ];
        let (value, part) = best_partition_loss(&dag, &losses, 1);
        assert_eq!(value, 0.0);
        assert_eq!(part.boundaries, vec![3]);
        assert_eq!(part.paths[0].edges(), &[0, 1]);
        assert_eq!(part.paths[1].edges(), &[2, 3]);
        assert_eq!(part.loss(&losses), 0.0);
    }

    #[test]
    fn zero_switches_is_best_fixed_path() {
        let dag = Dag::parallel_chain(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let losses: Vec<Vec<f64>> = (0..8).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
        let (value, part) = best_partition_loss(&dag, &losses, 0);
        let best = enumerate_paths(&dag, 16)
            .unwrap()
            .iter()
            .map(|p| losses.iter().map(|r| p.total(r)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!((value - best).abs() < 1e-12);
        assert!(part.boundaries.is_empty());
    }

    fn brute_force(paths: &[Path], losses: &[Vec<f64>], m: usize) -> f64 {
        let n = losses.len();
        let mut best = f64::INFINITY;
        // Enumerate every assignment of a path to each round with at most m changes.
        #[allow(clippy::too_many_arguments)]
        fn rec(
            t: usize,
            prev: Option<usize>,
            switches: usize,
            acc: f64,
            paths: &[Path],
            losses: &[Vec<f64>],
            m: usize,
            n: usize,
            best: &mut f64,
        ) {
            if t == n {
                *best = best.min(acc);
                return;
            }
            for (i, p) in paths.iter().enumerate() {
                let s = switches + usize::from(prev.is_some_and(|q| q != i));
                if s > m {
                    continue;
                }
                rec(t + 1, Some(i), s, acc + p.total(&losses[t]), paths, losses, m, n, best);
            }
        }
        rec(0, None, 0, 0.0, paths, losses, m, n, &mut best);
        best
    }

    #[test]
    fn partition_matches_brute_force() {
        let dag = Dag::parallel_chain(2);
        let paths = enumerate_paths(&dag, 16).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let losses: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
            let mut prev = f64::INFINITY;
            for m in 0..=3 {
                let (value, part) = best_partition_loss(&dag, &losses, m);
                assert!((value - brute_force(&paths, &losses, m)).abs() < 1e-9);
                assert!((part.loss(&losses) - value).abs() < 1e-9);
                assert!(part.switches() <= m);
                assert!(value <= prev + 1e-12);
                prev = value;
            }
        }
    }

    #[test]
    fn prefix_values_are_prefix_optima() {
        let dag = Dag::diamond();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let losses: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
        let sol = solve_partition(&dag, &losses, 2);
        for t in 1..=7 {
            let (v, _) = best_partition_loss(&dag, &losses[..t], 2);
            assert!((sol.prefix_values[t - 1] - v).abs() < 1e-12);
        }
    }
}
