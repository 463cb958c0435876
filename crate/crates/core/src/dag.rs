//! Directed acyclic graphs with a distinguished source and sink.
//!
//! A [`Dag`] is always stored topologically labeled: vertex `0` is the source,
//! vertex `vertex_count - 1` is the sink, and every edge goes from a smaller
//! label to a larger one. Edge ids are the stable indices `0..edge_count` that
//! every other module uses to address per-edge state.
//!
//! Arbitrary user graphs enter through [`RawGraph`] and [`topological_label`],
//! which prunes everything that is not on a source-to-sink route and reports
//! what it removed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Default cap on the number of paths that enumeration-based helpers accept.
pub const DEFAULT_PATH_CAP: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph contains a cycle")]
    CycleDetected,
    #[error("no path from source {from} to sink {sink}")]
    SourceSinkDisconnected { from: u64, sink: u64 },
    #[error("graph has {count} source-to-sink paths, above the cap of {cap}")]
    PathCountExceedsCap { count: u128, cap: u64 },
    #[error("edge {edge} ({tail} -> {head}) violates the topological labeling")]
    NotTopologicallyLabeled { edge: EdgeId, tail: VertexId, head: VertexId },
    #[error("edge {0} is not on any source-to-sink path")]
    DeadEdge(EdgeId),
    #[error("vertex {0} is not an endpoint of any edge")]
    IsolatedVertex(VertexId),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid graph spec {0:?} (expected a file path or chain:<K>)")]
    BadSpec(String),
    #[error("reading {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
}

/// A topologically labeled DAG with source `0` and sink `vertex_count - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    vertex_count: usize,
    edges: Vec<Edge>,
    dummy: Vec<bool>,
    /// Outgoing edges per vertex in edge-index order.
    out_edges: Vec<Vec<EdgeId>>,
    /// Outgoing edges per vertex ordered by (head, edge id).
    out_lex: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
}

impl Dag {
    /// Builds a DAG from an already-labeled edge list.
    ///
    /// Requires `tail < head` for every edge, every edge on a `0 -> n-1` path,
    /// and every vertex touched by some edge.
    pub fn from_labeled_edges(
        vertex_count: usize,
        edges: Vec<(VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        if vertex_count < 2 {
            return Err(GraphError::SourceSinkDisconnected { from: 0, sink: 0 });
        }
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|(tail, head)| Edge { tail, head })
            .collect();
        for (id, e) in edges.iter().enumerate() {
            if e.tail >= e.head || e.head >= vertex_count {
                return Err(GraphError::NotTopologicallyLabeled {
                    edge: id,
                    tail: e.tail,
                    head: e.head,
                });
            }
        }
        let dag = Self::assemble(vertex_count, edges);
        dag.check_liveness()?;
        Ok(dag)
    }

    fn assemble(vertex_count: usize, edges: Vec<Edge>) -> Self {
        let mut out_edges = vec![Vec::new(); vertex_count];
        let mut in_edges = vec![Vec::new(); vertex_count];
        for (id, e) in edges.iter().enumerate() {
            out_edges[e.tail].push(id);
            in_edges[e.head].push(id);
        }
        let out_lex = out_edges
            .iter()
            .map(|list| {
                let mut l = list.clone();
                l.sort_by_key(|&id| (edges[id].head, id));
                l
            })
            .collect();
        let dummy = vec![false; edges.len()];
        Self {
            vertex_count,
            edges,
            dummy,
            out_edges,
            out_lex,
            in_edges,
        }
    }

    fn check_liveness(&self) -> Result<(), GraphError> {
        let n = self.vertex_count;
        let mut from_source = vec![false; n];
        from_source[0] = true;
        for s in 0..n {
            if from_source[s] {
                for &e in &self.out_edges[s] {
                    from_source[self.edges[e].head] = true;
                }
            }
        }
        let mut to_sink = vec![false; n];
        to_sink[n - 1] = true;
        for s in (0..n).rev() {
            if self.out_edges[s].iter().any(|&e| to_sink[self.edges[e].head]) {
                to_sink[s] = true;
            }
        }
        if !to_sink[0] {
            return Err(GraphError::SourceSinkDisconnected {
                from: 0,
                sink: (n - 1) as u64,
            });
        }
        for (id, e) in self.edges.iter().enumerate() {
            if !from_source[e.tail] || !to_sink[e.head] {
                return Err(GraphError::DeadEdge(id));
            }
        }
        for s in 0..n {
            if self.out_edges[s].is_empty() && self.in_edges[s].is_empty() {
                return Err(GraphError::IsolatedVertex(s));
            }
        }
        Ok(())
    }

    /// `u -> v` with a single edge.
    pub fn single_edge() -> Self {
        Self::from_labeled_edges(2, vec![(0, 1)]).expect("valid")
    }

    /// Two vertices joined by `arms` parallel edges: the classic bandit as a graph.
    pub fn parallel_edges(arms: usize) -> Self {
        assert!(arms >= 1);
        Self::from_labeled_edges(2, vec![(0, 1); arms]).expect("valid")
    }

    /// The diamond `u -> a -> v`, `u -> b -> v`. Edges 0,1 form the upper
    /// path and edges 2,3 the lower one.
    pub fn diamond() -> Self {
        Self::from_labeled_edges(4, vec![(0, 1), (1, 3), (0, 2), (2, 3)]).expect("valid")
    }

    /// `stages` consecutive pairs of parallel edges. In stage `s` the upper
    /// edge has id `2s` and the lower edge id `2s + 1`.
    pub fn parallel_chain(stages: usize) -> Self {
        assert!(stages >= 1);
        let edges = (0..stages).flat_map(|s| [(s, s + 1), (s, s + 1)]).collect();
        Self::from_labeled_edges(stages + 1, edges).expect("valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> VertexId {
        0
    }

    pub fn sink(&self) -> VertexId {
        self.vertex_count - 1
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    /// Outgoing edges ordered by `(head, id)`; used for lexicographic walks.
    pub fn out_edges_lex(&self, v: VertexId) -> &[EdgeId] {
        &self.out_lex[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn is_dummy(&self, e: EdgeId) -> bool {
        self.dummy[e]
    }

    pub fn dummy_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).filter(|&e| self.dummy[e])
    }

    /// Number of source-to-sink paths, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        let mut count = vec![0u128; self.vertex_count];
        count[self.sink()] = 1;
        for s in (0..self.sink()).rev() {
            count[s] = self.out_edges[s]
                .iter()
                .fold(0u128, |acc, &e| acc.saturating_add(count[self.edges[e].head]));
        }
        count[0]
    }

    /// `ln N`, computed in log space so it stays finite on huge graphs.
    pub fn ln_path_count(&self) -> f64 {
        let mut log_count = vec![f64::NEG_INFINITY; self.vertex_count];
        log_count[self.sink()] = 0.0;
        for s in (0..self.sink()).rev() {
            let terms: Vec<f64> = self.out_edges[s]
                .iter()
                .map(|&e| log_count[self.edges[e].head])
                .collect();
            log_count[s] = log_sum_exp(&terms);
        }
        log_count[0]
    }

    /// Lengths (in edges) of the longest and shortest source-to-sink paths.
    pub fn path_length_range(&self) -> (usize, usize) {
        let mut longest = vec![0usize; self.vertex_count];
        let mut shortest = vec![usize::MAX; self.vertex_count];
        shortest[self.sink()] = 0;
        for s in (0..self.sink()).rev() {
            for &e in &self.out_edges[s] {
                let h = self.edges[e].head;
                longest[s] = longest[s].max(longest[h] + 1);
                shortest[s] = shortest[s].min(shortest[h].saturating_add(1));
            }
        }
        (longest[0], shortest[0])
    }

    /// Length of the longest source-to-sink path.
    pub fn longest_path_len(&self) -> usize {
        self.path_length_range().0
    }

    pub fn is_uniform_length(&self) -> bool {
        let (long, short) = self.path_length_range();
        long == short
    }

    pub fn descriptor(&self) -> String {
        format!(
            "dag(|V|={}, |E|={}, dummy={})",
            self.vertex_count,
            self.edges.len(),
            self.dummy.iter().filter(|&&d| d).count()
        )
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// A source-to-sink path: its edges in order plus the 0/1 incidence vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    edges: Vec<EdgeId>,
    incidence: Vec<bool>,
}

impl Path {
    pub fn new(dag: &Dag, edges: Vec<EdgeId>) -> Result<Self, GraphError> {
        let mut at = dag.source();
        let mut incidence = vec![false; dag.edge_count()];
        for &e in &edges {
            if e >= dag.edge_count() {
                return Err(GraphError::InvalidPath(format!("unknown edge {e}")));
            }
            let edge = dag.edge(e);
            if edge.tail != at {
                return Err(GraphError::InvalidPath(format!(
                    "edge {e} leaves vertex {} but the path is at {at}",
                    edge.tail
                )));
            }
            incidence[e] = true;
            at = edge.head;
        }
        if at != dag.sink() {
            return Err(GraphError::InvalidPath(format!(
                "path ends at {at}, not the sink {}",
                dag.sink()
            )));
        }
        Ok(Self { edges, incidence })
    }

    pub(crate) fn from_edges_unchecked(edge_count: usize, edges: Vec<EdgeId>) -> Self {
        let mut incidence = vec![false; edge_count];
        for &e in &edges {
            incidence[e] = true;
        }
        Self { edges, incidence }
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.incidence[e]
    }

    pub fn incidence(&self) -> &[bool] {
        &self.incidence
    }

    pub fn incidence_vector(&self) -> Vec<f64> {
        self.incidence.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Sum of `values[e]` over the edges of the path.
    pub fn total(&self, values: &[f64]) -> f64 {
        self.edges.iter().map(|&e| values[e]).sum()
    }

    pub fn vertices(&self, dag: &Dag) -> Vec<VertexId> {
        let mut out = vec![dag.source()];
        out.extend(self.edges.iter().map(|&e| dag.edge(e).head));
        out
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.edges.iter().map(|e| e.to_string()).collect();
        write!(f, "[{}]", ids.join(" "))
    }
}

/// All source-to-sink paths, ordered lexicographically by vertex sequence
/// (parallel edges by edge id). Refuses graphs with more than `cap` paths.
pub fn enumerate_paths(dag: &Dag, cap: u64) -> Result<Vec<Path>, GraphError> {
    let count = dag.path_count();
    if count > cap as u128 {
        return Err(GraphError::PathCountExceedsCap { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut stack: Vec<EdgeId> = Vec::new();
    enumerate_from(dag, dag.source(), &mut stack, &mut out);
    Ok(out)
}

fn enumerate_from(dag: &Dag, at: VertexId, stack: &mut Vec<EdgeId>, out: &mut Vec<Path>) {
    if at == dag.sink() {
        out.push(Path::from_edges_unchecked(dag.edge_count(), stack.clone()));
        return;
    }
    for &e in dag.out_edges_lex(at) {
        stack.push(e);
        enumerate_from(dag, dag.edge(e).head, stack, out);
        stack.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

/// Extremal `from -> to` path under additive edge weights, ties broken toward
/// the lexicographically smallest vertex sequence (then smallest edge id).
/// Returns `None` when `to` is unreachable from `from`.
pub fn extremal_path(
    dag: &Dag,
    from: VertexId,
    to: VertexId,
    weight: &[f64],
    objective: Objective,
) -> Option<(f64, Vec<EdgeId>)> {
    let better = |a: f64, b: f64| match objective {
        Objective::Minimize => a < b,
        Objective::Maximize => a > b,
    };
    let mut value: Vec<Option<f64>> = vec![None; dag.vertex_count()];
    value[to] = Some(0.0);
    for s in (from..to).rev() {
        let mut best: Option<f64> = None;
        for &e in dag.out_edges(s) {
            let h = dag.edge(e).head;
            if h > to {
                continue;
            }
            if let Some(rest) = value[h] {
                let cand = weight[e] + rest;
                if best.is_none_or(|b| better(cand, b)) {
                    best = Some(cand);
                }
            }
        }
        value[s] = best;
    }
    let total = value[from]?;
    let mut path = Vec::new();
    let mut at = from;
    while at != to {
        let target = value[at].expect("on an optimal walk");
        let next = dag
            .out_edges_lex(at)
            .iter()
            .copied()
            .find(|&e| {
                let h = dag.edge(e).head;
                h <= to && value[h].is_some_and(|rest| weight[e] + rest == target)
            })
            .expect("optimal continuation exists");
        path.push(next);
        at = dag.edge(next).head;
    }
    Some((total, path))
}

/// A graph as read from a file: arbitrary vertex ids, edges in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGraph {
    pub edges: Vec<(u64, u64)>,
    pub source: u64,
    pub sink: u64,
}

/// Result of [`topological_label`].
#[derive(Debug, Clone)]
pub struct Labeling {
    pub dag: Dag,
    /// Original id of each new vertex label.
    pub vertex_ids: Vec<u64>,
    /// Raw edge index of each retained edge; new edge ids follow raw order.
    pub edge_origin: Vec<usize>,
    pub pruned_vertices: Vec<u64>,
    pub pruned_edges: Vec<usize>,
}

impl Labeling {
    pub fn pruned_anything(&self) -> bool {
        !self.pruned_vertices.is_empty() || !self.pruned_edges.is_empty()
    }
}

/// Relabels a raw graph so that the source is `0`, the sink is last, and every
/// edge increases the label. Edges and vertices not on any source-to-sink
/// path are pruned and reported.
pub fn topological_label(raw: &RawGraph) -> Result<Labeling, GraphError> {
    let mut ids: BTreeSet<u64> = BTreeSet::new();
    ids.insert(raw.source);
    ids.insert(raw.sink);
    for &(a, b) in &raw.edges {
        ids.insert(a);
        ids.insert(b);
    }
    let ids: Vec<u64> = ids.into_iter().collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ids.len();
    let edges: Vec<(usize, usize)> = raw.edges.iter().map(|(a, b)| (index[a], index[b])).collect();

    // Kahn over the whole input graph; smallest original id first among ready vertices.
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        indeg[b] += 1;
        out[a].push(id);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &e in &out[v] {
            let h = edges[e].1;
            indeg[h] -= 1;
            if indeg[h] == 0 {
                ready.insert(h);
            }
        }
    }
    if order.len() != n {
        return Err(GraphError::CycleDetected);
    }

    let src = index[&raw.source];
    let snk = index[&raw.sink];
    let mut reach = vec![false; n];
    reach[src] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        for &e in &out[v] {
            let h = edges[e].1;
            if !reach[h] {
                reach[h] = true;
                queue.push_back(h);
            }
        }
    }
    let mut coreach = vec![false; n];
    coreach[snk] = true;
    for &v in order.iter().rev() {
        if out[v].iter().any(|&e| coreach[edges[e].1]) {
            coreach[v] = true;
        }
    }
    if !reach[snk] || src == snk {
        return Err(GraphError::SourceSinkDisconnected {
            from: raw.source,
            sink: raw.sink,
        });
    }

    let live_edge = |&(a, b): &(usize, usize)| reach[a] && coreach[b];
    let live_vertex: Vec<bool> = (0..n).map(|v| reach[v] && coreach[v]).collect();

    let mut label = vec![usize::MAX; n];
    let mut vertex_ids = Vec::new();
    for &v in &order {
        if live_vertex[v] {
            label[v] = vertex_ids.len();
            vertex_ids.push(ids[v]);
        }
    }
    debug_assert_eq!(label[src], 0);
    debug_assert_eq!(label[snk], vertex_ids.len() - 1);

    let mut kept = Vec::new();
    let mut edge_origin = Vec::new();
    let mut pruned_edges = Vec::new();
    for (id, e) in edges.iter().enumerate() {
        if live_edge(e) {
            kept.push((label[e.0], label[e.1]));
            edge_origin.push(id);
        } else {
            pruned_edges.push(id);
        }
    }
    let pruned_vertices = (0..n).filter(|&v| !live_vertex[v]).map(|v| ids[v]).collect();
    let dag = Dag::from_labeled_edges(vertex_ids.len(), kept)?;
    Ok(Labeling {
        dag,
        vertex_ids,
        edge_origin,
        pruned_vertices,
        pruned_edges,
    })
}

/// A DAG padded so that every source-to-sink path has exactly `k` edges.
///
/// Original edges keep their ids `0..original_edge_count`; dummy edges are
/// appended after them.
#[derive(Debug, Clone)]
pub struct PaddedDag {
    pub dag: Dag,
    pub k: usize,
    pub original_edge_count: usize,
    /// Padded label of each original vertex.
    pub vertex_map: Vec<VertexId>,
    pub added_vertices: usize,
    pub added_edges: usize,
}

impl PaddedDag {
    /// Original path corresponding to a padded path (dummy edges dropped).
    pub fn original_edges(&self, padded: &Path) -> Vec<EdgeId> {
        padded
            .edges()
            .iter()
            .copied()
            .filter(|&e| e < self.original_edge_count)
            .collect()
    }

    /// Padded image of an original path.
    pub fn padded_path(&self, original: &Path) -> Path {
        let mut edges = Vec::with_capacity(self.k);
        for &e in original.edges() {
            edges.push(e);
            let orig_head = self.original_head(e);
            let mut at = self.dag.edge(e).head;
            while at != orig_head {
                // Chain vertices have exactly one outgoing dummy edge.
                let next = self.dag.out_edges(at)[0];
                edges.push(next);
                at = self.dag.edge(next).head;
            }
        }
        Path::from_edges_unchecked(self.dag.edge_count(), edges)
    }

    fn original_head(&self, e: EdgeId) -> VertexId {
        // Walk the chain to the first vertex that is an original vertex image.
        let mut at = self.dag.edge(e).head;
        while !self.vertex_map.contains(&at) {
            at = self.dag.edge(self.dag.out_edges(at)[0]).head;
        }
        at
    }

    /// Extends per-edge losses of the original graph with zeros for dummies.
    pub fn pad_losses(&self, original: &[f64]) -> Vec<f64> {
        let mut out = original.to_vec();
        out.resize(self.dag.edge_count(), 0.0);
        out
    }
}

/// Pads `dag` with dummy vertices and zero-loss dummy edges so that every
/// source-to-sink path has length `K`, the longest path length.
///
/// Each vertex `b` gets at most one shared chain of dummy vertices in front of
/// it; an edge `(a, b)` whose longest-distance gap is `k` enters that chain
/// `k - 1` hops before `b`.
pub fn make_uniform_length(dag: &Dag) -> PaddedDag {
    let n = dag.vertex_count();
    let mut depth = vec![0usize; n];
    for s in 0..n {
        for &e in dag.out_edges(s) {
            let h = dag.edge(e).head;
            depth[h] = depth[h].max(depth[s] + 1);
        }
    }
    let k = depth[dag.sink()];
    let mut chain_len = vec![0usize; n];
    for e in dag.edges() {
        let gap = depth[e.head] - depth[e.tail];
        chain_len[e.head] = chain_len[e.head].max(gap - 1);
    }
    let added_vertices: usize = chain_len.iter().sum();
    if added_vertices == 0 {
        return PaddedDag {
            dag: dag.clone(),
            k,
            original_edge_count: dag.edge_count(),
            vertex_map: (0..n).collect(),
            added_vertices: 0,
            added_edges: 0,
        };
    }

    // Raw ids: original vertices keep their labels, chain vertex j (j >= 1)
    // in front of b gets a fresh id.
    let mut chain_ids: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut next_id = n as u64;
    for b in 0..n {
        chain_ids[b].push(b as u64);
        for _ in 0..chain_len[b] {
            chain_ids[b].push(next_id);
            next_id += 1;
        }
    }
    let mut raw_edges: Vec<(u64, u64)> = dag
        .edges()
        .iter()
        .map(|e| {
            let gap = depth[e.head] - depth[e.tail];
            (e.tail as u64, chain_ids[e.head][gap - 1])
        })
        .collect();
    let original_edge_count = raw_edges.len();
    for ids in &chain_ids {
        for j in (1..ids.len()).rev() {
            raw_edges.push((ids[j], ids[j - 1]));
        }
    }
    let added_edges = raw_edges.len() - original_edge_count;
    let raw = RawGraph {
        edges: raw_edges,
        source: 0,
        sink: dag.sink() as u64,
    };
    let labeling = topological_label(&raw).expect("padding preserves validity");
    debug_assert!(!labeling.pruned_anything());
    let mut padded = labeling.dag;
    for e in original_edge_count..padded.edge_count() {
        padded.dummy[e] = true;
    }
    let mut vertex_map = vec![0; n];
    for (label, &id) in labeling.vertex_ids.iter().enumerate() {
        if (id as usize) < n {
            vertex_map[id as usize] = label;
        }
    }
    PaddedDag {
        dag: padded,
        k,
        original_edge_count,
        vertex_map,
        added_vertices,
        added_edges,
    }
}

/// A set of paths that jointly covers every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSet {
    pub paths: Vec<Path>,
    /// Index into `paths` of one covering path per edge.
    pub edge_to_cover_path: Vec<usize>,
    /// `|{i in C : e in i}|` per edge.
    pub edge_cover_count: Vec<usize>,
}

impl CoverSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn contains(&self, path: &Path) -> bool {
        self.paths.iter().any(|p| p == path)
    }

    /// Builds a cover set from explicit paths, checking that it covers every edge.
    pub fn from_paths(dag: &Dag, paths: Vec<Path>) -> Result<Self, GraphError> {
        let mut edge_to_cover_path = vec![usize::MAX; dag.edge_count()];
        let mut edge_cover_count = vec![0; dag.edge_count()];
        for (i, p) in paths.iter().enumerate() {
            for &e in p.edges() {
                if edge_to_cover_path[e] == usize::MAX {
                    edge_to_cover_path[e] = i;
                }
                edge_cover_count[e] += 1;
            }
        }
        if let Some(e) = edge_to_cover_path.iter().position(|&i| i == usize::MAX) {
            return Err(GraphError::InvalidPath(format!("edge {e} is not covered")));
        }
        Ok(Self {
            paths,
            edge_to_cover_path,
            edge_cover_count,
        })
    }
}

/// Greedy cover: scan edges in id order; for each uncovered edge `(a, b)` emit
/// the path `u -> a`, the edge, `b -> v` whose prefix and suffix pick up as
/// many still-uncovered edges as possible, ties going to the lexicographically
/// smallest vertex sequence.
pub fn build_cover_set(dag: &Dag) -> CoverSet {
    let mut covered = vec![false; dag.edge_count()];
    let mut paths = Vec::new();
    for e in 0..dag.edge_count() {
        if covered[e] {
            continue;
        }
        let gain: Vec<f64> = covered.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect();
        let Edge { tail, head } = dag.edge(e);
        let (_, mut edges) = extremal_path(dag, dag.source(), tail, &gain, Objective::Maximize)
            .expect("every edge is on a source-to-sink path");
        edges.push(e);
        let (_, suffix) = extremal_path(dag, head, dag.sink(), &gain, Objective::Maximize)
            .expect("every edge is on a source-to-sink path");
        edges.extend(suffix);
        for &x in &edges {
            covered[x] = true;
        }
        paths.push(Path::from_edges_unchecked(dag.edge_count(), edges));
    }
    CoverSet::from_paths(dag, paths).expect("greedy construction covers every edge")
}

/// Parses the line-oriented graph format:
///
/// ```text
/// # comment
/// dag <|V|> <|E|> <source> <sink>
/// edge <tail> <head>
/// ```
pub fn parse_graph(text: &str) -> Result<RawGraph, GraphError> {
    let mut header: Option<(usize, usize, u64, u64)> = None;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let perr = |msg: String| GraphError::Parse { line: line_no, msg };
        let num = |s: &str| -> Result<u64, GraphError> {
            s.parse::<u64>()
                .map_err(|_| perr(format!("expected a non-negative integer, got {s:?}")))
        };
        match fields[0] {
            "dag" => {
                if header.is_some() {
                    return Err(perr("duplicate dag header".into()));
                }
                if fields.len() != 5 {
                    return Err(perr("header is `dag <|V|> <|E|> <source> <sink>`".into()));
                }
                header = Some((
                    num(fields[1])? as usize,
                    num(fields[2])? as usize,
                    num(fields[3])?,
                    num(fields[4])?,
                ));
            }
            "edge" => {
                if header.is_none() {
                    return Err(perr("edge before dag header".into()));
                }
                if fields.len() != 3 {
                    return Err(perr("edge line is `edge <tail> <head>`".into()));
                }
                edges.push((num(fields[1])?, num(fields[2])?));
            }
            other => return Err(perr(format!("unknown directive {other:?}"))),
        }
    }
    let (v, e, source, sink) = header.ok_or(GraphError::Parse {
        line: 0,
        msg: "missing dag header".into(),
    })?;
    if edges.len() != e {
        return Err(GraphError::Parse {
            line: 0,
            msg: format!("header declares {e} edges, found {}", edges.len()),
        });
    }
    let mut ids: BTreeSet<u64> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.insert(source);
    ids.insert(sink);
    if ids.len() != v {
        return Err(GraphError::Parse {
            line: 0,
            msg: format!("header declares {v} vertices, found {}", ids.len()),
        });
    }
    Ok(RawGraph { edges, source, sink })
}

/// Renders a labeled DAG in the graph file format.
pub fn write_graph(dag: &Dag) -> String {
    let mut out = format!(
        "dag {} {} {} {}\n",
        dag.vertex_count(),
        dag.edge_count(),
        dag.source(),
        dag.sink()
    );
    for e in dag.edges() {
        out.push_str(&format!("edge {} {}\n", e.tail, e.head));
    }
    out
}

/// Resolves `chain:<K>` or a path to a graph file.
pub fn load_graph(spec: &str) -> Result<Labeling, GraphError> {
    if let Some(k) = spec.strip_prefix("chain:") {
        let k: usize = k
            .parse()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| GraphError::BadSpec(spec.to_string()))?;
        let dag = Dag::parallel_chain(k);
        return Ok(Labeling {
            vertex_ids: (0..dag.vertex_count() as u64).collect(),
            edge_origin: (0..dag.edge_count()).collect(),
            dag,
            pruned_vertices: Vec::new(),
            pruned_edges: Vec::new(),
        });
    }
    let text = std::fs::read_to_string(spec).map_err(|e| GraphError::Io {
        path: spec.to_string(),
        msg: e.to_string(),
    })?;
    topological_label(&parse_graph(&text)?)
}
