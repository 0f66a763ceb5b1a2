//! Agent network topologies: the five generators used by the simulator plus
//! shortest-path machinery and an edge-list interchange format.

pub mod centrality;

pub use centrality::{centrality, centrality_correlations, pearson, CentralityMetric, CentralityScores};

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("infeasible topology parameters: {0}")]
    Infeasible(String),
    #[error("{metric} centrality requires a connected graph")]
    Disconnected { metric: CentralityMetric },
    #[error("eigenvector iteration failed to reach the target residual")]
    NoConvergence,
    #[error("invalid edge list: {0}")]
    InvalidEdgeList(String),
}

/// Undirected simple graph over nodes `0..n`.
///
/// Neighbor lists are kept sorted so that iteration order (and therefore
/// everything seeded downstream) is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

/// Generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Grid,
    Ring,
    Random,
    SmallWorld,
    ScaleFree,
}

impl std::fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TopologyKind::Grid => "grid",
            TopologyKind::Ring => "ring",
            TopologyKind::Random => "random",
            TopologyKind::SmallWorld => "small_world",
            TopologyKind::ScaleFree => "scale_free",
        };
        f.write_str(s)
    }
}

/// Generator parameters. `degree` is the target mean degree; `rewire_prob`
/// applies to small-world rewiring and `edge_prob`, when set, overrides the
/// degree-derived edge probability of the random generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub degree: usize,
    pub rewire_prob: f64,
    pub edge_prob: Option<f64>,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            degree: 6,
            rewire_prob: 0.1,
            edge_prob: None,
        }
    }
}

impl Graph {
    /// Builds a graph from an explicit edge set, rejecting self-loops,
    /// duplicates, and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let mut seen = BTreeSet::new();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(TopologyError::InvalidEdgeList(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(TopologyError::InvalidEdgeList(format!("self-loop at node {u}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(TopologyError::InvalidEdgeList(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph {
            n,
            adj,
            edge_count: seen.len(),
        })
    }

    fn from_edge_set(n: usize, edges: &BTreeSet<(usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph {
            n,
            adj,
            edge_count: edges.len(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count as f64 / self.n as f64
    }

    /// Canonical `(u, v)` edge list with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for u in 0..self.n {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// BFS hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::with_capacity(self.n);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued nodes have distances");
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Minimum number of edges between `u` and `v`; `None` if unreachable.
    pub fn shortest_path_distance(&self, u: usize, v: usize) -> Option<usize> {
        if u == v {
            return Some(0);
        }
        self.bfs_distances(u)[v]
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Longest shortest-path distance over all pairs. Requires connectivity.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for u in 0..self.n {
            for d in self.bfs_distances(u) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    /// Serializes to the edge-list interchange format: a `n <count>` header
    /// followed by one `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n {}", self.n);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| TopologyError::InvalidEdgeList("empty document".into()))?;
        let n = header
            .strip_prefix("n ")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| {
                TopologyError::InvalidEdgeList(format!("bad header {header:?}, expected \"n <count>\""))
            })?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let (u, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(u), Some(v), None) => (u, v),
                _ => {
                    return Err(TopologyError::InvalidEdgeList(format!(
                        "bad edge line {line:?}"
                    )))
                }
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| TopologyError::InvalidEdgeList(format!("bad node id {s:?}")))
            };
            edges.push((parse(u)?, parse(v)?));
        }
        Graph::from_edges(n, &edges)
    }
}

/// Generates one of the five network families. Deterministic under
/// `(kind, n, params, seed)`; the result is always connected.
pub fn generate(
    kind: TopologyKind,
    n: usize,
    params: &TopologyParams,
    seed: u64,
) -> Result<Graph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::Infeasible(format!(
            "need at least 2 nodes, got {n}"
        )));
    }
    match kind {
        TopologyKind::Grid => grid(n),
        TopologyKind::Ring => ring(n, params.degree),
        TopologyKind::Random => random(n, params, seed),
        TopologyKind::SmallWorld => small_world(n, params.degree, params.rewire_prob, seed),
        TopologyKind::ScaleFree => scale_free(n, params.degree, seed),
    }
}

/// Wrap-around 4-neighbor lattice on the most-square factorization of `n`.
fn grid(n: usize) -> Result<Graph, TopologyError> {
    let mut rows = 0;
    for r in (2..=((n as f64).sqrt() as usize)).rev() {
        if n % r == 0 {
            rows = r;
            break;
        }
    }
    if rows < 2 {
        return Err(TopologyError::Infeasible(format!(
            "grid needs a factorization r x c of {n} with r, c >= 2"
        )));
    }
    let cols = n / rows;
    let id = |i: usize, j: usize| i * cols + j;
    let mut edges = BTreeSet::new();
    for i in 0..rows {
        for j in 0..cols {
            let u = id(i, j);
            for v in [id((i + 1) % rows, j), id(i, (j + 1) % cols)] {
                if u != v {
                    edges.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
    Ok(Graph::from_edge_set(n, &edges))
}

/// Ring lattice joining each node to its `d/2` nearest neighbors per side.
/// `d = n - 1` yields the complete graph (the fully-connected neighborhood
/// case of the neighborhood-size sweep).
fn ring(n: usize, d: usize) -> Result<Graph, TopologyError> {
    if d == n - 1 {
        let mut edges = BTreeSet::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.insert((u, v));
            }
        }
        return Ok(Graph::from_edge_set(n, &edges));
    }
    if d == 0 || d % 2 != 0 || d >= n {
        return Err(TopologyError::Infeasible(format!(
            "ring degree must be even and < n (or exactly n - 1), got d={d}, n={n}"
        )));
    }
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for j in 1..=d / 2 {
            let v = (u + j) % n;
            edges.insert((u.min(v), u.max(v)));
        }
    }
    Ok(Graph::from_edge_set(n, &edges))
}

/// G(n, p) with p defaulting to d/(n-1); disconnected samples are repaired
/// by bridging components through their least-degree nodes.
fn random(n: usize, params: &TopologyParams, seed: u64) -> Result<Graph, TopologyError> {
    let p = match params.edge_prob {
        Some(p) => p,
        None => {
            if params.degree >= n {
                return Err(TopologyError::Infeasible(format!(
                    "mean degree {} >= n = {n}",
                    params.degree
                )));
            }
            params.degree as f64 / (n - 1) as f64
        }
    };
    if !(0.0..=1.0).contains(&p) {
        return Err(TopologyError::Infeasible(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.insert((u, v));
            }
        }
    }
    let mut graph = Graph::from_edge_set(n, &edges);
    loop {
        let comps = graph.components();
        if comps.len() <= 1 {
            break;
        }
        // Bridge the component holding the globally least-degree node to the
        // least-degree node outside it.
        let least = |nodes: &[usize]| {
            nodes
                .iter()
                .copied()
                .min_by_key(|&v| (graph.degree(v), v))
                .expect("component is nonempty")
        };
        let candidates: Vec<usize> = comps.iter().map(|c| least(c)).collect();
        let u = candidates
            .iter()
            .copied()
            .min_by_key(|&v| (graph.degree(v), v))
            .expect("at least two components");
        let u_comp = comps.iter().position(|c| c.contains(&u)).expect("found");
        let v = candidates
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != u_comp)
            .map(|(_, &v)| v)
            .min_by_key(|&v| (graph.degree(v), v))
            .expect("other component exists");
        edges.insert((u.min(v), u.max(v)));
        graph = Graph::from_edge_set(n, &edges);
    }
    Ok(graph)
}

/// Watts-Strogatz: ring lattice of degree `d` with each rightward edge
/// rewired to a random endpoint with probability `p`. Edge count (and thus
/// mean degree) is preserved; rare disconnected outcomes are regenerated
/// from follow-on seeds.
fn small_world(n: usize, d: usize, p: f64, seed: u64) -> Result<Graph, TopologyError> {
    if d == 0 || d % 2 != 0 || d >= n {
        return Err(TopologyError::Infeasible(format!(
            "small-world degree must be even and < n, got d={d}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(TopologyError::Infeasible(format!(
            "rewiring probability {p} outside [0, 1]"
        )));
    }
    for attempt in 0..64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for u in 0..n {
            for j in 1..=d / 2 {
                let v = (u + j) % n;
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        for j in 1..=d / 2 {
            for u in 0..n {
                let v = (u + j) % n;
                if !adj[u].contains(&v) {
                    continue; // already rewired away
                }
                if rng.random::<f64>() >= p {
                    continue;
                }
                if adj[u].len() >= n - 1 {
                    continue; // saturated, nowhere to rewire
                }
                let m = loop {
                    let cand = rng.random_range(0..n);
                    if cand != u && !adj[u].contains(&cand) {
                        break cand;
                    }
                };
                adj[u].remove(&v);
                adj[v].remove(&u);
                adj[u].insert(m);
                adj[m].insert(u);
            }
        }
        let mut edges = BTreeSet::new();
        for u in 0..n {
            for &v in &adj[u] {
                edges.insert((u.min(v), u.max(v)));
            }
        }
        let graph = Graph::from_edge_set(n, &edges);
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(TopologyError::Infeasible(
        "small-world generation kept producing disconnected graphs".into(),
    ))
}

/// Barabasi-Albert preferential attachment with `m = d/2` edges per new
/// node, seeded from a complete core of `m + 1` nodes.
fn scale_free(n: usize, d: usize, seed: u64) -> Result<Graph, TopologyError> {
    if d == 0 || d % 2 != 0 {
        return Err(TopologyError::Infeasible(format!(
            "scale-free degree must be even and positive, got d={d}"
        )));
    }
    let m = d / 2;
    if n < m + 1 {
        return Err(TopologyError::Infeasible(format!(
            "scale-free needs n >= {} for attachment count m={m}, got n={n}",
            m + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    // One entry per unit of degree; sampling an index uniformly is sampling
    // a node proportionally to its degree.
    let mut stubs: Vec<usize> = Vec::with_capacity(2 * n * m);
    for u in 0..=m {
        for v in (u + 1)..=m {
            edges.insert((u, v));
            stubs.push(u);
            stubs.push(v);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let t = stubs[rng.random_range(0..stubs.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.insert((t.min(v), t.max(v)));
            stubs.push(t);
            stubs.push(v);
        }
    }
    Ok(Graph::from_edge_set(n, &edges))
}
