//! Partitioning of agents into supervised clusters.
//!
//! Every mechanism produces a [`Grouping`]: a partition of the node set,
//! one supervisor per group drawn from the group itself, and the supervisor
//! adjacency weights (normalized cross-edge counts) that drive peer
//! imitation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::Graph;

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error("invalid group count: {0}")]
    InvalidK(String),
    #[error("invalid k-means parameters: {0}")]
    InvalidParams(String),
}

/// Grouping mechanism selector, as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum GroupingKind {
    Random { k: usize },
    Degree,
    KMeans {
        k: usize,
        dist_max: Option<usize>,
        size_max: Option<usize>,
    },
    KernighanLin { k: usize },
}

impl std::fmt::Display for GroupingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupingKind::Random { k } => write!(f, "random(k={k})"),
            GroupingKind::Degree => write!(f, "degree"),
            GroupingKind::KMeans { k, .. } => write!(f, "kmeans(k={k})"),
            GroupingKind::KernighanLin { k } => write!(f, "kernighan_lin(k={k})"),
        }
    }
}

/// A partition of the node set into supervised clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    groups: Vec<Vec<usize>>,
    supervisors: Vec<usize>,
    group_of: Vec<usize>,
    /// Per group: neighboring groups with normalized cross-edge weight.
    /// Weights sum to 1 over each group's neighbors; a group with no cross
    /// edges has an empty list and its supervisor skips imitation.
    com: Vec<Vec<(usize, f64)>>,
}

impl Grouping {
    /// Assembles a grouping from explicit groups and supervisors, deriving
    /// the inverse map and the supervisor adjacency weights.
    pub fn new(graph: &Graph, mut groups: Vec<Vec<usize>>, supervisors: Vec<usize>) -> Self {
        let n = graph.n();
        assert_eq!(groups.len(), supervisors.len());
        let mut group_of = vec![usize::MAX; n];
        for (gi, members) in groups.iter_mut().enumerate() {
            members.sort_unstable();
            for &m in members.iter() {
                assert_eq!(group_of[m], usize::MAX, "node {m} assigned twice");
                group_of[m] = gi;
            }
        }
        assert!(
            group_of.iter().all(|&g| g != usize::MAX),
            "groups must cover every node"
        );
        for (gi, &sup) in supervisors.iter().enumerate() {
            assert_eq!(group_of[sup], gi, "supervisor must belong to its own group");
        }
        let com = neighboring_degrees(graph, &group_of, groups.len());
        Grouping {
            groups,
            supervisors,
            group_of,
            com,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn supervisors(&self) -> &[usize] {
        &self.supervisors
    }

    pub fn supervisor_of_group(&self, group: usize) -> usize {
        self.supervisors[group]
    }

    #[inline]
    pub fn group_of(&self, node: usize) -> usize {
        self.group_of[node]
    }

    /// Neighboring groups of `group` with their normalized degrees.
    pub fn com(&self, group: usize) -> &[(usize, f64)] {
        &self.com[group]
    }

    /// Dump format used by fixtures: `node group` lines followed by a
    /// supervisor list.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (node, &g) in self.group_of.iter().enumerate() {
            let _ = writeln!(out, "{node} {g}");
        }
        let sups: Vec<String> = self.supervisors.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "supervisors {}", sups.join(" "));
        out
    }
}

/// Cross-edge counts between groups, normalized per group so that each
/// group's outgoing weights sum to 1. An edge exists iff at least one graph
/// edge crosses the two subordinate sets.
fn neighboring_degrees(graph: &Graph, group_of: &[usize], k: usize) -> Vec<Vec<(usize, f64)>> {
    let mut counts = vec![std::collections::BTreeMap::<usize, usize>::new(); k];
    for u in 0..graph.n() {
        for &v in graph.neighbors(u) {
            if u < v && group_of[u] != group_of[v] {
                *counts[group_of[u]].entry(group_of[v]).or_insert(0) += 1;
                *counts[group_of[v]].entry(group_of[u]).or_insert(0) += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|m| {
            let total: usize = m.values().sum();
            m.into_iter()
                .map(|(g, c)| (g, c as f64 / total as f64))
                .collect()
        })
        .collect()
}

/// Builds a grouping with the configured mechanism. The second return value
/// carries non-fatal warnings (k-means adjustment fallbacks).
pub fn build(
    kind: &GroupingKind,
    graph: &Graph,
    seed: u64,
) -> Result<(Grouping, Vec<String>), GroupingError> {
    match *kind {
        GroupingKind::Random { k } => Ok((group_random(graph, k, seed)?, Vec::new())),
        GroupingKind::Degree => Ok((group_degree(graph, seed), Vec::new())),
        GroupingKind::KMeans { k, dist_max, size_max } => {
            let (dd, ds) = kmeans_defaults(graph, k)?;
            group_kmeans(graph, k, dist_max.unwrap_or(dd), size_max.unwrap_or(ds), seed)
        }
        GroupingKind::KernighanLin { k } => {
            Ok((group_kernighan_lin(graph, k, seed)?, Vec::new()))
        }
    }
}

/// Divides nodes into `k` equal groups uniformly at random; group sizes
/// differ by at most one. Supervisors are uniform within each group.
pub fn group_random(graph: &Graph, k: usize, seed: u64) -> Result<Grouping, GroupingError> {
    let n = graph.n();
    if k == 0 || k > n {
        return Err(GroupingError::InvalidK(format!("k={k} outside 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut groups = Vec::with_capacity(k);
    let mut start = 0;
    for gi in 0..k {
        let size = base + usize::from(gi < extra);
        groups.push(nodes[start..start + size].to_vec());
        start += size;
    }
    let supervisors = pick_random_supervisors(&groups, &mut rng);
    Ok(Grouping::new(graph, groups, supervisors))
}

/// One group per distinct degree value (ascending); not an equal division.
pub fn group_degree(graph: &Graph, seed: u64) -> Grouping {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degrees: Vec<usize> = (0..graph.n()).map(|u| graph.degree(u)).collect();
    let mut distinct = degrees.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); distinct.len()];
    for node in 0..graph.n() {
        let gi = distinct.binary_search(&degrees[node]).expect("degree present");
        groups[gi].push(node);
    }
    degrees.clear();
    let supervisors = pick_random_supervisors(&groups, &mut rng);
    Grouping::new(graph, groups, supervisors)
}

fn pick_random_supervisors(groups: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    groups
        .iter()
        .map(|members| members[rng.random_range(0..members.len())])
        .collect()
}

/// Default k-means thresholds: max in-group distance of half the graph
/// diameter (rounded up) and max group size of twice the even share.
pub fn kmeans_defaults(graph: &Graph, k: usize) -> Result<(usize, usize), GroupingError> {
    if k == 0 || k > graph.n() {
        return Err(GroupingError::InvalidK(format!(
            "k={k} outside 1..={}",
            graph.n()
        )));
    }
    let diameter = graph
        .diameter()
        .ok_or_else(|| GroupingError::InvalidParams("graph must be connected".into()))?;
    let dist_max = diameter.div_ceil(2).max(1);
    let size_max = 2 * graph.n().div_ceil(k);
    Ok((dist_max, size_max))
}

/// Lloyd-style clustering on hop distance with the two domain adjustments:
/// nodes farther than `dist_max` from their center are reassigned, and
/// groups at `size_max` stop accepting. The final 1-median of each group
/// becomes its supervisor.
pub fn group_kmeans(
    graph: &Graph,
    k: usize,
    dist_max: usize,
    size_max: usize,
    seed: u64,
) -> Result<(Grouping, Vec<String>), GroupingError> {
    let n = graph.n();
    if k == 0 || k > n {
        return Err(GroupingError::InvalidK(format!("k={k} outside 1..={n}")));
    }
    if dist_max == 0 {
        return Err(GroupingError::InvalidParams("dist_max must be >= 1".into()));
    }
    if size_max < n.div_ceil(k) {
        return Err(GroupingError::InvalidParams(format!(
            "size_max={size_max} below ceil(n/k)={}",
            n.div_ceil(k)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            graph
                .bfs_distances(u)
                .into_iter()
                .map(|d| d.unwrap_or(usize::MAX / 2))
                .collect()
        })
        .collect();

    let mut centers: Vec<usize> = (0..n).collect();
    centers.shuffle(&mut rng);
    centers.truncate(k);

    // Nearest-center assignment; ties are redrawn uniformly each pass, per
    // the mechanism's tie rule, so a pass only counts as stable when every
    // node lands where it already was.
    let mut assign = vec![usize::MAX; n];
    let mut tied: Vec<usize> = Vec::new();
    let mut assign_pass = |centers: &[usize], assign: &mut [usize], rng: &mut ChaCha8Rng| -> usize {
        let mut moves = 0;
        for node in 0..n {
            let best = centers.iter().map(|&c| dist[node][c]).min().expect("k >= 1");
            tied.clear();
            tied.extend(
                centers
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| dist[node][c] == best)
                    .map(|(gi, _)| gi),
            );
            let choice = if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.random_range(0..tied.len())]
            };
            if assign[node] != choice {
                moves += 1;
                assign[node] = choice;
            }
        }
        moves
    };

    assign_pass(&centers, &mut assign, &mut rng);
    for _pass in 0..100 {
        for gi in 0..k {
            let members: Vec<usize> = (0..n).filter(|&v| assign[v] == gi).collect();
            centers[gi] = one_median(&members, &dist);
        }
        if assign_pass(&centers, &mut assign, &mut rng) == 0 {
            break;
        }
    }

    // Adjustment 1: pull back nodes beyond dist_max. Adjustment 2: full
    // groups no longer accept. A node with no admissible group goes to the
    // nearest non-full one regardless of distance, recorded as a warning.
    let mut sizes = vec![0usize; k];
    for &g in &assign {
        sizes[g] += 1;
    }
    let mut warnings = Vec::new();
    for node in 0..n {
        let g = assign[node];
        if dist[node][centers[g]] <= dist_max {
            continue;
        }
        let admissible = (0..k)
            .filter(|&gi| gi != g && sizes[gi] < size_max && dist[node][centers[gi]] <= dist_max)
            .min_by_key(|&gi| (dist[node][centers[gi]], gi));
        let target = match admissible {
            Some(gi) => gi,
            None => {
                let fallback = (0..k)
                    .filter(|&gi| gi != g && sizes[gi] < size_max)
                    .min_by_key(|&gi| (dist[node][centers[gi]], gi));
                match fallback {
                    Some(gi) => {
                        warnings.push(format!(
                            "node {node} beyond dist_max of every non-full group; assigned to nearest non-full group {gi}"
                        ));
                        gi
                    }
                    None => {
                        warnings.push(format!(
                            "node {node} beyond dist_max but every other group is full; left in place"
                        ));
                        continue;
                    }
                }
            }
        };
        sizes[g] -= 1;
        sizes[target] += 1;
        assign[node] = target;
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for node in 0..n {
        groups[assign[node]].push(node);
    }
    let supervisors: Vec<usize> = groups.iter().map(|m| one_median(m, &dist)).collect();
    Ok((Grouping::new(graph, groups, supervisors), warnings))
}

/// Group member minimizing the total hop distance to the rest of the group;
/// ties go to the lowest node id.
fn one_median(members: &[usize], dist: &[Vec<usize>]) -> usize {
    members
        .iter()
        .copied()
        .min_by_key(|&cand| (members.iter().map(|&m| dist[cand][m]).sum::<usize>(), cand))
        .expect("group is nonempty")
}

/// Objective direction for Kernighan-Lin refinement. `MinCut` is the
/// classic algorithm; `LiteralPaper` inverts it (exchanges are accepted
/// while they grow the cut), matching a literal reading of the mechanism's
/// description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlObjective {
    MinCut,
    LiteralPaper,
}

/// Recursive Kernighan-Lin bisection into `k` groups (`k` a power of two).
/// Supervisors are the highest-degree node of each group.
pub fn group_kernighan_lin(graph: &Graph, k: usize, seed: u64) -> Result<Grouping, GroupingError> {
    group_kernighan_lin_with(graph, k, seed, KlObjective::MinCut)
}

pub fn group_kernighan_lin_with(
    graph: &Graph,
    k: usize,
    seed: u64,
    objective: KlObjective,
) -> Result<Grouping, GroupingError> {
    let n = graph.n();
    if k == 0 || !k.is_power_of_two() {
        return Err(GroupingError::InvalidK(format!("k={k} is not a power of two")));
    }
    if k > n {
        return Err(GroupingError::InvalidK(format!("k={k} exceeds n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<Vec<usize>> = vec![(0..n).collect()];
    while parts.len() < k {
        let mut next = Vec::with_capacity(parts.len() * 2);
        for part in parts {
            let (a, b) = kl_bisect(graph, &part, &mut rng, objective);
            next.push(a);
            next.push(b);
        }
        parts = next;
    }
    let supervisors = parts
        .iter()
        .map(|members| {
            members
                .iter()
                .copied()
                .max_by(|&a, &b| graph.degree(a).cmp(&graph.degree(b)).then(b.cmp(&a)))
                .expect("group is nonempty")
        })
        .collect();
    Ok(Grouping::new(graph, parts, supervisors))
}

/// One Kernighan-Lin bisection of `nodes` into two halves (sizes differing
/// by at most one), using unit edge costs and ignoring edges leaving
/// `nodes`. Swap passes are accepted while they improve the objective.
fn kl_bisect(
    graph: &Graph,
    nodes: &[usize],
    rng: &mut ChaCha8Rng,
    objective: KlObjective,
) -> (Vec<usize>, Vec<usize>) {
    let len = nodes.len();
    let mut order: Vec<usize> = nodes.to_vec();
    order.shuffle(rng);
    let half = len.div_ceil(2);
    // side[i] over local indices; local adjacency restricted to `nodes`.
    let index_of: std::collections::HashMap<usize, usize> = order
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let local_adj: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| {
            graph
                .neighbors(v)
                .iter()
                .filter_map(|w| index_of.get(w).copied())
                .collect()
        })
        .collect();
    let mut in_a: Vec<bool> = (0..len).map(|i| i < half).collect();
    let sign = match objective {
        KlObjective::MinCut => 1.0,
        KlObjective::LiteralPaper => -1.0,
    };

    loop {
        // D[v] = external - internal cost; gain of swapping (a, b) is
        // D[a] + D[b] - 2 w(a, b).
        let mut d: Vec<f64> = (0..len)
            .map(|i| {
                let mut ext = 0.0;
                let mut int = 0.0;
                for &j in &local_adj[i] {
                    if in_a[j] == in_a[i] {
                        int += 1.0;
                    } else {
                        ext += 1.0;
                    }
                }
                ext - int
            })
            .collect();
        let mut locked = vec![false; len];
        let mut swaps: Vec<(usize, usize, f64)> = Vec::new();
        let pair_budget = len / 2.min(len);
        for _ in 0..pair_budget {
            let mut best: Option<(usize, usize, f64)> = None;
            for a in 0..len {
                if locked[a] || !in_a[a] {
                    continue;
                }
                for b in 0..len {
                    if locked[b] || in_a[b] {
                        continue;
                    }
                    let w = if local_adj[a].contains(&b) { 1.0 } else { 0.0 };
                    let gain = sign * (d[a] + d[b] - 2.0 * w);
                    if best.map_or(true, |(_, _, g)| gain > g) {
                        best = Some((a, b, gain));
                    }
                }
            }
            let Some((a, b, gain)) = best else { break };
            locked[a] = true;
            locked[b] = true;
            swaps.push((a, b, gain));
            for x in 0..len {
                if locked[x] {
                    continue;
                }
                let wa = if local_adj[x].contains(&a) { 1.0 } else { 0.0 };
                let wb = if local_adj[x].contains(&b) { 1.0 } else { 0.0 };
                if in_a[x] {
                    d[x] += 2.0 * wa - 2.0 * wb;
                } else {
                    d[x] += 2.0 * wb - 2.0 * wa;
                }
            }
        }
        // Best prefix of the tentative swap sequence.
        let mut best_prefix = 0;
        let mut best_total = 0.0;
        let mut running = 0.0;
        for (i, &(_, _, g)) in swaps.iter().enumerate() {
            running += g;
            if running > best_total {
                best_total = running;
                best_prefix = i + 1;
            }
        }
        if best_prefix == 0 {
            break;
        }
        for &(a, b, _) in &swaps[..best_prefix] {
            in_a[a] = false;
            in_a[b] = true;
        }
    }

    let mut a = Vec::with_capacity(half);
    let mut b = Vec::with_capacity(len - half);
    for (i, &v) in order.iter().enumerate() {
        if in_a[i] {
            a.push(v);
        } else {
            b.push(v);
        }
    }
    (a, b)
}
