//! Node centrality metrics used for fixed-agent placement: degree,
//! shortest-path betweenness, closeness, and eigenvector centrality.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Graph, TopologyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CentralityMetric {
    /// Degree centrality: the neighbor count.
    Dc,
    /// Betweenness centrality: shortest paths routed through the node.
    Bc,
    /// Closeness centrality: inverse mean shortest-path distance.
    Cc,
    /// Eigenvector centrality: principal adjacency eigenvector, unit max norm.
    Ec,
}

impl std::fmt::Display for CentralityMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CentralityMetric::Dc => "DC",
            CentralityMetric::Bc => "BC",
            CentralityMetric::Cc => "CC",
            CentralityMetric::Ec => "EC",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores {
    pub metric: CentralityMetric,
    pub scores: Vec<f64>,
}

/// Computes one centrality metric for every node. CC and EC require a
/// connected graph.
pub fn centrality(graph: &Graph, metric: CentralityMetric) -> Result<CentralityScores, TopologyError> {
    let scores = match metric {
        CentralityMetric::Dc => (0..graph.n()).map(|u| graph.degree(u) as f64).collect(),
        CentralityMetric::Bc => betweenness(graph),
        CentralityMetric::Cc => closeness(graph)?,
        CentralityMetric::Ec => eigenvector(graph)?,
    };
    Ok(CentralityScores { metric, scores })
}

/// Brandes' accumulation of shortest-path dependencies. Each unordered pair
/// is counted once, so the star K_{1,4} scores 6 at the hub.
fn betweenness(graph: &Graph) -> Vec<f64> {
    let n = graph.n();
    let mut bc = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        for v in 0..n {
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
            preds[v].clear();
        }
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in graph.neighbors(u) {
                if dist[v] < 0 {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        for &w in order.iter().rev() {
            for &p in &preds[w] {
                delta[p] += sigma[p] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    // Undirected: every pair was accumulated from both endpoints.
    for v in &mut bc {
        *v /= 2.0;
    }
    bc
}

fn closeness(graph: &Graph) -> Result<Vec<f64>, TopologyError> {
    let n = graph.n();
    let mut scores = Vec::with_capacity(n);
    for u in 0..n {
        let mut total = 0usize;
        for d in graph.bfs_distances(u) {
            total += d.ok_or(TopologyError::Disconnected {
                metric: CentralityMetric::Cc,
            })?;
        }
        scores.push(if n > 1 { (n - 1) as f64 / total as f64 } else { 0.0 });
    }
    Ok(scores)
}

/// Power iteration on A + I (the shift keeps bipartite graphs from
/// oscillating), normalized to unit max entry, run to a 1e-10 relative
/// residual of A x = lambda x.
fn eigenvector(graph: &Graph) -> Result<Vec<f64>, TopologyError> {
    if !graph.is_connected() {
        return Err(TopologyError::Disconnected {
            metric: CentralityMetric::Ec,
        });
    }
    let n = graph.n();
    let mut x = vec![1.0f64; n];
    let mut ax = vec![0.0f64; n];
    let apply = |x: &[f64], out: &mut [f64]| {
        for u in 0..n {
            let mut acc = 0.0;
            for &v in graph.neighbors(u) {
                acc += x[v];
            }
            out[u] = acc;
        }
    };
    for _ in 0..200_000 {
        apply(&x, &mut ax);
        let dot_ax: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let dot_xx: f64 = x.iter().map(|a| a * a).sum();
        let lambda = dot_ax / dot_xx;
        let resid: f64 = x
            .iter()
            .zip(&ax)
            .map(|(xi, axi)| (axi - lambda * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if lambda > 0.0 && resid <= 1e-10 * lambda * dot_xx.sqrt() {
            let max = x.iter().cloned().fold(f64::MIN, f64::max);
            for v in &mut x {
                *v /= max;
            }
            return Ok(x);
        }
        let mut max = 0.0f64;
        for u in 0..n {
            ax[u] += x[u]; // shifted iterate (A + I) x
            max = max.max(ax[u]);
        }
        for u in 0..n {
            x[u] = ax[u] / max;
        }
    }
    Err(TopologyError::NoConvergence)
}

/// Sample Pearson correlation coefficient of two equal-length score vectors.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Pairwise Pearson correlations between the four centrality metrics,
/// reported as a placement diagnostic.
pub fn centrality_correlations(
    graph: &Graph,
) -> Result<Vec<((CentralityMetric, CentralityMetric), f64)>, TopologyError> {
    use CentralityMetric::*;
    let metrics = [Dc, Bc, Cc, Ec];
    let scores: Vec<CentralityScores> = metrics
        .iter()
        .map(|&m| centrality(graph, m))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(6);
    for i in 0..4 {
        for j in (i + 1)..4 {
            out.push((
                (metrics[i], metrics[j]),
                pearson(&scores[i].scores, &scores[j].scores),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate, TopologyKind, TopologyParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn star() -> Graph {
        Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap()
    }

    #[test]
    fn star_degree_and_betweenness() {
        let g = star();
        let dc = centrality(&g, CentralityMetric::Dc).unwrap().scores;
        assert_eq!(dc, vec![4.0, 1.0, 1.0, 1.0, 1.0]);
        let bc = centrality(&g, CentralityMetric::Bc).unwrap().scores;
        assert!((bc[0] - 6.0).abs() < 1e-12, "hub routes all 6 leaf pairs");
        assert!(bc[1..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn path_closeness() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let cc = centrality(&g, CentralityMetric::Cc).unwrap().scores;
        assert!((cc[1] - 1.0).abs() < 1e-12);
        assert!((cc[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ring_of_four_is_symmetric_under_all_metrics() {
        let g = generate(
            TopologyKind::Ring,
            4,
            &TopologyParams { degree: 2, ..Default::default() },
            0,
        )
        .unwrap();
        for metric in [
            CentralityMetric::Dc,
            CentralityMetric::Bc,
            CentralityMetric::Cc,
            CentralityMetric::Ec,
        ] {
            let scores = centrality(&g, metric).unwrap().scores;
            for &v in &scores[1..] {
                assert!((v - scores[0]).abs() < 1e-9, "{metric} scores {scores:?}");
            }
        }
    }

    #[test]
    fn disconnected_errors_name_the_metric() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let err = centrality(&g, CentralityMetric::Cc).unwrap_err().to_string();
        assert!(err.contains("CC"), "{err}");
        let err = centrality(&g, CentralityMetric::Ec).unwrap_err().to_string();
        assert!(err.contains("EC"), "{err}");
        assert!(centrality(&g, CentralityMetric::Dc).is_ok());
        assert!(centrality(&g, CentralityMetric::Bc).is_ok());
    }

    #[test]
    fn eigenvector_satisfies_eigen_equation() {
        for (kind, n) in [
            (TopologyKind::SmallWorld, 80),
            (TopologyKind::ScaleFree, 80),
            (TopologyKind::Grid, 36),
        ] {
            let g = generate(kind, n, &TopologyParams::default(), 17).unwrap();
            let x = centrality(&g, CentralityMetric::Ec).unwrap().scores;
            assert!((x.iter().cloned().fold(f64::MIN, f64::max) - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|&v| v >= 0.0));
            let mut ax = vec![0.0; g.n()];
            for u in 0..g.n() {
                ax[u] = g.neighbors(u).iter().map(|&v| x[v]).sum();
            }
            let lambda = ax
                .iter()
                .zip(&x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / x.iter().map(|v| v * v).sum::<f64>();
            let resid = ax
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(resid / (lambda * norm) < 1e-8, "{kind} residual {resid}");
        }
    }

    #[test]
    fn eigenvector_handles_bipartite_graphs() {
        let g = star();
        let x = centrality(&g, CentralityMetric::Ec).unwrap().scores;
        assert!((x[0] - 1.0).abs() < 1e-9);
        // Leaves of K_{1,4} sit at 1/sqrt(4) of the hub.
        for &leaf in &x[1..] {
            assert!((leaf - 0.5).abs() < 1e-8, "leaf {leaf}");
        }
    }

    /// Exhaustive betweenness: enumerate every simple path between each
    /// pair, keep the shortest ones, and tally pass-through credit.
    fn brute_force_betweenness(g: &Graph) -> Vec<f64> {
        let n = g.n();
        let mut bc = vec![0.0; n];
        for s in 0..n {
            for t in (s + 1)..n {
                let mut paths: Vec<Vec<usize>> = Vec::new();
                let mut stack = vec![vec![s]];
                while let Some(path) = stack.pop() {
                    let last = *path.last().unwrap();
                    if last == t {
                        paths.push(path);
                        continue;
                    }
                    for &next in g.neighbors(last) {
                        if !path.contains(&next) {
                            let mut longer = path.clone();
                            longer.push(next);
                            stack.push(longer);
                        }
                    }
                }
                let Some(min_len) = paths.iter().map(Vec::len).min() else {
                    continue;
                };
                let shortest: Vec<&Vec<usize>> =
                    paths.iter().filter(|p| p.len() == min_len).collect();
                let sigma = shortest.len() as f64;
                for path in shortest {
                    for &v in &path[1..path.len() - 1] {
                        bc[v] += 1.0 / sigma;
                    }
                }
            }
        }
        bc
    }

    #[test]
    fn betweenness_matches_brute_force_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..200 {
            let n = rng.random_range(2..=8);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.45 {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            let fast = centrality(&g, CentralityMetric::Bc).unwrap().scores;
            let brute = brute_force_betweenness(&g);
            for v in 0..n {
                assert!(
                    (fast[v] - brute[v]).abs() < 1e-9,
                    "case {case}, node {v}: {} vs {}",
                    fast[v],
                    brute[v]
                );
            }
        }
    }

    #[test]
    fn pearson_basics() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&xs, &ys) - 1.0).abs() < 1e-12);
        let neg = [8.0, 6.0, 4.0, 2.0];
        assert!((pearson(&xs, &neg) + 1.0).abs() < 1e-12);
        let flat = [5.0, 5.0, 5.0, 5.0];
        assert_eq!(pearson(&xs, &flat), 0.0);
    }
}
