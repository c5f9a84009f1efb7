//! Growing-network construction.
//!
//! Networks grow from a complete seed clique on m+1 nodes; every later node
//! attaches to m distinct existing nodes, each target drawn with probability
//! proportional to (1-p)·k_i + p over the existing nodes. p=0 is pure
//! preferential attachment (power-law degrees, exponent 3), p=1 is uniform
//! random attachment (exponential degrees), and intermediate p interpolates
//! with exponent 3 + p/[m(1-p)].
//!
//! Sampling is O(1) per draw: an endpoint list holds both ends of every edge,
//! so a uniform pick from it is degree-proportional; the mixture weight
//! between that list and a uniform node pick reproduces (1-p)k + p exactly.
//! Collisions (target already chosen by this node) are re-drawn.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("invalid growth config: {0}")]
    InvalidConfig(String),
    #[error("malformed edge list: {0}")]
    MalformedEdges(String),
}

/// Parameters of the growth process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConfig {
    /// Final node count (≥ m+1).
    pub n: usize,
    /// Edges added per new node (≥ 1).
    pub m: usize,
    /// Random-attachment probability in [0, 1].
    pub p: f64,
    pub seed: u64,
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<(), NetgenError> {
        if self.m < 1 {
            return Err(NetgenError::InvalidConfig(format!("m = {} < 1", self.m)));
        }
        if self.n < self.m + 1 {
            return Err(NetgenError::InvalidConfig(format!(
                "N = {} < m + 1 = {}",
                self.n,
                self.m + 1
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(NetgenError::InvalidConfig(format!(
                "p = {} outside [0, 1]",
                self.p
            )));
        }
        Ok(())
    }
}

/// Undirected simple graph; adjacency lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Graph {
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let degrees = adjacency.iter().map(Vec::len).collect();
        Graph { adjacency, degrees }
    }

    /// Build a graph from explicit edges (mainly for tests and hand-built
    /// fixtures). Rejects self-loops, duplicate edges and out-of-range ids;
    /// does not require connectivity.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph, NetgenError> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(NetgenError::MalformedEdges(format!(
                    "edge ({u}, {v}) out of range for N = {n}"
                )));
            }
            if u == v {
                return Err(NetgenError::MalformedEdges(format!("self-loop at {u}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(NetgenError::MalformedEdges(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        Ok(Graph::from_adjacency(adjacency))
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Highest degree in the graph.
    pub fn k_max(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Exact degree counts, keyed by degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub n: usize,
}

pub fn degree_histogram(graph: &Graph) -> DegreeHistogram {
    let mut counts = BTreeMap::new();
    for &k in graph.degrees() {
        *counts.entry(k).or_insert(0) += 1;
    }
    DegreeHistogram {
        counts,
        n: graph.node_count(),
    }
}

/// Grow a network according to `config`. Deterministic in the seed.
pub fn generate_network(config: &GrowthConfig) -> Result<Graph, NetgenError> {
    config.validate()?;
    let (n, m, p) = (config.n, config.m, config.p);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    // Both endpoints of every edge; uniform picks from this list are
    // degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(m * (m + 1) + 2 * m * (n - m - 1));

    let add_edge = |adjacency: &mut Vec<Vec<usize>>, endpoints: &mut Vec<usize>, u: usize, v: usize| {
        adjacency[u].push(v);
        adjacency[v].push(u);
        endpoints.push(u);
        endpoints.push(v);
    };

    for u in 0..=m {
        for v in (u + 1)..=m {
            add_edge(&mut adjacency, &mut endpoints, u, v);
        }
    }

    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for new in (m + 1)..n {
        let existing = new; // nodes 0..new already placed
        chosen.clear();
        while chosen.len() < m {
            let target = if p < 1.0 {
                let two_e = endpoints.len() as f64;
                let total = (1.0 - p) * two_e + p * existing as f64;
                if rng.gen::<f64>() * total < (1.0 - p) * two_e {
                    endpoints[rng.gen_range(0..endpoints.len())]
                } else {
                    rng.gen_range(0..existing)
                }
            } else {
                rng.gen_range(0..existing)
            };
            if !chosen.contains(&target) {
                chosen.push(target);
            }
        }
        for i in 0..m {
            add_edge(&mut adjacency, &mut endpoints, new, chosen[i]);
        }
    }

    Ok(Graph::from_adjacency(adjacency))
}

/// Mean shortest-path hop count weighted by the origin's degree, i.e. the
/// average path length of a *packet*: packets are created at node s at rate
/// λk_s, so origins contribute in proportion to their degree. For regular
/// graphs this coincides with the plain ordered-pair mean.
pub fn mean_path_length(graph: &Graph, distances: &crate::routing::DistanceMatrix) -> f64 {
    let n = graph.node_count();
    assert_eq!(n, distances.node_count(), "distance matrix size mismatch");
    assert!(n >= 2, "path length needs at least two nodes");
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    for s in 0..n {
        let k = graph.degree(s) as f64;
        if k == 0.0 {
            continue;
        }
        let mut sum = 0u64;
        for t in 0..n {
            if t != s {
                sum += distances.get(s, t) as u64;
            }
        }
        weighted += k * sum as f64;
        total_weight += k * (n - 1) as f64;
    }
    weighted / total_weight
}

/// Least-squares power-law exponent of P(k) on log-log axes over
/// k ∈ [m, highest degree with ≥ 5 nodes]. Sanity-check quality only; the
/// estimate is biased low by the distribution's curvature at small k.
pub fn fit_power_law_gamma(hist: &DegreeHistogram, m: usize) -> Option<f64> {
    let k_hi = hist
        .counts
        .iter()
        .filter(|&(_, &c)| c >= 5)
        .map(|(&k, _)| k)
        .max()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&k, &count) in hist.counts.range(m..=k_hi) {
        if count > 0 {
            xs.push((k as f64).ln());
            ys.push((count as f64 / hist.n as f64).ln());
        }
    }
    crate::stats::linear_fit(&xs, &ys).map(|fit| -fit.slope)
}

/// Least-squares exponential decay rate c of P(k) ~ e^{-ck} over the same
/// range as `fit_power_law_gamma`.
pub fn fit_exponential_rate(hist: &DegreeHistogram, m: usize) -> Option<f64> {
    let k_hi = hist
        .counts
        .iter()
        .filter(|&(_, &c)| c >= 5)
        .map(|(&k, _)| k)
        .max()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&k, &count) in hist.counts.range(m..=k_hi) {
        if count > 0 {
            xs.push(k as f64);
            ys.push((count as f64 / hist.n as f64).ln());
        }
    }
    crate::stats::linear_fit(&xs, &ys).map(|fit| -fit.slope)
}

/// Edge-list text export: `# N=<N> m=<m> p=<p> seed=<seed>` header, then one
/// `u v` line per edge with u < v, sorted.
pub fn write_edge_list<W: Write>(
    graph: &Graph,
    config: &GrowthConfig,
    out: &mut W,
) -> io::Result<()> {
    writeln!(
        out,
        "# N={} m={} p={} seed={}",
        config.n, config.m, config.p, config.seed
    )?;
    for u in 0..graph.node_count() {
        for &v in graph.neighbors(u) {
            if u < v {
                writeln!(out, "{u} {v}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, m: usize, p: f64, seed: u64) -> GrowthConfig {
        GrowthConfig { n, m, p, seed }
    }

    #[test]
    fn growth_stops_at_seed_clique() {
        let g = generate_network(&cfg(4, 3, 0.0, 7)).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 6);
        for u in 0..4 {
            assert_eq!(g.degree(u), 3);
        }
    }

    #[test]
    fn edge_count_formula_holds() {
        for &(n, m, p) in &[(50, 1, 0.0), (200, 3, 0.0), (120, 3, 0.5), (80, 5, 1.0)] {
            let g = generate_network(&cfg(n, m, p, 11)).unwrap();
            let expected = m * (m + 1) / 2 + m * (n - m - 1);
            assert_eq!(g.edge_count(), expected, "N={n} m={m} p={p}");
        }
    }

    #[test]
    fn post_seed_nodes_have_degree_at_least_m() {
        let m = 3;
        let g = generate_network(&cfg(300, m, 0.25, 3)).unwrap();
        for u in (m + 1)..300 {
            assert!(g.degree(u) >= m);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_network(&cfg(3, 3, 0.0, 1)).is_err());
        assert!(generate_network(&cfg(10, 0, 0.0, 1)).is_err());
        assert!(generate_network(&cfg(10, 3, 1.5, 1)).is_err());
        assert!(generate_network(&cfg(10, 3, -0.1, 1)).is_err());
    }

    #[test]
    fn determinism_same_seed_same_graph() {
        let a = generate_network(&cfg(400, 3, 0.3, 99)).unwrap();
        let b = generate_network(&cfg(400, 3, 0.3, 99)).unwrap();
        assert_eq!(a, b);
        let c = generate_network(&cfg(400, 3, 0.3, 100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn histogram_counts_sum_to_n() {
        let g = generate_network(&cfg(500, 3, 0.0, 5)).unwrap();
        let h = degree_histogram(&g);
        assert_eq!(h.counts.values().sum::<usize>(), 500);
        assert!(h.counts[&3] > 0);
    }

    #[test]
    fn k4_histogram() {
        let g = generate_network(&cfg(4, 3, 0.0, 1)).unwrap();
        let h = degree_histogram(&g);
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.counts[&3], 4);
    }

    #[test]
    fn star_k_max() {
        // hub 0, leaves 1..=5
        let g = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        assert_eq!(g.k_max(), 5);
    }

    #[test]
    fn from_edges_rejects_malformed() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 5)]).is_err());
    }

    #[test]
    fn k4_mean_path_length_is_one() {
        let g = generate_network(&cfg(4, 3, 0.0, 1)).unwrap();
        let d = crate::routing::compute_distances(&g).unwrap();
        assert_eq!(mean_path_length(&g, &d), 1.0);
    }

    #[test]
    fn edge_list_format() {
        let g = Graph::from_edges(3, &[(1, 2), (0, 1)]).unwrap();
        let c = cfg(3, 1, 0.5, 42);
        let mut buf = Vec::new();
        write_edge_list(&g, &c, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# N=3 m=1 p=0.5 seed=42\n0 1\n1 2\n"
        );
    }

    #[test]
    fn scale_free_exponent_near_three() {
        let g = generate_network(&cfg(1000, 3, 0.0, 17)).unwrap();
        let gamma = fit_power_law_gamma(&degree_histogram(&g), 3).unwrap();
        assert!(
            (2.2..=3.6).contains(&gamma),
            "fitted exponent {gamma} far from 3"
        );
    }

    #[test]
    fn random_limit_exponential_rate_near_inverse_m() {
        let g = generate_network(&cfg(1000, 3, 1.0, 17)).unwrap();
        let rate = fit_exponential_rate(&degree_histogram(&g), 3).unwrap();
        assert!(
            (0.15..=0.55).contains(&rate),
            "fitted decay rate {rate} far from 1/m = 0.33"
        );
    }
}
