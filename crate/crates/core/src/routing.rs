//! All-pairs hop distances (BFS per source) and per-hop next-node selection.
//!
//! Routing is per-hop: at each forwarding event the candidate set is every
//! neighbor one hop closer to the destination (read off the static distance
//! table), and ties are broken by the instantaneous queue snapshot, uniformly
//! at random among equals. Any walk built this way is a shortest path.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::netgen::Graph;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("graph is disconnected: node {unreachable} unreachable from {from}")]
    Disconnected { from: usize, unreachable: usize },
}

/// Flat N×N table of hop counts. Immutable once built; cheap to share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<u16>,
}

impl DistanceMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.dist[u * self.n + v]
    }
}

/// Exact hop distances via breadth-first search from every node.
/// Fails on disconnected graphs.
pub fn compute_distances(graph: &Graph) -> Result<DistanceMatrix, RoutingError> {
    let n = graph.node_count();
    let mut dist = vec![u16::MAX; n * n];
    dist.par_chunks_mut(n).enumerate().for_each(|(source, row)| {
        let mut queue = VecDeque::new();
        row[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &v in graph.neighbors(u) {
                if row[v] == u16::MAX {
                    row[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    });
    for from in 0..n {
        if let Some(unreachable) = (0..n).find(|&v| dist[from * n + v] == u16::MAX) {
            return Err(RoutingError::Disconnected { from, unreachable });
        }
    }
    Ok(DistanceMatrix { n, dist })
}

/// Neighbors of `u` that are one hop closer to `t`; non-empty on a connected
/// graph. Panics if `u == t` (routing a packet already at its destination is
/// a caller bug).
pub fn next_hop_candidates(
    graph: &Graph,
    dist: &DistanceMatrix,
    u: usize,
    t: usize,
) -> Vec<usize> {
    let mut buf = Vec::new();
    next_hop_candidates_into(graph, dist, u, t, &mut buf);
    buf
}

/// Allocation-free variant for the simulation hot path.
#[inline]
pub fn next_hop_candidates_into(
    graph: &Graph,
    dist: &DistanceMatrix,
    u: usize,
    t: usize,
    buf: &mut Vec<usize>,
) {
    assert_ne!(u, t, "next-hop requested for a packet at its destination");
    buf.clear();
    let want = dist.get(u, t) - 1;
    for &v in graph.neighbors(u) {
        if dist.get(v, t) == want {
            buf.push(v);
        }
    }
}

/// Pick the candidate with the shortest queue; ties uniform at random.
/// Panics on an empty candidate set.
pub fn select_next_hop<R: Rng>(candidates: &[usize], queue_lengths: &[u32], rng: &mut R) -> usize {
    assert!(!candidates.is_empty(), "empty next-hop candidate set");
    let min = candidates
        .iter()
        .map(|&v| queue_lengths[v])
        .min()
        .expect("non-empty");
    let ties = candidates
        .iter()
        .filter(|&&v| queue_lengths[v] == min)
        .count();
    let pick = if ties == 1 { 0 } else { rng.gen_range(0..ties) };
    candidates
        .iter()
        .copied()
        .filter(|&v| queue_lengths[v] == min)
        .nth(pick)
        .expect("tie index in range")
}
