//! Ensemble plumbing: per-realization seed derivation, parallel realization
//! runs, and order-independent aggregation (results never depend on how many
//! workers executed them).

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::SnapshotSample;
use crate::netgen::{self, Graph, GrowthConfig, NetgenError};
use crate::routing::{self, DistanceMatrix, RoutingError};
use crate::stats;
use crate::traffic::{self, PlanSpec, RunOptions, TrafficError};

/// Stream tags keep graph-growth, traffic and per-point sub-master seeds on
/// disjoint sequences derived from one master seed.
pub const STREAM_GRAPH: u64 = 1;
pub const STREAM_TRAFFIC: u64 = 2;
pub const STREAM_POINT: u64 = 3;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for (stream, index) from a master seed. Two chained
/// splitmix64 finalizers; deterministic and platform-independent.
pub fn derive_seed(master: u64, index: u64, stream: u64) -> u64 {
    let z = splitmix64(master ^ stream.wrapping_mul(GOLDEN));
    splitmix64(z ^ index.wrapping_mul(GOLDEN))
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("empty ensemble")]
    Empty,
}

/// Graph parameters without a seed; realization r of an ensemble uses
/// seed = derive_seed(master, r, STREAM_GRAPH).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphShape {
    pub n: usize,
    pub m: usize,
    pub p: f64,
}

impl GraphShape {
    pub fn config(&self, seed: u64) -> GrowthConfig {
        GrowthConfig {
            n: self.n,
            m: self.m,
            p: self.p,
            seed,
        }
    }
}

/// One generated graph with its distance table.
pub struct GraphInstance {
    pub graph: Graph,
    pub dist: DistanceMatrix,
    pub seed: u64,
}

fn build_instance(shape: &GraphShape, master: u64, index: usize) -> Result<GraphInstance, EnsembleError> {
    let seed = derive_seed(master, index as u64, STREAM_GRAPH);
    let graph = netgen::generate_network(&shape.config(seed))?;
    let dist = routing::compute_distances(&graph)?;
    Ok(GraphInstance { graph, dist, seed })
}

/// Generate `count` graphs (held in memory; ~2 MB each at N=1000).
pub fn build_ensemble(
    shape: &GraphShape,
    count: usize,
    master: u64,
) -> Result<Vec<GraphInstance>, EnsembleError> {
    if count == 0 {
        return Err(EnsembleError::Empty);
    }
    (0..count)
        .into_par_iter()
        .map(|r| build_instance(shape, master, r))
        .collect()
}

/// Ensemble means of the per-step series (all entries are means over
/// realizations; realization r's traffic seed is derive_seed(master, r,
/// STREAM_TRAFFIC), so the same master re-pairs runs across plans).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSeries {
    pub created_cum: Vec<f64>,
    pub delivered_cum: Vec<f64>,
    pub in_flight: Vec<f64>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub realizations: usize,
}

impl MeanSeries {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "t,created_cum,delivered_cum,in_flight,n1,n2")?;
        for i in 0..self.n1.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                self.created_cum[i],
                self.delivered_cum[i],
                self.in_flight[i],
                self.n1[i],
                self.n2[i]
            )?;
        }
        Ok(())
    }

    /// Mean delivered-per-step rate over the inclusive step window.
    pub fn delivery_rate(&self, window: (u32, u32)) -> f64 {
        let (t1, t2) = (window.0 as usize, window.1 as usize);
        assert!(t1 >= 1 && t1 < t2 && t2 <= self.delivered_cum.len());
        (self.delivered_cum[t2 - 1] - self.delivered_cum[t1 - 1]) as f64 / (t2 - t1) as f64
    }
}

/// Run the plan over every graph of the ensemble and average the series.
pub fn mean_series(
    ensemble: &[GraphInstance],
    spec: &PlanSpec,
    t_max: u32,
    master: u64,
) -> Result<MeanSeries, EnsembleError> {
    if ensemble.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let runs: Result<Vec<_>, EnsembleError> = ensemble
        .par_iter()
        .enumerate()
        .map(|(r, inst)| {
            let plan = spec.resolve(&inst.graph)?;
            let opts = RunOptions::new(t_max, derive_seed(master, r as u64, STREAM_TRAFFIC));
            Ok(traffic::run(&inst.graph, &inst.dist, &plan, &opts))
        })
        .collect();
    let runs = runs?;
    let steps = t_max as usize;
    let mut out = MeanSeries {
        created_cum: vec![0.0; steps],
        delivered_cum: vec![0.0; steps],
        in_flight: vec![0.0; steps],
        n1: vec![0.0; steps],
        n2: vec![0.0; steps],
        realizations: runs.len(),
    };
    // sequential fold in realization order: byte-identical output for any
    // worker count
    let scale = 1.0 / runs.len() as f64;
    for series in &runs {
        for i in 0..steps {
            out.created_cum[i] += series.created_cum[i] as f64 * scale;
            out.delivered_cum[i] += series.delivered_cum[i] as f64 * scale;
            out.in_flight[i] += series.in_flight[i] as f64 * scale;
            out.n1[i] += series.n1[i] * scale;
            out.n2[i] += series.n2[i] * scale;
        }
    }
    Ok(out)
}

/// Run the plan to step `t` on each graph of a prebuilt ensemble and keep the
/// per-node snapshots. Sharing the ensemble keeps the graphs paired when the
/// same plan family is snapshotted at several (β, approach) combinations.
pub fn snapshot_over(
    ensemble: &[GraphInstance],
    spec: &PlanSpec,
    t: u32,
    master: u64,
) -> Result<Vec<SnapshotSample>, EnsembleError> {
    if ensemble.is_empty() {
        return Err(EnsembleError::Empty);
    }
    ensemble
        .par_iter()
        .enumerate()
        .map(|(r, inst)| {
            let plan = spec.resolve(&inst.graph)?;
            let opts = RunOptions {
                t_max: t,
                seed: derive_seed(master, r as u64, STREAM_TRAFFIC),
                snapshot_times: vec![t],
            };
            let series = traffic::run(&inst.graph, &inst.dist, &plan, &opts);
            let snap = series.snapshots.into_iter().next().expect("snapshot at t");
            Ok(SnapshotSample {
                t,
                degrees: inst.graph.degrees().to_vec(),
                queue_len: snap.queue_len,
            })
        })
        .collect()
}

/// Build graph r, run the plan to step `t`, and keep the per-node snapshot —
/// one realization at a time (graphs are not retained).
pub fn collect_snapshots(
    shape: &GraphShape,
    spec: &PlanSpec,
    t: u32,
    count: usize,
    master: u64,
) -> Result<Vec<SnapshotSample>, EnsembleError> {
    if count == 0 {
        return Err(EnsembleError::Empty);
    }
    (0..count)
        .into_par_iter()
        .map(|r| {
            let inst = build_instance(shape, master, r)?;
            let plan = spec.resolve(&inst.graph)?;
            let opts = RunOptions {
                t_max: t,
                seed: derive_seed(master, r as u64, STREAM_TRAFFIC),
                snapshot_times: vec![t],
            };
            let series = traffic::run(&inst.graph, &inst.dist, &plan, &opts);
            let snap = series.snapshots.into_iter().next().expect("snapshot at t");
            Ok(SnapshotSample {
                t,
                degrees: inst.graph.degrees().to_vec(),
                queue_len: snap.queue_len,
            })
        })
        .collect()
}

/// Ensemble means (with standard errors) of the structural observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralStats {
    pub h_mean: f64,
    pub h_stderr: f64,
    pub kmax_mean: f64,
    pub kmax_stderr: f64,
    pub count: usize,
}

/// Measure mean path length and max degree over `count` fresh graphs.
pub fn structural_stats(
    shape: &GraphShape,
    count: usize,
    master: u64,
) -> Result<StructuralStats, EnsembleError> {
    if count == 0 {
        return Err(EnsembleError::Empty);
    }
    let samples: Result<Vec<(f64, f64)>, EnsembleError> = (0..count)
        .into_par_iter()
        .map(|r| {
            let inst = build_instance(shape, master, r)?;
            let h = netgen::mean_path_length(&inst.graph, &inst.dist);
            Ok((h, inst.graph.k_max() as f64))
        })
        .collect();
    let samples = samples?;
    let hs: Vec<f64> = samples.iter().map(|&(h, _)| h).collect();
    let ks: Vec<f64> = samples.iter().map(|&(_, k)| k).collect();
    let (h_mean, h_stderr) = stats::mean_stderr(&hs);
    let (kmax_mean, kmax_stderr) = stats::mean_stderr(&ks);
    Ok(StructuralStats {
        h_mean,
        h_stderr,
        kmax_mean,
        kmax_stderr,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{Approach, HubSelection};

    #[test]
    fn derive_seed_is_stable_and_stream_separated() {
        let a = derive_seed(42, 0, STREAM_GRAPH);
        assert_eq!(a, derive_seed(42, 0, STREAM_GRAPH));
        assert_ne!(a, derive_seed(42, 1, STREAM_GRAPH));
        assert_ne!(a, derive_seed(42, 0, STREAM_TRAFFIC));
        assert_ne!(a, derive_seed(43, 0, STREAM_GRAPH));
    }

    #[test]
    fn ensemble_graphs_differ_but_rebuild_identically() {
        let shape = GraphShape { n: 60, m: 3, p: 0.0 };
        let a = build_ensemble(&shape, 3, 7).unwrap();
        let b = build_ensemble(&shape, 3, 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.graph, y.graph);
        }
        assert_ne!(a[0].graph, a[1].graph);
    }

    #[test]
    fn mean_series_of_single_run_matches_run() {
        let shape = GraphShape { n: 50, m: 3, p: 0.0 };
        let ensemble = build_ensemble(&shape, 1, 11).unwrap();
        let spec = PlanSpec {
            lambda: 0.05,
            beta: 0.1,
            approach: Approach::Normal,
            hubs: HubSelection::TopFraction(0.1),
        };
        let ms = mean_series(&ensemble, &spec, 40, 11).unwrap();
        let plan = spec.resolve(&ensemble[0].graph).unwrap();
        let opts = RunOptions::new(40, derive_seed(11, 0, STREAM_TRAFFIC));
        let single = traffic::run(&ensemble[0].graph, &ensemble[0].dist, &plan, &opts);
        for i in 0..40 {
            assert_eq!(ms.n1[i], single.n1[i]);
            assert_eq!(ms.created_cum[i], single.created_cum[i] as f64);
        }
    }

    #[test]
    fn snapshot_over_matches_streaming_collector() {
        let shape = GraphShape { n: 60, m: 3, p: 0.0 };
        let spec = PlanSpec {
            lambda: 0.03,
            beta: 0.05,
            approach: Approach::Normal,
            hubs: HubSelection::TopFraction(0.1),
        };
        let ensemble = build_ensemble(&shape, 4, 9).unwrap();
        let shared = snapshot_over(&ensemble, &spec, 15, 9).unwrap();
        let streamed = collect_snapshots(&shape, &spec, 15, 4, 9).unwrap();
        assert_eq!(shared, streamed);
    }

    #[test]
    fn snapshots_pair_graphs_across_plans() {
        let shape = GraphShape { n: 50, m: 3, p: 0.0 };
        let normal = PlanSpec {
            lambda: 0.02,
            beta: 0.1,
            approach: Approach::Normal,
            hubs: HubSelection::TopFraction(0.1),
        };
        let efficient = PlanSpec {
            approach: Approach::Efficient,
            ..normal
        };
        let a = collect_snapshots(&shape, &normal, 20, 3, 5).unwrap();
        let b = collect_snapshots(&shape, &efficient, 20, 3, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.degrees, y.degrees); // same graphs underneath
        }
    }

    #[test]
    fn structural_stats_small_graph_sane() {
        let shape = GraphShape { n: 100, m: 3, p: 0.0 };
        let s = structural_stats(&shape, 5, 3).unwrap();
        assert!(s.h_mean > 1.0 && s.h_mean < 5.0);
        assert!(s.kmax_mean >= 3.0);
        assert!(s.h_stderr >= 0.0);
        assert_eq!(s.count, 5);
    }

    #[test]
    fn delivery_rate_window() {
        let ms = MeanSeries {
            created_cum: vec![0.0; 4],
            delivered_cum: vec![10.0, 20.0, 30.0, 40.0],
            in_flight: vec![0.0; 4],
            n1: vec![0.0; 4],
            n2: vec![0.0; 4],
            realizations: 1,
        };
        assert_eq!(ms.delivery_rate((1, 4)), 10.0);
    }
}
