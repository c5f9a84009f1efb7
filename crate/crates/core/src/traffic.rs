//! Synchronous packet dynamics.
//!
//! Each time step runs three phases over all nodes at once:
//!
//! 1. creation — node i appends ⌊λk_i⌋ + Bernoulli(frac(λk_i)) new packets
//!    to the back of its own queue, each with a uniformly random destination
//!    among the other N−1 nodes;
//! 2. delivery — a queue-length snapshot is taken (after creation, before any
//!    moves), then node i dequeues up to 1 + ⌊β_i k_i⌋ + Bernoulli(frac) FIFO
//!    packets and forwards each via shortest-path next-hop selection with
//!    snapshot tie-breaking;
//! 3. arrival — packets whose next hop is their destination leave the system;
//!    the rest are appended to their receiver (ascending sender id, then
//!    sender queue order) and become eligible next step.
//!
//! The RNG draw order is fixed: per node, the creation Bernoulli (only when
//! frac(λk_i) > 0) then one destination draw per created packet, over nodes in
//! ascending id; then per node, the quota Bernoulli (only when frac(β_i k_i) >
//! 0, drawn whether or not the queue is empty) and one tie-break draw per
//! forwarded packet that has several minimal-queue candidates. Identical
//! (graph, plan, t_max, seed) therefore reproduce runs bit for bit.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netgen::Graph;
use crate::routing::{self, DistanceMatrix};

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid rate plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    /// Step in which the packet was created (steps count from 1).
    pub created_at: u32,
    pub source: usize,
    pub destination: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    /// β_i = β for every node.
    Normal,
    /// β_i = β on the hub set, 0 elsewhere.
    Efficient,
}

/// How the hub set is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HubSelection {
    /// Top ⌈f·N⌉ nodes by degree, ties broken by node id. f ∈ (0, 1].
    TopFraction(f64),
    /// Every node with degree ≥ the threshold.
    DegreeThreshold(usize),
}

/// Scalar traffic parameters, independent of any particular graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSpec {
    pub lambda: f64,
    pub beta: f64,
    pub approach: Approach,
    pub hubs: HubSelection,
}

impl PlanSpec {
    pub fn resolve(&self, graph: &Graph) -> Result<RatePlan, TrafficError> {
        RatePlan::new(self, graph)
    }
}

/// β sweep template: a `PlanSpec` minus the swept β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficTemplate {
    pub lambda: f64,
    pub approach: Approach,
    pub hubs: HubSelection,
}

impl TrafficTemplate {
    pub fn plan(&self, beta: f64) -> PlanSpec {
        PlanSpec {
            lambda: self.lambda,
            beta,
            approach: self.approach,
            hubs: self.hubs,
        }
    }
}

/// Per-node rates resolved against one graph. The hub set is always recorded
/// (it is the ⟨n₂⟩ measurement set) even under the normal approach.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePlan {
    pub lambda: f64,
    pub beta: f64,
    pub approach: Approach,
    pub beta_per_node: Vec<f64>,
    /// Sorted node ids of the hub set.
    pub hub_set: Vec<usize>,
    // cached per-node integer/fractional rate parts
    create_floor: Vec<u32>,
    create_frac: Vec<f64>,
    quota_base: Vec<u32>, // includes the guaranteed 1
    quota_frac: Vec<f64>,
}

impl RatePlan {
    fn new(spec: &PlanSpec, graph: &Graph) -> Result<RatePlan, TrafficError> {
        if !(spec.lambda >= 0.0) {
            return Err(TrafficError::InvalidPlan(format!(
                "lambda = {} must be ≥ 0",
                spec.lambda
            )));
        }
        if !(spec.beta >= 0.0) {
            return Err(TrafficError::InvalidPlan(format!(
                "beta = {} must be ≥ 0",
                spec.beta
            )));
        }
        let n = graph.node_count();
        if n < 2 {
            return Err(TrafficError::InvalidPlan(
                "need at least two nodes to route packets".into(),
            ));
        }
        let hub_set = match spec.hubs {
            HubSelection::TopFraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(TrafficError::InvalidPlan(format!(
                        "hub fraction f = {f} outside (0, 1]"
                    )));
                }
                let count = (f * n as f64).ceil() as usize;
                let mut ids: Vec<usize> = (0..n).collect();
                ids.sort_by_key(|&i| (std::cmp::Reverse(graph.degree(i)), i));
                let mut hubs = ids[..count.min(n)].to_vec();
                hubs.sort_unstable();
                hubs
            }
            HubSelection::DegreeThreshold(k_thr) => {
                (0..n).filter(|&i| graph.degree(i) >= k_thr).collect()
            }
        };
        let mut beta_per_node = vec![0.0; n];
        match spec.approach {
            Approach::Normal => beta_per_node.fill(spec.beta),
            Approach::Efficient => {
                for &i in &hub_set {
                    beta_per_node[i] = spec.beta;
                }
            }
        }
        let mut create_floor = vec![0u32; n];
        let mut create_frac = vec![0.0; n];
        let mut quota_base = vec![1u32; n];
        let mut quota_frac = vec![0.0; n];
        for i in 0..n {
            let k = graph.degree(i) as f64;
            let c = spec.lambda * k;
            create_floor[i] = c.floor() as u32;
            create_frac[i] = c - c.floor();
            let q = beta_per_node[i] * k;
            quota_base[i] = 1 + q.floor() as u32;
            quota_frac[i] = q - q.floor();
        }
        Ok(RatePlan {
            lambda: spec.lambda,
            beta: spec.beta,
            approach: spec.approach,
            beta_per_node,
            hub_set,
            create_floor,
            create_frac,
            quota_base,
            quota_frac,
        })
    }
}

/// ⌊λk⌋ + Bernoulli(frac(λk)); expectation exactly λk.
pub fn creation_count<R: Rng>(lambda: f64, k: usize, rng: &mut R) -> u32 {
    debug_assert!(lambda >= 0.0 && k >= 1);
    fractional_count(lambda * k as f64, rng)
}

/// 1 + ⌊βk⌋ + Bernoulli(frac(βk)); expectation exactly 1 + βk, always ≥ 1.
pub fn delivery_quota<R: Rng>(beta: f64, k: usize, rng: &mut R) -> u32 {
    debug_assert!(beta >= 0.0 && k >= 1);
    1 + fractional_count(beta * k as f64, rng)
}

#[inline]
fn fractional_count<R: Rng>(x: f64, rng: &mut R) -> u32 {
    let floor = x.floor();
    let frac = x - floor;
    floor as u32 + u32::from(frac > 0.0 && rng.gen_bool(frac))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct InFlight {
    packet: Packet,
    hops: u16,
    id: u64,
}

/// Per-node queue lengths at one instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub t: u32,
    pub queue_len: Vec<u32>,
}

/// Per-step totals plus any requested snapshots from a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Entry i holds the state after step i+1.
    pub created_cum: Vec<u64>,
    pub delivered_cum: Vec<u64>,
    pub in_flight: Vec<u64>,
    /// in-flight / N.
    pub n1: Vec<f64>,
    /// Mean queue length over the hub set.
    pub n2: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Delivered packets whose hop count differed from the shortest-path
    /// distance; always 0 (kept as a run-level audit).
    pub hop_violations: u64,
}

impl TimeSeries {
    pub fn t_max(&self) -> u32 {
        self.n1.len() as u32
    }

    /// CSV export, one row per step.
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
}

/// Per-node snapshot CSV: `node,degree,queue_len`.
pub fn write_snapshot_csv<W: Write>(
    graph: &Graph,
    snapshot: &Snapshot,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "node,degree,queue_len")?;
    for (node, &q) in snapshot.queue_len.iter().enumerate() {
        writeln!(out, "{},{},{}", node, graph.degree(node), q)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub t_max: u32,
    pub seed: u64,
    /// Steps (1-based) at which to record per-node queue lengths.
    pub snapshot_times: Vec<u32>,
}

impl RunOptions {
    pub fn new(t_max: u32, seed: u64) -> RunOptions {
        RunOptions {
            t_max,
            seed,
            snapshot_times: Vec::new(),
        }
    }
}

/// One realization's mutable state. `step` advances a full synchronous step;
/// `run` drives a fresh simulation to t_max and records the series.
pub struct Sim<'a> {
    graph: &'a Graph,
    dist: &'a DistanceMatrix,
    plan: &'a RatePlan,
    rng: ChaCha8Rng,
    queues: Vec<VecDeque<InFlight>>,
    t: u32,
    created: u64,
    delivered: u64,
    delivered_last_step: u64,
    hop_violations: u64,
    next_id: u64,
    // scratch buffers reused across steps
    qsnap: Vec<u32>,
    cand: Vec<usize>,
    forwards: Vec<(usize, InFlight)>,
}

impl<'a> Sim<'a> {
    pub fn new(graph: &'a Graph, dist: &'a DistanceMatrix, plan: &'a RatePlan, seed: u64) -> Sim<'a> {
        let n = graph.node_count();
        assert_eq!(n, dist.node_count(), "distance matrix size mismatch");
        assert_eq!(n, plan.beta_per_node.len(), "plan resolved for another graph");
        Sim {
            graph,
            dist,
            plan,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queues: vec![VecDeque::new(); n],
            t: 0,
            created: 0,
            delivered: 0,
            delivered_last_step: 0,
            hop_violations: 0,
            next_id: 0,
            qsnap: vec![0; n],
            cand: Vec::new(),
            forwards: Vec::new(),
        }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn created_total(&self) -> u64 {
        self.created
    }

    pub fn delivered_total(&self) -> u64 {
        self.delivered
    }

    pub fn delivered_last_step(&self) -> u64 {
        self.delivered_last_step
    }

    pub fn hop_violations(&self) -> u64 {
        self.hop_violations
    }

    /// Packets currently queued anywhere, counted from the queues themselves.
    pub fn in_flight_total(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    pub fn queue_len(&self, node: usize) -> usize {
        self.queues[node].len()
    }

    pub fn queue_lengths(&self) -> Vec<u32> {
        self.queues.iter().map(|q| q.len() as u32).collect()
    }

    /// Queue contents front-to-back as (unique packet id, packet) pairs.
    /// Ids increase in creation order, so tests can audit FIFO behavior.
    pub fn queue_contents(&self, node: usize) -> Vec<(u64, Packet)> {
        self.queues[node].iter().map(|f| (f.id, f.packet)).collect()
    }

    /// Mean queue length over the plan's hub set (0 if the set is empty).
    pub fn hub_mean_queue(&self) -> f64 {
        if self.plan.hub_set.is_empty() {
            return 0.0;
        }
        let sum: u64 = self
            .plan
            .hub_set
            .iter()
            .map(|&i| self.queues[i].len() as u64)
            .sum();
        sum as f64 / self.plan.hub_set.len() as f64
    }

    /// Advance one synchronous step (creation, delivery, arrival).
    pub fn step(&mut self) {
        let n = self.graph.node_count();
        let step_t = self.t + 1;

        // (1) creation
        for i in 0..n {
            let mut count = self.plan.create_floor[i];
            let frac = self.plan.create_frac[i];
            if frac > 0.0 && self.rng.gen_bool(frac) {
                count += 1;
            }
            for _ in 0..count {
                let mut destination = self.rng.gen_range(0..n - 1);
                if destination >= i {
                    destination += 1;
                }
                self.queues[i].push_back(InFlight {
                    packet: Packet {
                        created_at: step_t,
                        source: i,
                        destination,
                    },
                    hops: 0,
                    id: self.next_id,
                });
                self.next_id += 1;
                self.created += 1;
            }
        }

        // (2) delivery, against a fixed post-creation snapshot
        for i in 0..n {
            self.qsnap[i] = self.queues[i].len() as u32;
        }
        self.forwards.clear();
        for i in 0..n {
            let mut quota = self.plan.quota_base[i];
            let frac = self.plan.quota_frac[i];
            if frac > 0.0 && self.rng.gen_bool(frac) {
                quota += 1;
            }
            let take = (quota as usize).min(self.queues[i].len());
            for _ in 0..take {
                let mut flight = self.queues[i].pop_front().expect("take ≤ len");
                routing::next_hop_candidates_into(
                    self.graph,
                    self.dist,
                    i,
                    flight.packet.destination,
                    &mut self.cand,
                );
                let next = routing::select_next_hop(&self.cand, &self.qsnap, &mut self.rng);
                flight.hops += 1;
                self.forwards.push((next, flight));
            }
        }

        // (3) arrival — `forwards` is already ordered by sender id, then
        // sender queue position
        let mut delivered_now = 0u64;
        for (next, flight) in self.forwards.drain(..) {
            if next == flight.packet.destination {
                if u32::from(flight.hops)
                    != u32::from(self.dist.get(flight.packet.source, flight.packet.destination))
                {
                    self.hop_violations += 1;
                }
                delivered_now += 1;
            } else {
                self.queues[next].push_back(flight);
            }
        }
        self.delivered += delivered_now;
        self.delivered_last_step = delivered_now;
        self.t = step_t;

        debug_assert_eq!(self.created, self.delivered + self.in_flight_total());
    }
}

/// Run t_max steps from an empty initial state and record the series.
pub fn run(graph: &Graph, dist: &DistanceMatrix, plan: &RatePlan, opts: &RunOptions) -> TimeSeries {
    let n = graph.node_count();
    let t_max = opts.t_max as usize;
    let mut sim = Sim::new(graph, dist, plan, opts.seed);
    let mut series = TimeSeries {
        created_cum: Vec::with_capacity(t_max),
        delivered_cum: Vec::with_capacity(t_max),
        in_flight: Vec::with_capacity(t_max),
        n1: Vec::with_capacity(t_max),
        n2: Vec::with_capacity(t_max),
        snapshots: Vec::new(),
        hop_violations: 0,
    };
    for _ in 0..t_max {
        sim.step();
        let in_flight = sim.created_total() - sim.delivered_total();
        series.created_cum.push(sim.created_total());
        series.delivered_cum.push(sim.delivered_total());
        series.in_flight.push(in_flight);
        series.n1.push(in_flight as f64 / n as f64);
        series.n2.push(sim.hub_mean_queue());
        if opts.snapshot_times.contains(&sim.t()) {
            series.snapshots.push(Snapshot {
                t: sim.t(),
                queue_len: sim.queue_lengths(),
            });
        }
    }
    series.hop_violations = sim.hop_violations();
    series
}
