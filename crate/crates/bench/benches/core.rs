use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use netjam_core::*;

const N: usize = 1000;
const M: usize = 3;

fn growth(c: &mut Criterion) {
    c.bench_function("generate_network_n1000_p0", |b| {
        let config = GrowthConfig {
            n: N,
            m: M,
            p: 0.0,
            seed: 7,
        };
        b.iter(|| generate_network(black_box(&config)).unwrap())
    });
    c.bench_function("generate_network_n1000_p1", |b| {
        let config = GrowthConfig {
            n: N,
            m: M,
            p: 1.0,
            seed: 7,
        };
        b.iter(|| generate_network(black_box(&config)).unwrap())
    });
}

fn distances(c: &mut Criterion) {
    let graph = generate_network(&GrowthConfig {
        n: N,
        m: M,
        p: 0.0,
        seed: 7,
    })
    .unwrap();
    c.bench_function("all_pairs_bfs_n1000", |b| {
        b.iter(|| compute_distances(black_box(&graph)).unwrap())
    });
}

fn traffic(c: &mut Criterion) {
    let graph = generate_network(&GrowthConfig {
        n: N,
        m: M,
        p: 0.0,
        seed: 7,
    })
    .unwrap();
    let dist = compute_distances(&graph).unwrap();
    let spec = PlanSpec {
        lambda: 0.01,
        beta: 0.1,
        approach: Approach::Normal,
        hubs: HubSelection::TopFraction(0.03),
    };
    let plan = spec.resolve(&graph).unwrap();
    c.bench_function("traffic_step_n1000_free_flow", |b| {
        let mut sim = Sim::new(&graph, &dist, &plan, 99);
        for _ in 0..200 {
            sim.step(); // steady state first
        }
        b.iter(|| {
            sim.step();
            black_box(sim.in_flight_total())
        })
    });
    c.bench_function("run_t100_n1000", |b| {
        b.iter(|| run(&graph, &dist, &plan, &RunOptions::new(100, black_box(3))))
    });
}

criterion_group!(benches, growth, distances, traffic);
criterion_main!(benches);
