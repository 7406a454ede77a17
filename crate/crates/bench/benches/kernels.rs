use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rbffd::assembly::evaluation_requests;
use rbffd::harness::{assemble_system, discretize, ExperimentConfig};
use rbffd::local_weights::{compute_weights, PhsBasis};
use rbffd::nodes::generate_nodes;
use rbffd::solver::{self, RefinementPolicy};
use rbffd::stencil::build_stencils;
use rbffd::{Domain, KdTree};

fn neighbors(c: &mut Criterion) {
    let nodes = generate_nodes(&Domain::star(), 0.03, 1).unwrap();
    let tree = KdTree::new(&nodes.points, 2);
    c.bench_function("kdtree build (N~4000)", |b| {
        b.iter(|| KdTree::new(black_box(&nodes.points), 2))
    });
    c.bench_function("knn 42 for all nodes", |b| {
        b.iter(|| {
            for p in &nodes.points {
                black_box(tree.knn(p, 42));
            }
        })
    });
}

fn weights(c: &mut Criterion) {
    let nodes = generate_nodes(&Domain::star(), 0.05, 1).unwrap();
    let basis = PhsBasis::cubic(5, 2);
    let table = build_stencils(&nodes, basis.default_stencil_size()).unwrap();
    let requests = evaluation_requests(&nodes, &nodes.points);
    c.bench_function("local weights p=5 (N~1500)", |b| {
        b.iter(|| compute_weights(&nodes, &table, basis, black_box(&requests)).unwrap())
    });
}

fn global_solve(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let disc = discretize(&cfg, 0.05).unwrap();
    let sys = assemble_system(&cfg, &disc).unwrap();
    let mut group = c.benchmark_group("global");
    group.sample_size(10);
    group.bench_function("assemble LS p=5 q=3 (N~1500)", |b| {
        b.iter(|| assemble_system(&cfg, &disc).unwrap())
    });
    group.bench_function("normal-equation solve", |b| {
        b.iter(|| solver::solve(black_box(&sys), RefinementPolicy::Auto).unwrap())
    });
    group.finish();
}

criterion_group!(benches, neighbors, weights, global_solve);
criterion_main!(benches);
