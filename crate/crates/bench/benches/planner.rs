use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mappop_bench::{corpus_task, CORPUS};
use mappop_core::bus::Bus;
use mappop_core::coordinator::{solve, SolveConfig};
use mappop_core::harness::satellite_suite;
use mappop_core::rpg::build_dis_rpg;
use mappop_core::validator::validate;

fn corpus(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(20);
    let cfg = SolveConfig::default();
    for name in CORPUS {
        let task = corpus_task(name);
        g.bench_with_input(BenchmarkId::from_parameter(name), &task, |b, t| b.iter(|| solve(t, &cfg).unwrap()));
    }
    g.finish();
}

fn scaling(c: &mut Criterion) {
    let mut g = c.benchmark_group("satellite-agents");
    g.sample_size(10);
    let cfg = SolveConfig::default();
    for n in [1, 2, 4, 8, 14] {
        let task = satellite_suite(n).unwrap().build().unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &task, |b, t| b.iter(|| solve(t, &cfg).unwrap()));
    }
    g.finish();
}

fn graphs(c: &mut Criterion) {
    let mut g = c.benchmark_group("dis-rpg");
    for name in ["rovers-3", "logistics-2"] {
        let task = corpus_task(name);
        g.bench_with_input(BenchmarkId::from_parameter(name), &task, |b, t| {
            b.iter(|| build_dis_rpg(t, &mut Bus::new(t)).unwrap())
        });
    }
    g.finish();
}

fn validation(c: &mut Criterion) {
    let task = corpus_task("logistics-2");
    let report = solve(&task, &SolveConfig::default()).unwrap();
    let plan = report.plan().expect("logistics-2 solves").clone();
    c.bench_function("validate/logistics-2", |b| b.iter(|| validate(&plan, &task)));
}

criterion_group!(benches, corpus, scaling, graphs, validation);
criterion_main!(benches);
