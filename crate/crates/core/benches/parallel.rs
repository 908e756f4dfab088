use covsel::data::{gen_design, SimDesign};
use covsel::fp_sim::NullSimulation;
use covsel::selection::{f1st, SelectionConfig};
use covsel::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn candidate_sweep(c: &mut Criterion) {
    let data = gen_design(&SimDesign::tutorial(1000, 2000, 7)).unwrap().dataset;
    let mut group = c.benchmark_group("f1st_1000x2000");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = SelectionConfig { nu: 5, kmn: 10, exec, ..SelectionConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| black_box(f1st(&data, cfg).unwrap()))
        });
    }
    group.finish();
}

fn null_replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("null_sim_1000x1000x64");
    group.sample_size(10);
    for (name, exec) in MODES {
        let sim = NullSimulation { exec, ..NullSimulation::new(1000, 1000, 64, 3) };
        group.bench_with_input(BenchmarkId::from_parameter(name), &sim, |b, sim| {
            b.iter(|| black_box(sim.run(&[(0.01, 1), (0.01, 5), (0.01, 10)]).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, candidate_sweep, null_replications);
criterion_main!(benches);
