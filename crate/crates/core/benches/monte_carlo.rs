use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use ris_locate::experiments::{run_experiment, ExperimentSpec, FigureId};
use ris_locate::par::Execution;
use ris_locate::pipeline::ScenarioConfig;

fn spec(figure: FigureId, sweep: &[f64], trials: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(figure);
    s.sweep = sweep.to_vec();
    s.trials = trials;
    s
}

fn sweeps(c: &mut Criterion) {
    let cfg = ScenarioConfig::baseline();
    let cases = [
        ("localization", spec(FigureId::MseVsSigma, &[1e-6], 2000)),
        ("ranging", spec(FigureId::DistRmse, &[20.0], 32)),
    ];
    for (name, s) in &cases {
        let mut group = c.benchmark_group(*name);
        group.sample_size(10);
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_function(label, |b| b.iter(|| run_experiment(black_box(s), &cfg, exec).unwrap()));
        }
        group.finish();
    }
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
