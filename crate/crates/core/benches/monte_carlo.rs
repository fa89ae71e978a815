use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use expfun::exec::Execution;
use expfun::mc::{self, SimulationConfig};
use expfun::moments::{self, QuadratureOptions};
use expfun::process::{LevyTriplet, PiiCharacteristics, Process, TimeFn};

fn cfg(execution: Execution) -> SimulationConfig {
    SimulationConfig {
        n_paths: 20_000,
        time_step: 1e-3,
        seed: 1,
        execution,
        ..SimulationConfig::default()
    }
}

fn monte_carlo(c: &mut Criterion) {
    let cases: [(&str, Process); 3] = [
        ("brownian_grid", LevyTriplet::brownian(1.5, 1.0).unwrap().into()),
        ("poisson_exact", LevyTriplet::poisson(2.0).unwrap().into()),
        ("non_hom_poisson_grid", PiiCharacteristics::non_hom_poisson(TimeFn::parse("t").unwrap()).into()),
    ];
    let mut group = c.benchmark_group("mc_first_moment");
    group.sample_size(10);
    for (name, p) in &cases {
        for (mode, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            group.bench_with_input(BenchmarkId::new(*name, mode), &exec, |b, &exec| {
                b.iter(|| mc::estimate_functional_moment(p, 1.0, 1.0, &cfg(exec)).unwrap())
            });
        }
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let pii = PiiCharacteristics::log_time_change(LevyTriplet::brownian(1.0, 0.5).unwrap(), 2.0);
    let mut group = c.benchmark_group("pii_quadrature");
    group.sample_size(10);
    for (mode, execution) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        let opts = QuadratureOptions {
            execution,
            ..QuadratureOptions::default()
        };
        group.bench_function(mode, |b| b.iter(|| moments::pii_moment_quadrature(&pii, 3.0, 3, opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, quadrature);
criterion_main!(benches);
