use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use unnest_core::engine::EngineConfig;
use unnest_core::harness::generator::{generate, GenerateSpec};
use unnest_core::harness::{read_corpus, refactor_corpus};
use unnest_core::par::Execution;

fn batch(c: &mut Criterion) {
    let spec = GenerateSpec {
        redundancy_fraction: 0.3,
        controls: 8,
        seed: 11,
        ..GenerateSpec::uniform(50)
    };
    let text: String = generate(&spec)
        .expect("valid spec")
        .into_iter()
        .map(|g| g.formula + "\n")
        .collect();
    let lines = read_corpus(&text);
    let mut group = c.benchmark_group("refactor_corpus");
    group.sample_size(10);
    for (label, verify) in [("no_verify", false), ("verify_100", true)] {
        let cfg = EngineConfig {
            verify,
            verify_env_count: 100,
            ..EngineConfig::default()
        };
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(label, format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| refactor_corpus(&lines, &cfg, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
