use bouncy::bps::{simulate, KineticState, SimConfig};
use bouncy::par::{map_indexed, Execution};
use bouncy::potentials::PotentialModel;
use bouncy::rng::ChainSeed;
use bouncy::velocity::VelocityLaw;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn replicas(c: &mut Criterion) {
    let model = PotentialModel::standard_gaussian(4);
    let law = VelocityLaw::standard_gaussian(4);
    let config = SimConfig::new(1.0, 20.0);
    let init = KineticState::from_slices(&[1.0, 0.0, -1.0, 0.5], &[0.5, 0.5, 0.5, 0.5]);

    let mut group = c.benchmark_group("replicas");
    group.sample_size(20);
    for n in [64usize, 512] {
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| {
                    let finals = map_indexed(n, exec, |i| {
                        simulate(&model, &law, &config, &init, &ChainSeed::new(1, i as u64)).unwrap().final_state().x[0]
                    });
                    finals.iter().sum::<f64>()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, replicas);
criterion_main!(benches);
