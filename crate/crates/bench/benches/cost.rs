use criterion::{criterion_group, criterion_main, Criterion};
use mvsdf::{aggregate_cost, compute_view_weights, WeightMode};
use mvsdf_bench::sweep_inputs;

fn cost_aggregation(c: &mut Criterion) {
    let inputs = sweep_inputs(320, 256);
    let mut group = c.benchmark_group("cost_aggregation");
    for mode in [WeightMode::Uniform, WeightMode::Similarity, WeightMode::Visibility] {
        group.bench_function(mode.to_string(), |b| {
            b.iter(|| {
                let w = compute_view_weights(&inputs.reference, &inputs.sources, mode);
                aggregate_cost(&inputs.reference, &inputs.sources, &w).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = cost_aggregation
}
criterion_main!(benches);
