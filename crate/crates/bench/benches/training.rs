use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mbdnn_bench::{batch, NETWORKS};
use mbdnn_core::ffn::{
    backprop, init_model, train_arrays, Activation, Gradients, HyperConfig, Optimizer, OptimizerConfig, Workspace,
};

fn minibatch_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("minibatch_step");
    for (name, dims, batch_size) in NETWORKS {
        for act in [Activation::Tanh, Activation::Relu] {
            let mut model = init_model(dims, act, 0).unwrap();
            let (x, y) = batch(batch_size, dims[0], dims[dims.len() - 1]);
            let mut ws = Workspace::new(&model, batch_size);
            let mut grads = Gradients::zeros_like(&model);
            let mut opt = Optimizer::new(OptimizerConfig::adam(1e-3));
            group.throughput(Throughput::Elements(batch_size as u64));
            group.bench_function(BenchmarkId::new(name, act), |b| {
                b.iter(|| {
                    backprop(&model, x.view(), y.view(), &mut ws, &mut grads).unwrap();
                    opt.step(&mut model, &grads);
                })
            });
        }
    }
    group.finish();
}

fn epoch(c: &mut Criterion) {
    let (x, y) = batch(4096, 4, 3);
    let (vx, vy) = batch(512, 4, 3);
    let cfg = HyperConfig::new(2, 128, 64, 1);
    let mut group = c.benchmark_group("epoch");
    group.sample_size(10).throughput(Throughput::Elements(4096));
    group.bench_function("single_2x128_4096_rows", |b| {
        b.iter(|| {
            let mut model = init_model(&cfg.layer_dims(4, 3), cfg.activation, 0).unwrap();
            train_arrays(&mut model, x.view(), y.view(), vx.view(), vy.view(), &cfg).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, minibatch_step, epoch);
criterion_main!(benches);
