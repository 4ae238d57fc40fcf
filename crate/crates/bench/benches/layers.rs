use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use prgcn_bench::wave;
use prgcn_core::layers::{GraphConvLayer, ResidualKind, TemporalConvLayer};
use prgcn_core::{no_grad, Mode, PartitionedAdjacency, Skeleton, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_conv(c: &mut Criterion) {
    let skeleton = Skeleton::preset(&Topology::Kinetics18).unwrap();
    let adj = PartitionedAdjacency::new(&skeleton, 0.001).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = GraphConvLayer::<f32>::new("g", 64, 64, 18, ResidualKind::Auto, &mut rng).unwrap();
    let x = wave(&[2, 64, 50, 18]).unwrap();
    c.bench_function("graph_conv 64x64 T50 N18", |b| {
        b.iter(|| no_grad(|| layer.forward(black_box(&x), &adj, Mode::Eval)).unwrap())
    });
}

fn temporal_conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = TemporalConvLayer::<f32>::new("t", 64, 128, 2, ResidualKind::Auto, &mut rng).unwrap();
    let x = wave(&[2, 64, 100, 18]).unwrap();
    c.bench_function("temporal_conv 64->128 stride 2 T100", |b| {
        b.iter(|| no_grad(|| layer.forward(black_box(&x), Mode::Eval)).unwrap())
    });
}

fn backward(c: &mut Criterion) {
    let skeleton = Skeleton::preset(&Topology::Kinetics18).unwrap();
    let adj = PartitionedAdjacency::new(&skeleton, 0.001).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = GraphConvLayer::<f32>::new("g", 32, 32, 18, ResidualKind::Auto, &mut rng).unwrap();
    let x = wave(&[2, 32, 50, 18]).unwrap();
    c.bench_function("graph_conv 32x32 forward+backward", |b| {
        b.iter(|| {
            let y = layer.forward(black_box(&x), &adj, Mode::Train).unwrap();
            y.sum_all().backward().unwrap();
        })
    });
}

criterion_group!(benches, graph_conv, temporal_conv, backward);
criterion_main!(benches);
