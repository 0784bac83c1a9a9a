use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use thn_bench::{model, planted};
use thn_core::numerics::{Init, ParamSet};
use thn_core::temporal::TemporalEncoder;
use thn_core::training::LiveUpdate;
use thn_core::{LiveUpdateConfig, ModelSpec, NodeStateStore, Scheme};

fn forward_snapshot(c: &mut Criterion) {
    let g = planted(400);
    let mut group = c.benchmark_group("forward_snapshot");
    for scheme in [Scheme::Uta, Scheme::Atu] {
        let spec = ModelSpec { scheme, ..model(32) };
        let mut params = ParamSet::new();
        let enc = TemporalEncoder::new(&spec, g.node_types(), g.relations(), &mut params, &mut Init::new(1)).unwrap();
        group.bench_function(format!("{scheme:?}"), |bench| {
            bench.iter(|| {
                let mut store = NodeStateStore::new(scheme);
                for t in 1..=2 {
                    black_box(enc.forward_snapshot(&params, &g, t, &mut store).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn train_snapshot(c: &mut Criterion) {
    let g = planted(400);
    let config = LiveUpdateConfig {
        max_epochs: 5,
        ..LiveUpdateConfig::default()
    };
    let mut group = c.benchmark_group("train_snapshot_5_epochs");
    group.sample_size(10);
    group.bench_function("gru", |bench| {
        bench.iter(|| {
            let mut live = LiveUpdate::new(&model(32), &g, config).unwrap();
            black_box(live.train_snapshot(1).unwrap());
        })
    });
    group.finish();
}

criterion_group!(training, forward_snapshot, train_snapshot);
criterion_main!(training);
