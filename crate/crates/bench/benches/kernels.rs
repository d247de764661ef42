use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rwrs_bench::{models, HORIZON};
use rwrs_core::ks_limit::simulate_ks_sup;
use rwrs_core::mdm::{simulate_mdm_replica, MdmOptions};
use rwrs_core::oracle::{exact_mdm, exact_return_probs, exact_rwrs, DEFAULT_BUDGET};
use rwrs_core::rwrs::simulate_rwrs_replica;
use rwrs_core::{KsEstimator, KsGrid, MdmConfig, RwrsOptions, SceneryDist, WalkIncrementDist};

fn rwrs_replica(c: &mut Criterion) {
    let mut g = c.benchmark_group("rwrs_replica");
    for (name, model) in models() {
        let mut replica = 0;
        g.bench_function(BenchmarkId::new(name, HORIZON), |b| {
            b.iter(|| {
                replica += 1;
                simulate_rwrs_replica(HORIZON, &model, 1, replica, &RwrsOptions::default()).unwrap()
            })
        });
    }
    g.finish();
}

fn mdm_replica(c: &mut Criterion) {
    let cfg = MdmConfig::new(1.0 / 3.0, HORIZON).unwrap();
    let mut g = c.benchmark_group("mdm_replica");
    for (name, track) in [("first_coordinate", false), ("full_range", true)] {
        let opts = MdmOptions {
            track_full_range: track,
            ..Default::default()
        };
        let mut replica = 0;
        g.bench_function(BenchmarkId::new(name, HORIZON), |b| {
            b.iter(|| {
                replica += 1;
                simulate_mdm_replica(&cfg, 1, replica, &opts).unwrap()
            })
        });
    }
    g.finish();
}

fn ks_path(c: &mut Criterion) {
    let mut g = c.benchmark_group("ks_sup");
    for est in [KsEstimator::NormalizedRwrs, KsEstimator::DirectGrid] {
        let grid = KsGrid::brownian(HORIZON, est).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        g.bench_function(BenchmarkId::new(est.id(), HORIZON), |b| {
            b.iter(|| simulate_ks_sup(&grid, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("rwrs_simple_rademacher_n8", |b| {
        b.iter(|| exact_rwrs(black_box(8), &WalkIncrementDist::Simple, &SceneryDist::Rademacher, DEFAULT_BUDGET).unwrap())
    });
    g.bench_function("mdm_n8", |b| b.iter(|| exact_mdm(black_box(8), 1.0 / 3.0, DEFAULT_BUDGET).unwrap()));
    g.bench_function("return_probs_4096", |b| {
        b.iter(|| exact_return_probs(&WalkIncrementDist::Simple, black_box(4096)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, rwrs_replica, mdm_replica, ks_path, oracles);
criterion_main!(benches);
