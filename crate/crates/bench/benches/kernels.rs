use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tensorlab::als::mttkrp;
use tensorlab::eval::{nonorthogonal_instance, orthogonal_instance};
use tensorlab::matrix_methods::svd;
use tensorlab::simdiag::{simdiag, SimdiagConfig};
use tensorlab::stream::{empirical_tensor, implicit_apply, online_power_decompose};
use tensorlab::whiten::{decompose_nonorthogonal, ScaleModel};
use tensorlab::{decompose_orthogonal, PowerConfig};
use tensorlab_bench::{gaussian, low_rank, symmetric_batch};

fn mttkrp_modes(c: &mut Criterion) {
    let t = low_rank(1, [64, 64, 64], 10);
    let f: Vec<_> = (0..3).map(|m| gaussian(10 + m, 64, 10)).collect();
    let mut group = c.benchmark_group("mttkrp");
    for mode in 0..3 {
        group.bench_with_input(BenchmarkId::from_parameter(mode), &mode, |b, &mode| {
            b.iter(|| mttkrp(black_box(&t), [&f[0], &f[1], &f[2]], mode).unwrap())
        });
    }
    group.finish();
}

fn power_method(c: &mut Criterion) {
    let mut group = c.benchmark_group("power");
    for d in [10, 20] {
        let inst = orthogonal_instance(d, d, 1).unwrap();
        let cfg = PowerConfig::for_rank(d, 2);
        group.bench_with_input(BenchmarkId::new("orthogonal", d), &d, |b, &d| {
            b.iter(|| decompose_orthogonal(black_box(&inst.t), d, &cfg).unwrap())
        });
    }
    let inst = nonorthogonal_instance(15, 8, 1).unwrap();
    let m = inst.m.clone().unwrap();
    group.bench_function("whitened-15x8", |b| {
        b.iter(|| decompose_nonorthogonal(&inst.t, &m, 8, &PowerConfig::for_rank(8, 2), ScaleModel::UnitAssumed).unwrap())
    });
    group.finish();
}

fn simultaneous_diagonalization(c: &mut Criterion) {
    let t = low_rank(2, [20, 20, 20], 12);
    c.bench_function("simdiag-20x12", |b| b.iter(|| simdiag(black_box(&t), 12, &SimdiagConfig::with_seed(1)).unwrap()));
}

fn streaming(c: &mut Criterion) {
    let batch = symmetric_batch(3, 2000, 16);
    let u = gaussian(4, 16, 1).into_data();
    let mut group = c.benchmark_group("moments");
    group.bench_function("empirical-tensor", |b| b.iter(|| empirical_tensor(black_box(&batch))));
    group.bench_function("implicit-apply", |b| b.iter(|| implicit_apply(black_box(&batch), &u, &u).unwrap()));
    group.sample_size(10);
    group.bench_function("online-power", |b| {
        b.iter(|| online_power_decompose(black_box(&batch), 2, &PowerConfig::for_rank(2, 5)).unwrap())
    });
    group.finish();
}

fn dense_svd(c: &mut Criterion) {
    let m = gaussian(6, 120, 80);
    c.bench_function("svd-120x80", |b| b.iter(|| svd(black_box(&m)).unwrap()));
}

criterion_group!(benches, mttkrp_modes, power_method, simultaneous_diagonalization, streaming, dense_svd);
criterion_main!(benches);
