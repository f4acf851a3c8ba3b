use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sqglab::dyadic::DyadicFamily;
use sqglab::fft::{forward_real, inverse_real};
use sqglab::multipliers::biot_savart_velocity;
use sqglab::norms::zygmund_norm;
use sqglab::solver::{step_transport, SimState, VelocityLaw};
use sqglab_bench::sample_field;
use std::hint::black_box;

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_round_trip");
    for n in [128usize, 256, 512] {
        let values = sample_field(n).values(0).to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(n), &values, |b, v| {
            b.iter(|| inverse_real(&forward_real(black_box(v), n), n))
        });
    }
    group.finish();
}

fn velocity(c: &mut Criterion) {
    let mut group = c.benchmark_group("biot_savart");
    for n in [128usize, 256, 512] {
        let theta = sample_field(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &theta, |b, t| {
            b.iter(|| biot_savart_velocity(black_box(t), 0.5).unwrap())
        });
    }
    group.finish();
}

fn rk4(c: &mut Criterion) {
    let theta = sample_field(256);
    let u = biot_savart_velocity(&theta, 0.5).unwrap();
    let state = SimState::new(theta, u);
    c.bench_function("rk4_step_256", |b| {
        b.iter(|| step_transport(black_box(&state), VelocityLaw::Direct { beta: 0.5 }, 1e-3, None).unwrap())
    });
}

fn zygmund(c: &mut Criterion) {
    let theta = sample_field(256);
    let family = DyadicFamily::build_partition(*theta.grid()).unwrap();
    c.bench_function("zygmund_norm_256", |b| {
        b.iter(|| zygmund_norm(black_box(&theta), 1.5, &family, false).unwrap())
    });
}

criterion_group!(benches, fft, velocity, rk4, zygmund);
criterion_main!(benches);
