use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qreg_bench::{diagonal_bank, step_problem, stripes, stripes_problem};
use qreg_core::synth::{add_noise, NoiseSpec};
use qreg_core::{
    convolve, operator_norm, power_iterate, random_init, solve_half_step, solve_reconstruction, BallConstraint, ConvOperator,
    Extent, FilterBank, Kernel, LearnConfig, LinearOperator, PDConfig, Shape,
};
use std::hint::black_box;

fn convolution(c: &mut Criterion) {
    let u = stripes(64);
    let mut group = c.benchmark_group("convolution");
    for taps in [2, 3, 5, 7] {
        let shape = Shape::new(taps, taps);
        let h = Kernel::new(shape, (0..shape.len()).map(|i| i as f64 - 1.5).collect()).unwrap();
        group.bench_with_input(BenchmarkId::new("forward", taps), &h, |b, h| {
            b.iter(|| convolve(black_box(&u), h))
        });
        let op = ConvOperator::full(u.clone(), shape);
        let y = vec![1.0; op.output_len()];
        let mut g = vec![0.0; op.input_len()];
        group.bench_with_input(BenchmarkId::new("adjoint", taps), &y, |b, y| {
            b.iter(|| op.adjoint_into(black_box(y), &mut g))
        });
    }
    group.finish();
}

fn norms(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_norm");
    for taps in [3, 7] {
        let op = ConvOperator::full(stripes(32), Shape::new(taps, taps));
        group.bench_function(BenchmarkId::from_parameter(taps), |b| {
            b.iter(|| operator_norm(std::slice::from_ref(&op)).unwrap())
        });
    }
    group.finish();
}

fn half_step(c: &mut Criterion) {
    let problem = step_problem(5);
    let h = random_init(problem.kernel(), 1, 3).unwrap();
    let s = FilterBank::from_flat(1, problem.kernel(), vec![0.2, -0.1, 0.0, 0.3, -0.4]).unwrap();
    let cfg = PDConfig::default();
    c.bench_function("half_step/step_5", |b| {
        b.iter(|| solve_half_step(&h, 0.05, &s, &problem, &cfg).unwrap())
    });
}

fn learning(c: &mut Criterion) {
    let mut group = c.benchmark_group("power_iterate");
    group.sample_size(10);
    let cfg = LearnConfig {
        outer_max: 20,
        ..LearnConfig::default()
    };
    for (name, problem) in [("step_2", step_problem(2)), ("stripes_2x2", stripes_problem(32, 2))] {
        let init = random_init(problem.kernel(), 1, 1).unwrap();
        group.bench_function(name, |b| b.iter(|| power_iterate(&init, &problem, &cfg).unwrap()));
    }
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let sigma = 0.005f64.sqrt();
    let f = add_noise(&stripes(32), NoiseSpec { sigma, seed: 5 }).unwrap();
    let ball = BallConstraint::noise_level(f, 1.0, sigma).unwrap();
    let bank = diagonal_bank();
    let cfg = PDConfig {
        max_iters: 2000,
        gap_tol: 1e-8,
    };
    let mut group = c.benchmark_group("reconstruction");
    group.sample_size(10);
    group.bench_function("stripes_2000_iters", |b| {
        b.iter(|| solve_reconstruction(&ball, &bank, Extent::Valid, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, convolution, norms, half_step, learning, reconstruction);
criterion_main!(benches);
