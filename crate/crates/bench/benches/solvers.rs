use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use agecontrol_core::samples::{initial_sample, terminal_sample};
use agecontrol_core::*;

const X0: f64 = 0.3;

fn setup(nt: usize) -> (Grid, DiffusionCoefficient, RateSpec, ControlRegion) {
    let grid = Grid::aligned(1.0, 2.0, nt, nt * 3 / 2, X0).unwrap();
    let coeff = make_power_law(0.5, X0).unwrap();
    let rates = RateSpec::from_presets(Mortality::Constant(0.0), Fertility::Ramp { slope: 1.0 }, 0.25, 2.0).unwrap();
    let region = ControlRegion::single(0.2, 0.45, X0).unwrap();
    (grid, coeff, rates, region)
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_forward");
    group.sample_size(10);
    for nt in [16, 32, 64] {
        let (grid, coeff, rates, region) = setup(nt);
        let problem = ForwardProblem::new(coeff, rates, region, grid, initial_sample(&grid, 42, 0));
        group.bench_with_input(BenchmarkId::from_parameter(nt), &problem, |b, p| b.iter(|| solve_forward(black_box(p)).unwrap()));
    }
    group.finish();
}

fn backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_backward");
    group.sample_size(10);
    for nt in [16, 32, 64] {
        let (grid, coeff, rates, _) = setup(nt);
        let problem = AdjointProblem::new(coeff, rates, grid, terminal_sample(&grid, 42, 0));
        group.bench_with_input(BenchmarkId::from_parameter(nt), &problem, |b, p| b.iter(|| solve_backward(black_box(p)).unwrap()));
    }
    group.finish();
}

fn carleman(c: &mut Criterion) {
    let mut group = c.benchmark_group("carleman_report");
    group.sample_size(10);
    for nt in [16, 32, 64] {
        let (grid, coeff, rates, _) = setup(nt);
        let sample = CarlemanSample::generate(&coeff, &rates, &grid, 42, 0).unwrap();
        let ws = WeightSet::new(&coeff, 1.0, 2.0, 1.0, WeightOptions::default()).unwrap();
        group.bench_function(BenchmarkId::from_parameter(nt), |b| {
            b.iter(|| carleman_report(black_box(&sample.v), &sample.f, &ws, &coeff, &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forward, backward, carleman);
criterion_main!(benches);
