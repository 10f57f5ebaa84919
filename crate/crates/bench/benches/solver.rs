use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use outflow_core::profile::solve_profile;
use outflow_core::solver::{Convection, Workspace};
use outflow_core::*;

fn curved_problem(n1: usize, n2: usize) -> Problem {
    let g = GasParams::canonical();
    let ff = FarFieldState::canonical();
    let data = BoundaryData::normal_outflow(PlanarBoundaryData::default(), Dim::Two);
    let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), n1, n2, 34.0).unwrap();
    let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), Default::default()).unwrap();
    Problem::new(bg, Convection::SecondOrderUpwind)
}

fn rhs(c: &mut Criterion) {
    for (n1, n2) in [(101, 32), (201, 64)] {
        let p = curved_problem(n1, n2);
        let s = p.initial_state();
        let mut ws = Workspace::new(&s);
        let mut out = FieldState::zeros_like(&s);
        c.bench_function(&format!("rhs_{n1}x{n2}"), |b| b.iter(|| p.rhs_into(black_box(&s), &mut ws, &mut out)));
    }
}

fn steps(c: &mut Criterion) {
    let p = curved_problem(101, 32);
    let s = p.initial_state();
    let mut ws = Workspace::new(&s);
    let dt = p.stable_dt(&s, 0.4).unwrap();
    c.bench_function("ssp_rk2_step_101x32", |b| b.iter(|| p.step(black_box(&s), dt, &mut ws)));
    c.bench_function("rkc2_step_101x32_s10", |b| b.iter(|| p.step_rkc(black_box(&s), dt, 10, &mut ws)));
}

fn profile(c: &mut Criterion) {
    let g = GasParams::canonical();
    let ff = FarFieldState::canonical();
    let bd = PlanarBoundaryData::default();
    let opts = ProfileOptions::default();
    c.bench_function("planar_profile", |b| b.iter(|| solve_profile(black_box(&bd), &ff, &g, &opts).unwrap()));
}

criterion_group!(benches, rhs, steps, profile);
criterion_main!(benches);
