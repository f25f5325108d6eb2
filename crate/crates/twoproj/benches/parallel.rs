//! Compares the rayon-backed sweeps against their sequential twins on the
//! three workloads the library parallelizes: grid sup norms, pointwise
//! infima, and randomized pair sweeps. Both lanes run the same per-sample
//! kernel, so the gap is pure scheduling overhead versus speedup.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twoproj::gen::random_pair;
use twoproj::grid::{self, make_model_pair, GridSpec, ModelVariant};
use twoproj::linalg::{range_basis, subspace_intersect};
use twoproj::{par, CMat, GridMatrixFunction};

const GRID_SAMPLES: usize = 4001;

fn tuned_group<'a>(c: &'a mut Criterion, name: &str) -> criterion::BenchmarkGroup<'a, criterion::measurement::WallTime> {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.warm_up_time(std::time::Duration::from_millis(400));
    group.measurement_time(std::time::Duration::from_millis(1600));
    group
}

/// Sup norm of the commutator function PQ - QP over a dense grid.
fn bench_sup_norm(c: &mut Criterion) {
    let spec = GridSpec::new(GRID_SAMPLES).expect("odd sample count");
    let gp = make_model_pair(spec, ModelVariant::ConstantP).expect("model pair");
    let commutator = gp.p().mul(gp.q()).sub(&gp.q().mul(gp.p()));
    let n = spec.n_samples();
    let kernel = |j: usize| grid::operator_norm_2x2(commutator.value(j));

    let mut group = tuned_group(c, "grid-sup-norm");
    group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
        b.iter(|| black_box(par::fold_max(&par::map_range(n, kernel))))
    });
    group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
        b.iter(|| black_box(par::fold_max(&par::map_range_seq(n, kernel))))
    });
    group.finish();
}

/// Pointwise intersection projection at every grid sample. The parallel lane
/// is the library entry point; the sequential lane rebuilds the same values
/// through the always-sequential map.
fn bench_pointwise_infimum(c: &mut Criterion) {
    let spec = GridSpec::new(GRID_SAMPLES).expect("odd sample count");
    let gp = make_model_pair(spec, ModelVariant::RotatedP).expect("model pair");
    let tol = gp.tol();
    let n = spec.n_samples();
    let kernel = |j: usize| {
        let rp = range_basis(gp.p().value(j), &tol);
        let rq = range_basis(gp.q().value(j), &tol);
        match subspace_intersect(&rp, &rq, &tol) {
            Ok(meet) => meet.projector(),
            Err(_) => CMat::zeros(2, 2),
        }
    };

    let mut group = tuned_group(c, "grid-pointwise-infimum");
    group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
        b.iter(|| black_box(grid::pointwise_infimum(&gp)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
        b.iter(|| {
            let values = par::map_range_seq(n, kernel);
            black_box(GridMatrixFunction::new(gp.grid(), values).expect("square samples"))
        })
    });
    group.finish();
}

/// Randomized pair sweep: generate a pair per index and take the worst
/// angle-symmetry residual, the same shape as the library's sweep reports.
fn bench_pair_sweep(c: &mut Criterion) {
    let sweep = 48_usize;
    let kernel = |i: usize| {
        let pair = random_pair(9_000 + i as u64, 6);
        pair.check_angle_symmetry().residual
    };

    let mut group = tuned_group(c, "pair-sweep");
    group.bench_with_input(BenchmarkId::new("parallel", sweep), &sweep, |b, &n| {
        b.iter(|| black_box(par::fold_max(&par::map_range(n, kernel))))
    });
    group.bench_with_input(BenchmarkId::new("sequential", sweep), &sweep, |b, &n| {
        b.iter(|| black_box(par::fold_max(&par::map_range_seq(n, kernel))))
    });
    group.finish();
}

criterion_group!(benches, bench_sup_norm, bench_pointwise_infimum, bench_pair_sweep);
criterion_main!(benches);
