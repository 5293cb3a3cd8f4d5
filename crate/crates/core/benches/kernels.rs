//! Parallel vs sequential timings of the hot kernels.
//!
//! With the default `parallel` feature each kernel runs on the global rayon
//! pool and on a one-thread pool. Built with `--no-default-features` the same
//! benchmarks run through the sequential fallback under the `sequential`
//! group, so `cargo bench` and `cargo bench --no-default-features` line up.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clcons::analysis::{flux_commutator, vmo_modulus};
use clcons::field::{Field, Grid, InteriorRegion};
use clcons::generators::{fv_solve, riemann_initial_data, weierstrass_field, FvOptions};
use clcons::mollify::{make_kernel, mollify, KernelProfile};
use clcons::systems::burgers_system;

#[cfg(feature = "parallel")]
const MODE: &str = "parallel";
#[cfg(not(feature = "parallel"))]
const MODE: &str = "sequential";

struct Setup {
    line: Field,
    plane: Field,
}

fn setup() -> Setup {
    let g1 = Grid::torus_1d(8192, 1.0).unwrap();
    let g2 = Grid::new(&[256, 256], &[1.0, 1.0], &[true, true]).unwrap();
    Setup {
        line: weierstrass_field(&g1, 0.4, 12, 7, 1).unwrap(),
        plane: weierstrass_field(&g2, 0.4, 7, 7, 1).unwrap(),
    }
}

/// Run `f` once per available schedule: the default pool and, when rayon
/// is present, a single worker.
fn schedules(c: &mut Criterion, name: &str, f: impl Fn() + Sync) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function(BenchmarkId::new(MODE, "default"), |b| b.iter(&f));
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function(BenchmarkId::new(MODE, "one_thread"), |b| b.iter(|| one.install(&f)));
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let s = setup();
    let burgers = burgers_system().spatial_part().unwrap();

    let r2 = InteriorRegion::full(s.plane.grid());
    let k2 = make_kernel(s.plane.grid(), 1.0 / 16.0, KernelProfile::Bump).unwrap();
    schedules(c, "mollify_2d_radial", || {
        mollify(&s.plane, &k2, &r2).unwrap();
    });
    let kt = make_kernel(s.plane.grid(), 1.0 / 16.0, KernelProfile::TensorBump).unwrap();
    schedules(c, "mollify_2d_tensor", || {
        mollify(&s.plane, &kt, &r2).unwrap();
    });

    let r1 = InteriorRegion::full(s.line.grid());
    schedules(c, "vmo_modulus_1d", || {
        vmo_modulus(&s.line, 3.0, 1.0 / 64.0, &r1).unwrap();
    });
    let k1 = make_kernel(s.line.grid(), 1.0 / 64.0, KernelProfile::Bump).unwrap();
    schedules(c, "flux_commutator_1d", || {
        flux_commutator(&burgers, &s.line, &k1, &r1).unwrap();
    });

    let space = Grid::torus_1d(1024, 1.0).unwrap();
    let init = riemann_initial_data(&space, &[1.0], &[-1.0], 0.5).unwrap();
    let system = burgers_system();
    let options = FvOptions {
        time_points: Some(16),
        ..Default::default()
    };
    schedules(c, "fv_solve_burgers", || {
        fv_solve(&system, &init, 0.1, 0.9, &options).unwrap();
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
