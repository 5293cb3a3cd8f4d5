//! Ground-truth input fields: synthetic fields of prescribed regularity,
//! exact Burgers solutions and a finite-volume solver.

mod burgers;
mod fv;
mod spec;

pub use burgers::{burgers_riemann, burgers_smooth, BurgersRiemann};
pub use fv::{fv_solve, riemann_initial_data, FvDiagnostics, FvOptions, FvSolution};
pub use spec::{GeneratorSpec, Generated, InitialData};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{sample_function, Field, Grid};

/// Periodic axes of a grid, in order; the lacunary and modal generators cycle
/// their directions over these.
fn periodic_axes(grid: &Grid) -> Result<Vec<usize>> {
    let axes: Vec<usize> = (0..grid.dims()).filter(|&a| grid.periodic()[a]).collect();
    if axes.is_empty() {
        return Err(Error::InvalidParameter("generator needs at least one periodic axis".into()));
    }
    Ok(axes)
}

/// Phases `theta[k * components + c]` drawn uniformly from `[0, 2 pi)`.
fn seeded_phases(modes: usize, components: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..modes * components)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Lacunary series `sum_{k<K} 2^(-k s) cos(2 pi 2^k x_{a_k} / L_{a_k} + theta_k)`
/// per component, with directions `a_k` cycling through the periodic axes and
/// seeded random phases. Samples lie in `B^s_{p,inf}` uniformly in the grid.
pub fn weierstrass_field(grid: &Grid, s: f64, mode_count: usize, seed: u64, components: usize) -> Result<Field> {
    if mode_count < 4 {
        return Err(Error::InvalidParameter(format!(
            "a lacunary field needs at least 4 modes, got {mode_count}"
        )));
    }
    let phases = seeded_phases(mode_count, components.max(1), seed);
    weierstrass_field_with_phases(grid, s, mode_count, &phases, components)
}

/// [`weierstrass_field`] with explicit phases `theta[k * components + c]`;
/// any positive mode count is accepted here.
pub fn weierstrass_field_with_phases(
    grid: &Grid,
    s: f64,
    mode_count: usize,
    phases: &[f64],
    components: usize,
) -> Result<Field> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    if mode_count == 0 || components == 0 {
        return Err(Error::InvalidParameter("mode and component counts must be positive".into()));
    }
    if phases.len() != mode_count * components {
        return Err(Error::DimensionMismatch(format!(
            "expected {} phases, got {}",
            mode_count * components,
            phases.len()
        )));
    }
    let axes = periodic_axes(grid)?;
    for (k, axis) in (0..mode_count).map(|k| (k, axes[k % axes.len()])) {
        let wavenumber = 2f64.powi(k as i32);
        if 2.0 * wavenumber > grid.points()[axis] as f64 {
            return Err(Error::InvalidParameter(format!(
                "mode {k} (wavenumber {wavenumber}) is not resolved by {} points on axis {axis}",
                grid.points()[axis]
            )));
        }
    }
    let tau = std::f64::consts::TAU;
    sample_function(grid, components, |x, out| {
        for (c, o) in out.iter_mut().enumerate() {
            let mut v = 0.0;
            for k in 0..mode_count {
                let axis = axes[k % axes.len()];
                let freq = 2f64.powi(k as i32);
                let amp = 2f64.powf(-(k as f64) * s);
                v += amp * (tau * freq * x[axis] / grid.extent()[axis] + phases[k * components + c]).cos();
            }
            *o = v;
        }
    })
}

/// Smooth field: `sum_{k=1..M} k^(-2) cos(2 pi k x_{a_k} / L + theta_k)` with
/// seeded phases and directions cycling through the periodic axes.
pub fn smooth_modes_field(grid: &Grid, mode_count: usize, seed: u64, components: usize) -> Result<Field> {
    if mode_count == 0 || components == 0 {
        return Err(Error::InvalidParameter("mode and component counts must be positive".into()));
    }
    let axes = periodic_axes(grid)?;
    let phases = seeded_phases(mode_count, components, seed);
    for k in 1..=mode_count {
        let axis = axes[(k - 1) % axes.len()];
        if 2 * k > grid.points()[axis] {
            return Err(Error::InvalidParameter(format!("mode {k} is not resolved on axis {axis}")));
        }
    }
    let tau = std::f64::consts::TAU;
    sample_function(grid, components, |x, out| {
        for (c, o) in out.iter_mut().enumerate() {
            *o = (1..=mode_count)
                .map(|k| {
                    let axis = axes[(k - 1) % axes.len()];
                    let kf = k as f64;
                    (tau * kf * x[axis] / grid.extent()[axis] + phases[(k - 1) * components + c]).cos() / (kf * kf)
                })
                .sum();
        }
    })
}

/// Two-valued field along the last grid axis (which must be periodic):
/// `high` on `[interface, interface + L/2)`, `low` on the other half.
pub fn step_field(grid: &Grid, low: f64, high: f64, interface: f64) -> Result<Field> {
    let axis = grid.dims() - 1;
    if !grid.periodic()[axis] {
        return Err(Error::InvalidParameter("step_field needs a periodic last axis".into()));
    }
    let len = grid.extent()[axis];
    sample_function(grid, 1, |x, out| {
        let d = (x[axis] - interface).rem_euclid(len);
        out[0] = if d < 0.5 * len { high } else { low };
    })
}
