use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::parallel::*;
use crate::systems::SystemSpec;

/// Knobs of [`fv_solve`] beyond system, data, end time and CFL number.
#[derive(Debug, Clone, Default)]
pub struct FvOptions {
    /// Output time levels, end points included. Defaults to the number of cells.
    pub time_points: Option<usize>,
    /// Per-component lower floors checked after every step, stricter than the
    /// system's own domain (for Euler, a density floor).
    pub floors: Option<Vec<Option<f64>>>,
    /// Smallest admissible CFL time step; defaults to `1e-9 * end_time`.
    pub dt_floor: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FvSolution {
    /// Space-time field with time on axis 0, one row per output level.
    pub field: Field,
    pub steps: usize,
    /// Largest per-step change of `h * sum_j U_ij` over components and steps.
    pub max_step_drift: f64,
    /// `h * sum_j U_ij(T) - h * sum_j U_ij(0)` per component.
    pub total_drift: Vec<f64>,
    pub min_dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FvDiagnostics {
    pub steps: usize,
    pub max_step_drift: f64,
    pub total_drift: Vec<f64>,
    pub min_dt: f64,
}

impl FvSolution {
    pub fn diagnostics(&self) -> FvDiagnostics {
        FvDiagnostics {
            steps: self.steps,
            max_step_drift: self.max_step_drift,
            total_drift: self.total_drift.clone(),
            min_dt: self.min_dt,
        }
    }
}

/// Piecewise-constant Riemann datum on a one-dimensional torus: `left` on
/// `[x0 - L/2, x0)`, `right` on `[x0, x0 + L/2)`.
pub fn riemann_initial_data(grid: &Grid, left: &[f64], right: &[f64], x0: f64) -> Result<Field> {
    if grid.dims() != 1 || !grid.periodic()[0] {
        return Err(Error::InvalidParameter("Riemann data live on a one-dimensional torus".into()));
    }
    if left.len() != right.len() || left.is_empty() {
        return Err(Error::DimensionMismatch("left and right states differ in length".into()));
    }
    let len = grid.extent()[0];
    let n = left.len();
    let mut values = Vec::with_capacity(grid.len() * n);
    for j in 0..grid.len() {
        let d = (grid.coordinate(0, j) - x0).rem_euclid(len);
        for c in 0..n {
            let v = if d < 0.5 * len {
                right[c]
            } else {
                left[c]
            };
            values.push(v);
        }
    }
    Field::new(grid.clone(), n, values)
}

fn check_admissible(system: &SystemSpec, floors: Option<&[Option<f64>]>, u: &[f64]) -> std::result::Result<(), String> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(format!("non-finite state {u:?}"));
    }
    if system.check_state(u).is_err() {
        return Err(format!("state {u:?} left the domain of `{}`", system.name()));
    }
    if let Some(f) = floors {
        for (c, (v, fl)) in u.iter().zip(f).enumerate() {
            if let Some(fl) = fl {
                if v < fl {
                    return Err(format!("component {c} = {v} fell below the floor {fl}"));
                }
            }
        }
    }
    Ok(())
}

/// First-order finite volumes with the Rusanov (local Lax-Friedrichs) flux on
/// a periodic one-dimensional grid, stepping the conserved densities
/// `U = G_{.0}(u)` with `dt = cfl * h / max speed` and recording the states at
/// uniformly spaced output levels.
pub fn fv_solve(
    system: &SystemSpec,
    initial: &Field,
    end_time: f64,
    cfl: f64,
    options: &FvOptions,
) -> Result<FvSolution> {
    if system.d() != 1 {
        return Err(Error::InvalidParameter(format!(
            "the solver handles one space dimension, `{}` has d = {}",
            system.name(),
            system.d()
        )));
    }
    let grid = initial.grid();
    if grid.dims() != 1 || !grid.periodic()[0] {
        return Err(Error::InvalidParameter("initial data must live on a one-dimensional torus".into()));
    }
    let n = system.n();
    if initial.components() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial data has {} components, system `{}` has {n}",
            initial.components(),
            system.name()
        )));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    if !(end_time > 0.0 && end_time.is_finite()) {
        return Err(Error::InvalidParameter(format!("end time must be positive, got {end_time}")));
    }
    if let Some(f) = &options.floors {
        if f.len() != n {
            return Err(Error::DimensionMismatch("one floor per component expected".into()));
        }
    }
    let floors = options.floors.as_deref();
    let cells = grid.len();
    let h = grid.spacing()[0];
    let levels = options.time_points.unwrap_or(cells);
    if levels < 4 {
        return Err(Error::TooFewPoints { axis: 0, points: levels });
    }
    let dt_floor = options.dt_floor.unwrap_or(1e-9 * end_time);

    let mut states: Vec<f64> = initial.values().to_vec();
    for j in 0..cells {
        check_admissible(system, floors, &states[j * n..(j + 1) * n])
            .map_err(|detail| Error::DomainViolation { time: 0.0, detail: format!("cell {j}: {detail}") })?;
    }
    let mut conserved: Vec<f64> = (0..cells)
        .flat_map(|j| system.conserved(&states[j * n..(j + 1) * n]))
        .collect();

    let totals = |u: &[f64]| -> Vec<f64> { (0..n).map(|c| h * ordered_sum(cells, |j| u[j * n + c])).collect() };
    let start_totals = totals(&conserved);
    let mut prev_totals = start_totals.clone();

    let mut out = Vec::with_capacity(levels * cells * n);
    out.extend_from_slice(&states);
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut max_step_drift: f64 = 0.0;
    let mut min_dt = f64::INFINITY;

    for level in 1..levels {
        let target = end_time * level as f64 / (levels - 1) as f64;
        while t < target {
            // per-cell spatial flux and wave speed
            let cell: Vec<(Vec<f64>, f64)> = (0..cells)
                .into_par_iter()
                .map(|j| {
                    let u = &states[j * n..(j + 1) * n];
                    system.max_wave_speed(u).map(|s| (system.spatial_flux_1d(u), s))
                })
                .collect::<Result<Vec<_>>>()?;
            let speed = ordered_max(cells, |j| cell[j].1);
            let cfl_dt = if speed > 0.0 { cfl * h / speed } else { f64::INFINITY };
            if cfl_dt < dt_floor {
                return Err(Error::TimeStepCollapse { time: t, dt: cfl_dt });
            }
            let dt = cfl_dt.min(target - t);
            let last = dt >= target - t;
            min_dt = min_dt.min(dt);
            // Rusanov flux at the interface j + 1/2
            let interface: Vec<f64> = (0..cells * n)
                .into_par_iter()
                .map(|m| {
                    let (j, c) = (m / n, m % n);
                    let k = (j + 1) % cells;
                    let a = cell[j].1.max(cell[k].1);
                    let (ul, ur) = (conserved[j * n + c], conserved[k * n + c]);
                    0.5 * (cell[j].0[c] + cell[k].0[c]) - 0.5 * a * (ur - ul)
                })
                .collect();
            let ratio = dt / h;
            let next: Vec<f64> = (0..cells * n)
                .into_par_iter()
                .map(|m| {
                    let (j, c) = (m / n, m % n);
                    let jm = (j + cells - 1) % cells;
                    conserved[m] - ratio * (interface[j * n + c] - interface[jm * n + c])
                })
                .collect();
            let t_new = if last { target } else { t + dt };
            let recovered: Vec<std::result::Result<Vec<f64>, String>> = (0..cells)
                .into_par_iter()
                .map(|j| {
                    let old_u = &states[j * n..(j + 1) * n];
                    let (old_c, new_c) = (&conserved[j * n..(j + 1) * n], &next[j * n..(j + 1) * n]);
                    let u = if old_c == new_c {
                        old_u.to_vec()
                    } else {
                        system.state_from_conserved(new_c, old_u).map_err(|e| e.to_string())?
                    };
                    check_admissible(system, floors, &u)?;
                    Ok(u)
                })
                .collect();
            for (j, r) in recovered.into_iter().enumerate() {
                match r {
                    Ok(u) => states[j * n..(j + 1) * n].copy_from_slice(&u),
                    Err(detail) => {
                        return Err(Error::DomainViolation {
                            time: t_new,
                            detail: format!("cell {j} (x = {}): {detail}", grid.coordinate(0, j)),
                        })
                    }
                }
            }
            conserved = next;
            let now = totals(&conserved);
            for c in 0..n {
                max_step_drift = max_step_drift.max((now[c] - prev_totals[c]).abs());
            }
            prev_totals = now;
            t = t_new;
            steps += 1;
        }
        out.extend_from_slice(&states);
    }

    let space_time = Grid::spacetime_1d(levels, end_time, cells, grid.extent()[0])?;
    let total_drift = prev_totals.iter().zip(&start_totals).map(|(a, b)| a - b).collect();
    Ok(FvSolution {
        field: Field::new(space_time, n, out)?,
        steps,
        max_step_drift,
        total_drift,
        min_dt: if min_dt.is_finite() { min_dt } else { 0.0 },
    })
}
