use serde::{Deserialize, Serialize};

use super::fv::{fv_solve, riemann_initial_data, FvDiagnostics, FvOptions};
use super::{burgers_riemann, burgers_smooth, smooth_modes_field, step_field, weierstrass_field};
use crate::error::{Error, Result};
use crate::field::{sample_function, Field, Grid};
use crate::systems::SystemSpec;

fn one() -> usize {
    1
}

/// Initial data of a finite-volume run, on the spatial axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `left` on `[x0 - L/2, x0)`, `right` on `[x0, x0 + L/2)`.
    Riemann { left: Vec<f64>, right: Vec<f64>, x0: f64 },
    Constant { state: Vec<f64> },
    /// `mean + amplitude * sin(2 pi x / L)` per component.
    Sine { mean: Vec<f64>, amplitude: Vec<f64> },
}

impl InitialData {
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match self {
            Self::Riemann { left, right, x0 } => riemann_initial_data(grid, left, right, *x0),
            Self::Constant { state } => Field::constant(grid.clone(), state),
            Self::Sine { mean, amplitude } => {
                if mean.len() != amplitude.len() || mean.is_empty() {
                    return Err(Error::DimensionMismatch("mean and amplitude differ in length".into()));
                }
                let k = std::f64::consts::TAU / grid.extent()[0];
                sample_function(grid, mean.len(), |x, out| {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o = mean[c] + amplitude[c] * (k * x[0]).sin();
                    }
                })
            }
        }
    }
}

/// A generator and its parameters, as written in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Weierstrass {
        s: f64,
        mode_count: usize,
        seed: u64,
        #[serde(default = "one")]
        components: usize,
    },
    SmoothModes {
        mode_count: usize,
        seed: u64,
        #[serde(default = "one")]
        components: usize,
    },
    Step {
        low: f64,
        high: f64,
        interface: f64,
    },
    BurgersRiemann {
        u_left: f64,
        u_right: f64,
        x0: f64,
    },
    BurgersSmooth {
        amplitude: f64,
        end_time: f64,
    },
    /// Space-time output grid: time levels on axis 0, cells on axis 1.
    FvSolve {
        initial: InitialData,
        cfl: f64,
        #[serde(default)]
        end_time: Option<f64>,
        #[serde(default)]
        floors: Option<Vec<Option<f64>>>,
    },
}

/// A generated field with optional solver diagnostics.
#[derive(Debug, Clone)]
pub struct Generated {
    pub field: Field,
    pub diagnostics: Option<FvDiagnostics>,
}

impl GeneratorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Weierstrass { .. } => "weierstrass",
            Self::SmoothModes { .. } => "smooth_modes",
            Self::Step { .. } => "step",
            Self::BurgersRiemann { .. } => "burgers_riemann",
            Self::BurgersSmooth { .. } => "burgers_smooth",
            Self::FvSolve { .. } => "fv_solve",
        }
    }

    /// Synthetic fields are not solutions of any system; residuals measured
    /// on them only test scaling.
    pub fn is_synthetic(&self) -> bool {
        matches!(self, Self::Weierstrass { .. } | Self::SmoothModes { .. } | Self::Step { .. })
    }

    /// Whether the generator needs a system.
    pub fn needs_system(&self) -> bool {
        matches!(self, Self::FvSolve { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Weierstrass { s, mode_count, .. } => {
                if !(*s > 0.0 && *s < 1.0) {
                    return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
                }
                if *mode_count < 4 {
                    return Err(Error::InvalidParameter(format!("mode_count must be >= 4, got {mode_count}")));
                }
            }
            Self::FvSolve { cfl, end_time, .. } => {
                if !(*cfl > 0.0 && *cfl <= 1.0) {
                    return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1], got {cfl}")));
                }
                if let Some(t) = end_time {
                    if !(*t > 0.0) {
                        return Err(Error::InvalidParameter(format!("end time must be positive, got {t}")));
                    }
                }
            }
            Self::BurgersRiemann { u_left, u_right, .. } if u_left == u_right => {
                return Err(Error::InvalidParameter("degenerate Riemann datum: u_left == u_right".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn generate(&self, grid: &Grid, system: Option<&SystemSpec>) -> Result<Generated> {
        self.validate()?;
        let field = match self {
            Self::Weierstrass {
                s,
                mode_count,
                seed,
                components,
            } => weierstrass_field(grid, *s, *mode_count, *seed, *components)?,
            Self::SmoothModes {
                mode_count,
                seed,
                components,
            } => smooth_modes_field(grid, *mode_count, *seed, *components)?,
            Self::Step { low, high, interface } => step_field(grid, *low, *high, *interface)?,
            Self::BurgersRiemann { u_left, u_right, x0 } => burgers_riemann(grid, *u_left, *u_right, *x0)?.0,
            Self::BurgersSmooth { amplitude, end_time } => burgers_smooth(grid, *amplitude, *end_time)?,
            Self::FvSolve {
                initial,
                cfl,
                end_time,
                floors,
            } => {
                let system = system.ok_or_else(|| Error::InvalidParameter("fv_solve needs a system".into()))?;
                if grid.dims() != 2 || grid.periodic()[0] || !grid.periodic()[1] {
                    return Err(Error::InvalidParameter(
                        "fv_solve writes a space-time grid: bounded time axis 0, periodic space axis 1".into(),
                    ));
                }
                let t_end = grid.extent()[0];
                if let Some(t) = end_time {
                    if (t - t_end).abs() > 1e-12 * t_end.max(1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "end time {t} differs from the time extent {t_end} of the grid"
                        )));
                    }
                }
                let space = Grid::torus_1d(grid.points()[1], grid.extent()[1])?;
                let init = initial.sample(&space)?;
                let options = FvOptions {
                    time_points: Some(grid.points()[0]),
                    floors: floors.clone(),
                    dt_floor: None,
                };
                let sol = fv_solve(system, &init, t_end, *cfl, &options)?;
                return Ok(Generated {
                    diagnostics: Some(sol.diagnostics()),
                    field: sol.field,
                });
            }
        };
        Ok(Generated {
            field,
            diagnostics: None,
        })
    }
}
