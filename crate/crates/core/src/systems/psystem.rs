use std::fmt;
use std::sync::Arc;

use super::{FluxModel, StateDomain, SystemSpec};
use crate::error::{Error, Result};

/// A stored energy `W(F)` with its first two derivatives.
pub trait StoredEnergyFn: Send + Sync + fmt::Debug {
    fn energy(&self, f: f64) -> f64;
    fn stress(&self, f: f64) -> f64;
    fn stiffness(&self, f: f64) -> f64;
    /// Hölder exponent of `stiffness`.
    fn gamma(&self) -> f64;
}

#[derive(Debug, Clone)]
pub enum StoredEnergy {
    /// `W(F) = |F|^(2+gamma) / ((2+gamma)(1+gamma))`, so that `W'' = |F|^gamma`
    /// is exactly `gamma`-Hölder at `F = 0` and no better.
    Power { gamma: f64 },
    Custom(Arc<dyn StoredEnergyFn>),
}

#[derive(Debug, Clone, Copy)]
struct PowerEnergy {
    gamma: f64,
}

impl StoredEnergyFn for PowerEnergy {
    fn energy(&self, f: f64) -> f64 {
        let g = self.gamma;
        f.abs().powf(2.0 + g) / ((2.0 + g) * (1.0 + g))
    }

    fn stress(&self, f: f64) -> f64 {
        f.abs().powf(self.gamma) * f / (1.0 + self.gamma)
    }

    fn stiffness(&self, f: f64) -> f64 {
        f.abs().powf(self.gamma)
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// One-dimensional elastodynamics as the p-system in `(v, F)`:
/// `v_t - W'(F)_x = 0`, `F_t - v_x = 0`, with mechanical energy
/// `Q_0 = v^2/2 + W(F)`, `Q_1 = -v W'(F)` and multipliers `B = (v, W'(F))`.
#[derive(Debug, Clone)]
struct PSystem {
    energy: Arc<dyn StoredEnergyFn>,
}

impl FluxModel for PSystem {
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let (v, f) = (u[0], u[1]);
        out[0] = v;
        out[1] = -self.energy.stress(f);
        out[2] = f;
        out[3] = -v;
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        // rows (i, a), columns j = (v, F)
        out.copy_from_slice(&[1.0, 0.0, 0.0, -self.energy.stiffness(u[1]), 0.0, 1.0, -1.0, 0.0]);
    }

    fn companion(&self, u: &[f64], out: &mut [f64]) {
        let (v, f) = (u[0], u[1]);
        out[0] = 0.5 * v * v + self.energy.energy(f);
        out[1] = -v * self.energy.stress(f);
    }

    fn companion_gradient(&self, u: &[f64], out: &mut [f64]) {
        let (v, f) = (u[0], u[1]);
        let s = self.energy.stress(f);
        out[0] = v;
        out[1] = s;
        out[2] = -s;
        out[3] = -v * self.energy.stiffness(f);
    }

    fn multipliers(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
        out[1] = self.energy.stress(u[1]);
    }

    fn multiplier_gradient(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0, self.energy.stiffness(u[1])]);
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        Some(self.energy.stiffness(u[1]).max(0.0).sqrt())
    }

    fn state_from_conserved(&self, conserved: &[f64]) -> Option<Vec<f64>> {
        Some(conserved.to_vec())
    }
}

/// The p-system reduction of hyperelasticity on `O = R^2`.
pub fn psystem_elasticity(stored_energy: StoredEnergy) -> Result<SystemSpec> {
    let energy: Arc<dyn StoredEnergyFn> = match stored_energy {
        StoredEnergy::Power { gamma } => {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
            }
            Arc::new(PowerEnergy { gamma })
        }
        StoredEnergy::Custom(e) => {
            let g = e.gamma();
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {g}")));
            }
            e
        }
    };
    let gamma = energy.gamma();
    SystemSpec::new(
        "psystem",
        2,
        1,
        StateDomain::unbounded(2),
        vec![(-2.0, 2.0), (-2.0, 2.0)],
        gamma,
        Arc::new(PSystem { energy }),
    )
}
