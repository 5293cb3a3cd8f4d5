use std::sync::Arc;

use super::{FluxModel, StateDomain, SystemSpec};

/// Burgers' equation `u_t + (u^2/2)_x = 0` with the entropy pair
/// `(u^2/2, u^3/3)` and multiplier `B = u`.
#[derive(Debug, Clone, Copy)]
struct Burgers;

impl FluxModel for Burgers {
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
        out[1] = 0.5 * u[0] * u[0];
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = u[0];
    }

    fn companion(&self, u: &[f64], out: &mut [f64]) {
        let x = u[0];
        out[0] = 0.5 * x * x;
        out[1] = x * x * x / 3.0;
    }

    fn companion_gradient(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
        out[1] = u[0] * u[0];
    }

    fn multipliers(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }

    fn multiplier_gradient(&self, _u: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        Some(u[0].abs())
    }

    fn state_from_conserved(&self, conserved: &[f64]) -> Option<Vec<f64>> {
        Some(vec![conserved[0]])
    }
}

/// Scalar Burgers system on `O = R`, Lipschitz flux gradient (`gamma = 1`).
pub fn burgers_system() -> SystemSpec {
    SystemSpec::new(
        "burgers",
        1,
        1,
        StateDomain::unbounded(1),
        vec![(-2.0, 2.0)],
        1.0,
        Arc::new(Burgers),
    )
    .expect("burgers parameters are valid")
}
