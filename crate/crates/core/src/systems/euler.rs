use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FluxModel, StateDomain, SystemSpec};
use crate::error::{Error, Result};

/// Parameters of the isentropic Euler system with polytropic pressure
/// `p(rho) = kappa * rho^gamma0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EulerParams {
    pub d: usize,
    pub kappa: f64,
    pub gamma0: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub v_max: f64,
}

impl Default for EulerParams {
    fn default() -> Self {
        Self {
            d: 1,
            kappa: 1.0,
            gamma0: 1.5,
            rho_min: 0.1,
            rho_max: 10.0,
            v_max: 5.0,
        }
    }
}

/// State `u = (rho, v_1, .., v_d)` (density and velocity, not momentum).
#[derive(Debug, Clone)]
struct Euler {
    d: usize,
    kappa: f64,
    gamma0: f64,
}

impl Euler {
    fn pressure(&self, rho: f64) -> f64 {
        self.kappa * rho.powf(self.gamma0)
    }

    fn pressure_derivative(&self, rho: f64) -> f64 {
        self.kappa * self.gamma0 * rho.powf(self.gamma0 - 1.0)
    }

    /// `P(rho) = rho * int_1^rho p(r) / r^2 dr = kappa (rho^g - rho) / (g - 1)`.
    fn potential(&self, rho: f64) -> f64 {
        self.kappa * (rho.powf(self.gamma0) - rho) / (self.gamma0 - 1.0)
    }

    fn potential_derivative(&self, rho: f64) -> f64 {
        self.kappa * (self.gamma0 * rho.powf(self.gamma0 - 1.0) - 1.0) / (self.gamma0 - 1.0)
    }

    fn potential_second_derivative(&self, rho: f64) -> f64 {
        self.kappa * self.gamma0 * rho.powf(self.gamma0 - 2.0)
    }

    fn speed_sq(u: &[f64]) -> f64 {
        u[1..].iter().map(|v| v * v).sum()
    }
}

impl FluxModel for Euler {
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let dirs = self.d + 1;
        let rho = u[0];
        let v = &u[1..];
        out[0] = rho;
        for j in 1..=self.d {
            out[j] = rho * v[j - 1];
        }
        let p = self.pressure(rho);
        for i in 1..=self.d {
            out[i * dirs] = rho * v[i - 1];
            for j in 1..=self.d {
                let delta = if i == j { p } else { 0.0 };
                out[i * dirs + j] = rho * v[i - 1] * v[j - 1] + delta;
            }
        }
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        let n = self.d + 1;
        let dirs = n;
        let rho = u[0];
        let v = &u[1..];
        out.iter_mut().for_each(|x| *x = 0.0);
        let at = |i: usize, a: usize, j: usize| (i * dirs + a) * n + j;
        // mass equation
        out[at(0, 0, 0)] = 1.0;
        for a in 1..=self.d {
            out[at(0, a, 0)] = v[a - 1];
            out[at(0, a, a)] = rho;
        }
        let dp = self.pressure_derivative(rho);
        for i in 1..=self.d {
            out[at(i, 0, 0)] = v[i - 1];
            out[at(i, 0, i)] = rho;
            for a in 1..=self.d {
                out[at(i, a, 0)] = v[i - 1] * v[a - 1] + if i == a { dp } else { 0.0 };
                for m in 1..=self.d {
                    let mut g = 0.0;
                    if m == i {
                        g += rho * v[a - 1];
                    }
                    if m == a {
                        g += rho * v[i - 1];
                    }
                    out[at(i, a, m)] = g;
                }
            }
        }
    }

    fn companion(&self, u: &[f64], out: &mut [f64]) {
        let rho = u[0];
        let kinetic = 0.5 * rho * Self::speed_sq(u);
        let e = kinetic + self.potential(rho);
        out[0] = e;
        let flux_density = e + self.pressure(rho);
        for j in 1..=self.d {
            out[j] = flux_density * u[j];
        }
    }

    fn companion_gradient(&self, u: &[f64], out: &mut [f64]) {
        let n = self.d + 1;
        let rho = u[0];
        let vsq = Self::speed_sq(u);
        let dpot = self.potential_derivative(rho);
        out[0] = 0.5 * vsq + dpot;
        for m in 1..=self.d {
            out[m] = rho * u[m];
        }
        let flux_density = 0.5 * rho * vsq + self.potential(rho) + self.pressure(rho);
        let d_rho = 0.5 * vsq + dpot + self.pressure_derivative(rho);
        for j in 1..=self.d {
            out[j * n] = d_rho * u[j];
            for m in 1..=self.d {
                out[j * n + m] = rho * u[m] * u[j] + if m == j { flux_density } else { 0.0 };
            }
        }
    }

    fn multipliers(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -0.5 * Self::speed_sq(u) + self.potential_derivative(u[0]);
        out[1..].copy_from_slice(&u[1..]);
    }

    fn multiplier_gradient(&self, u: &[f64], out: &mut [f64]) {
        let n = self.d + 1;
        out.iter_mut().for_each(|x| *x = 0.0);
        out[0] = self.potential_second_derivative(u[0]);
        for m in 1..n {
            out[m] = -u[m];
            out[m * n + m] = 1.0;
        }
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        (self.d == 1).then(|| u[1].abs() + self.pressure_derivative(u[0]).sqrt())
    }

    fn state_from_conserved(&self, conserved: &[f64]) -> Option<Vec<f64>> {
        let rho = conserved[0];
        let mut u = vec![rho];
        u.extend(conserved[1..].iter().map(|m| m / rho));
        Some(u)
    }
}

/// Isentropic compressible Euler in `(rho, v)` variables with polytropic
/// pressure. The domain is the half-space `rho > 0`; random states are drawn
/// from `[rho_min, rho_max] x [-v_max, v_max]^d`.
///
/// The flux gradients are `C^{0, gamma0 - 1}` near vacuum, which is recorded
/// as `gamma`; on the sample box, away from vacuum, they are Lipschitz and
/// `box_gamma = 1`.
pub fn euler_system(params: &EulerParams) -> Result<SystemSpec> {
    let EulerParams {
        d,
        kappa,
        gamma0,
        rho_min,
        rho_max,
        v_max,
    } = *params;
    if !(gamma0 > 1.0 && gamma0 < 2.0) {
        return Err(Error::InvalidParameter(format!("gamma0 must lie in (1, 2), got {gamma0}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if !(rho_min > 0.0) || !(rho_max > rho_min) {
        return Err(Error::InvalidParameter(format!(
            "density range must satisfy 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
        )));
    }
    if d == 0 || d > 3 {
        return Err(Error::InvalidParameter(format!("space dimension must be 1..=3, got {d}")));
    }
    let n = d + 1;
    let mut domain = StateDomain::unbounded(n);
    domain.lower[0] = Some(0.0);
    let mut sample_box = vec![(rho_min, rho_max)];
    sample_box.extend(std::iter::repeat_n((-v_max, v_max), d));
    Ok(SystemSpec::new(
        "euler",
        n,
        d,
        domain,
        sample_box,
        gamma0 - 1.0,
        Arc::new(Euler { d, kappa, gamma0 }),
    )?
    .with_box_gamma(1.0))
}
