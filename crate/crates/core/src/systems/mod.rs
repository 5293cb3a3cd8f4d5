//! Systems of conservation laws `d_a G_ia(u) = 0` with a companion law
//! `d_a Q_a(u) = 0` and multipliers `B_i` linking the two through
//! `d_j Q_a = B_i d_j G_ia`.
//!
//! Index conventions used by every evaluator: `i` is the equation
//! (`0..n`), `a` the coordinate direction (`0..=d`, `0` is time) and `j` the
//! state component (`0..n`). Flat layouts are `flux[i * (d + 1) + a]`,
//! `flux_jacobian[(i * (d + 1) + a) * n + j]`, `companion_gradient[a * n + j]`
//! and `multiplier_gradient[i * n + j]`.

mod burgers;
mod checks;
pub mod custom;
mod euler;
mod psystem;
mod weak;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use burgers::burgers_system;
pub use checks::{
    compatibility_residual, derivative_fd_check, flux_gradient_holder_estimate, growth_check,
    random_states, CompatibilityReport, FdReport, GrowthReport, HolderReport,
};
pub use custom::{custom_system, CustomSystemDef, Term};
pub use euler::{euler_system, EulerParams};
pub use psystem::{psystem_elasticity, StoredEnergy, StoredEnergyFn};
pub use weak::weak_residual;
pub(crate) use weak::check_field as check_field_shape;

use crate::error::{Error, Result};

/// Analytic data of a system: fluxes, companion fluxes, multipliers and their
/// state gradients.
pub trait FluxModel: Send + Sync + fmt::Debug {
    fn flux(&self, u: &[f64], out: &mut [f64]);
    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]);
    fn companion(&self, u: &[f64], out: &mut [f64]);
    fn companion_gradient(&self, u: &[f64], out: &mut [f64]);
    fn multipliers(&self, u: &[f64], out: &mut [f64]);
    fn multiplier_gradient(&self, u: &[f64], out: &mut [f64]);

    /// Largest characteristic speed in one space dimension, when known in
    /// closed form.
    fn max_wave_speed(&self, _u: &[f64]) -> Option<f64> {
        None
    }

    /// Inverse of `u -> G_{i0}(u)`, when known in closed form.
    fn state_from_conserved(&self, _conserved: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Convex state domain: a box whose sides may be open half-lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDomain {
    /// Strict lower bound per component (`None` for unbounded).
    pub lower: Vec<Option<f64>>,
    /// Strict upper bound per component.
    pub upper: Vec<Option<f64>>,
}

impl StateDomain {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter().enumerate().all(|(j, &x)| {
            x.is_finite()
                && self.lower[j].is_none_or(|lo| x > lo)
                && self.upper[j].is_none_or(|hi| x < hi)
        })
    }
}

/// A conservation system together with the hypotheses used by the analysis:
/// Hölder exponent of the flux gradients, growth constant and the box from
/// which random states are drawn.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    n: usize,
    d: usize,
    domain: StateDomain,
    sample_box: Vec<(f64, f64)>,
    gamma: f64,
    box_gamma: Option<f64>,
    growth_constant: f64,
    model: Arc<dyn FluxModel>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("gamma", &self.gamma)
            .field("box_gamma", &self.box_gamma)
            .field("growth_constant", &self.growth_constant)
            .finish()
    }
}

/// Serializable summary of a system for reports.
#[derive(Debug, Clone, Serialize)]
pub struct SystemInfo {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub box_gamma: Option<f64>,
    pub growth_constant: f64,
    pub sample_box: Vec<(f64, f64)>,
}

impl SystemSpec {
    /// Assemble a system. The growth constant is the largest ratio
    /// `|Q_a(u)| / (1 + |u|^(2 + gamma))` found on a lattice over the sample
    /// box, inflated by 10% to cover off-lattice maxima.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        d: usize,
        domain: StateDomain,
        sample_box: Vec<(f64, f64)>,
        gamma: f64,
        model: Arc<dyn FluxModel>,
    ) -> Result<Self> {
        if n == 0 || domain.lower.len() != n || domain.upper.len() != n || sample_box.len() != n {
            return Err(Error::DimensionMismatch("domain and sample box must have n entries".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let mut spec = Self {
            name: name.into(),
            n,
            d,
            domain,
            sample_box,
            gamma,
            box_gamma: None,
            growth_constant: f64::INFINITY,
            model,
        };
        spec.growth_constant = 1.1 * spec.growth_ratio_on_box_lattice(gamma);
        Ok(spec)
    }

    fn growth_ratio_on_box_lattice(&self, gamma: f64) -> f64 {
        let per_axis = match self.n {
            1 => 401,
            2 => 61,
            3 => 21,
            _ => 9,
        };
        let total = (per_axis as usize).pow(self.n as u32);
        let mut q = vec![0.0; self.d + 1];
        let mut u = vec![0.0; self.n];
        let mut best: f64 = 0.0;
        for k in 0..total {
            let mut rem = k;
            for (j, &(lo, hi)) in self.sample_box.iter().enumerate() {
                let t = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                rem /= per_axis;
                // stay strictly inside open bounds
                u[j] = lo + t * (hi - lo);
            }
            if !self.domain.contains(&u) {
                continue;
            }
            self.model.companion(&u, &mut q);
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let denom = 1.0 + norm.powf(2.0 + gamma);
            for v in &q {
                best = best.max(v.abs() / denom);
            }
        }
        best
    }

    pub fn with_growth_constant(mut self, c: f64) -> Self {
        self.growth_constant = c;
        self
    }

    pub fn with_box_gamma(mut self, g: f64) -> Self {
        self.box_gamma = Some(g);
        self
    }

    pub fn with_sample_box(mut self, sample_box: Vec<(f64, f64)>) -> Result<Self> {
        if sample_box.len() != self.n {
            return Err(Error::DimensionMismatch("sample box must have n entries".into()));
        }
        self.sample_box = sample_box;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of flux directions, `d + 1`.
    pub fn directions(&self) -> usize {
        self.d + 1
    }

    pub fn domain(&self) -> &StateDomain {
        &self.domain
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    /// Hölder exponent claimed for the flux gradients on the full domain.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Effective exponent on the sample box when it is better than `gamma`.
    pub fn box_gamma(&self) -> Option<f64> {
        self.box_gamma
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn model(&self) -> &dyn FluxModel {
        self.model.as_ref()
    }

    pub fn info(&self) -> SystemInfo {
        SystemInfo {
            name: self.name.clone(),
            n: self.n,
            d: self.d,
            gamma: self.gamma,
            box_gamma: self.box_gamma,
            growth_constant: self.growth_constant,
            sample_box: self.sample_box.clone(),
        }
    }

    pub fn check_state(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n || !self.domain.contains(u) {
            return Err(Error::OutsideDomain {
                system: self.name.clone(),
                state: u.to_vec(),
            });
        }
        Ok(())
    }

    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.directions()];
        self.model.flux(u, &mut out);
        out
    }

    pub fn flux_jacobian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.directions() * self.n];
        self.model.flux_jacobian(u, &mut out);
        out
    }

    pub fn companion(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.directions()];
        self.model.companion(u, &mut out);
        out
    }

    pub fn companion_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.directions() * self.n];
        self.model.companion_gradient(u, &mut out);
        out
    }

    pub fn multipliers(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.model.multipliers(u, &mut out);
        out
    }

    pub fn multiplier_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        self.model.multiplier_gradient(u, &mut out);
        out
    }

    /// Conserved densities `G_{i0}(u)`.
    pub fn conserved(&self, u: &[f64]) -> Vec<f64> {
        let f = self.flux(u);
        (0..self.n).map(|i| f[i * self.directions()]).collect()
    }

    /// Spatial fluxes `G_{i1}(u)` of a one-dimensional system.
    pub fn spatial_flux_1d(&self, u: &[f64]) -> Vec<f64> {
        let f = self.flux(u);
        (0..self.n).map(|i| f[i * self.directions() + 1]).collect()
    }

    fn direction_matrix(&self, jac: &[f64], a: usize) -> DMatrix<f64> {
        let (n, dirs) = (self.n, self.directions());
        DMatrix::from_fn(n, n, |i, j| jac[(i * dirs + a) * n + j])
    }

    /// Largest characteristic speed of a one-dimensional system: the closed
    /// form from the model when available, otherwise the spectral radius of
    /// `A_0^{-1} A_1` with `A_a = dG_{.a}/du`.
    pub fn max_wave_speed(&self, u: &[f64]) -> Result<f64> {
        if self.d != 1 {
            return Err(Error::InvalidParameter("wave speeds are only defined for d = 1".into()));
        }
        if let Some(s) = self.model.max_wave_speed(u) {
            return Ok(s);
        }
        let jac = self.flux_jacobian(u);
        let a0 = self.direction_matrix(&jac, 0);
        let a1 = self.direction_matrix(&jac, 1);
        let m = a0
            .lu()
            .solve(&a1)
            .ok_or_else(|| Error::NoConvergence("singular time-flux Jacobian".into()))?;
        Ok(m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Recover the state from conserved densities, by closed form or by Newton
    /// iteration started at `guess`.
    pub fn state_from_conserved(&self, conserved: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        if let Some(u) = self.model.state_from_conserved(conserved) {
            return Ok(u);
        }
        let n = self.n;
        let target = DVector::from_column_slice(conserved);
        let mut u = DVector::from_column_slice(guess);
        for _ in 0..50 {
            let g = DVector::from_vec(self.conserved(u.as_slice()));
            let r = &g - &target;
            if r.amax() <= 1e-14 * (1.0 + target.amax()) {
                return Ok(u.as_slice().to_vec());
            }
            let jac = self.flux_jacobian(u.as_slice());
            let a0 = DMatrix::from_fn(n, n, |i, j| jac[(i * self.directions()) * n + j]);
            let step = a0
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::NoConvergence("singular time-flux Jacobian".into()))?;
            u -= step;
        }
        Err(Error::NoConvergence(format!(
            "conserved-to-state inversion failed for {conserved:?}"
        )))
    }
}

/// The spatial directions of a system, renumbered from zero.
#[derive(Debug)]
struct SpatialPart {
    inner: Arc<dyn FluxModel>,
    n: usize,
    d: usize,
}

impl SpatialPart {
    fn full_dirs(&self) -> usize {
        self.d + 1
    }
}

impl FluxModel for SpatialPart {
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.n * self.full_dirs()];
        self.inner.flux(u, &mut g);
        for i in 0..self.n {
            for a in 0..self.d {
                out[i * self.d + a] = g[i * self.full_dirs() + a + 1];
            }
        }
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut g = vec![0.0; n * self.full_dirs() * n];
        self.inner.flux_jacobian(u, &mut g);
        for i in 0..n {
            for a in 0..self.d {
                let src = (i * self.full_dirs() + a + 1) * n;
                let dst = (i * self.d + a) * n;
                out[dst..dst + n].copy_from_slice(&g[src..src + n]);
            }
        }
    }

    fn companion(&self, u: &[f64], out: &mut [f64]) {
        let mut q = vec![0.0; self.full_dirs()];
        self.inner.companion(u, &mut q);
        out.copy_from_slice(&q[1..]);
    }

    fn companion_gradient(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut q = vec![0.0; self.full_dirs() * n];
        self.inner.companion_gradient(u, &mut q);
        out.copy_from_slice(&q[n..]);
    }

    fn multipliers(&self, u: &[f64], out: &mut [f64]) {
        self.inner.multipliers(u, out);
    }

    fn multiplier_gradient(&self, u: &[f64], out: &mut [f64]) {
        self.inner.multiplier_gradient(u, out);
    }
}

impl SystemSpec {
    /// The system restricted to its spatial fluxes `G_ij`, `j = 1..d`, as a
    /// system with `d - 1` "space" directions. For a time-independent profile
    /// on `T^d`, `d_a G_ia(u) = d_j G_ij(u)`, so this is the system such
    /// profiles are analysed against.
    pub fn spatial_part(&self) -> Result<SystemSpec> {
        if self.d == 0 {
            return Err(Error::InvalidParameter(format!(
                "`{}` has no spatial directions",
                self.name
            )));
        }
        let model = SpatialPart {
            inner: self.model.clone(),
            n: self.n,
            d: self.d,
        };
        let mut spec = SystemSpec::new(
            format!("{}-spatial", self.name),
            self.n,
            self.d - 1,
            self.domain.clone(),
            self.sample_box.clone(),
            self.gamma,
            Arc::new(model),
        )?;
        spec.box_gamma = self.box_gamma;
        Ok(spec)
    }
}

/// Look up a built-in system by its CLI name with default parameters.
pub fn builtin_system(name: &str) -> Result<SystemSpec> {
    match name {
        "burgers" => Ok(burgers_system()),
        "euler" => euler_system(&EulerParams::default()),
        "psystem" => psystem_elasticity(StoredEnergy::Power { gamma: 0.5 }),
        other => Err(Error::InvalidParameter(format!("unknown system `{other}`"))),
    }
}
