use super::SystemSpec;
use crate::error::{Error, Result};
use crate::field::{quadrature_weight, Field, TestFunction};

/// Weak-form residual `sum_a int G_ia(u) d_a phi dx` per equation `i`, by
/// trapezoid quadrature over the support of `phi`. Zero (up to quadrature
/// error) exactly when `u` is a weak solution tested against `phi`.
pub fn weak_residual(system: &SystemSpec, field: &Field, test: &TestFunction) -> Result<Vec<f64>> {
    check_field(system, field)?;
    let grid = field.grid();
    let sampled = test.sample(grid)?;
    let (n, dirs) = (system.n(), system.directions());
    let mut flux = vec![0.0; n * dirs];
    let mut out = vec![0.0; n];
    for (k, &p) in sampled.points.iter().enumerate() {
        if !field.is_valid(p) {
            return Err(Error::InvalidParameter("test function support meets invalid samples".into()));
        }
        let u = field.state(p);
        system.check_state(u)?;
        system.model().flux(u, &mut flux);
        let w = quadrature_weight(grid, &grid.multi_index(p));
        let grad = &sampled.gradient[k * dirs..(k + 1) * dirs];
        for i in 0..n {
            let s: f64 = (0..dirs).map(|a| flux[i * dirs + a] * grad[a]).sum();
            out[i] += w * s;
        }
    }
    Ok(out)
}

pub(crate) fn check_field(system: &SystemSpec, field: &Field) -> Result<()> {
    if field.components() != system.n() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} components, system `{}` has {}",
            field.components(),
            system.name(),
            system.n()
        )));
    }
    if field.grid().dims() != system.directions() {
        return Err(Error::DimensionMismatch(format!(
            "field grid has {} axes, system `{}` needs d + 1 = {}",
            field.grid().dims(),
            system.name(),
            system.directions()
        )));
    }
    Ok(())
}
