use super::companion::{companion_residual_mollified, flux_commutator};
use super::moduli::vmo_modulus;
use super::report::{ScalingParams, ScalingReport};
use crate::error::{Error, Result};
use crate::field::{field_norm_p, field_norm_p_with, Field, InteriorRegion, NormKind, TestFunction};
use crate::mollify::{make_kernel, mollified_derivative, mollify, KernelProfile};
use crate::systems::SystemSpec;

fn check_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon list".into()));
    }
    let mut e = epsilons.to_vec();
    e.sort_by(|a, b| b.total_cmp(a));
    Ok(e)
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be >= 1, got {p}")));
    }
    Ok(())
}

/// `|| u * eta^eps - u ||_{L^p(region)}` over the given scales.
pub fn mollification_error_scaling(
    field: &Field,
    p: f64,
    profile: KernelProfile,
    epsilons: &[f64],
    region: &InteriorRegion,
) -> Result<ScalingReport> {
    check_exponent("p", p)?;
    let eps = check_epsilons(epsilons)?;
    let mut pairs = Vec::with_capacity(eps.len());
    for &e in &eps {
        let k = make_kernel(field.grid(), e, profile)?;
        let diff = mollify(field, &k, region)?.sub(field)?;
        pairs.push((e, field_norm_p(&diff, p, region)?));
    }
    ScalingReport::build(
        "mollification_error",
        pairs,
        None,
        field.sup_norm().max(1.0),
        region.describe(),
        ScalingParams {
            p: Some(p),
            kernel_profile: Some(profile.to_string()),
            ..Default::default()
        },
    )
}

/// Mollified-gradient norms `max_a || d_a (u * eta^eps) ||_{L^p(region)}`
/// against the bound `omega(eps)^(1/p) eps^(-1/p')`.
pub fn gradient_scaling(
    field: &Field,
    p: f64,
    profile: KernelProfile,
    epsilons: &[f64],
    region: &InteriorRegion,
) -> Result<ScalingReport> {
    check_exponent("p", p)?;
    let eps = check_epsilons(epsilons)?;
    let grid = field.grid();
    let conj = if p > 1.0 { p / (p - 1.0) } else { f64::INFINITY };
    let mut pairs = Vec::with_capacity(eps.len());
    let mut bounds = Vec::with_capacity(eps.len());
    for &e in &eps {
        let k = make_kernel(grid, e, profile)?;
        let mut best: f64 = 0.0;
        for axis in 0..grid.dims() {
            let d = mollified_derivative(field, &k, axis, region)?;
            best = best.max(field_norm_p(&d, p, region)?);
        }
        pairs.push((e, best));
        let omega = vmo_modulus(field, p, e, region)?;
        bounds.push(omega.powf(1.0 / p) * e.powf(-1.0 / conj));
    }
    let scale = field.sup_norm().max(1.0) / eps.last().copied().unwrap_or(1.0);
    ScalingReport::build(
        "gradient_norm",
        pairs,
        Some(bounds),
        scale,
        region.describe(),
        ScalingParams {
            p: Some(p),
            kernel_profile: Some(profile.to_string()),
            ..Default::default()
        },
    )
}

/// Commutator norms `max_{i,a} || G_ia(u^eps) - G_ia(u)^eps ||_{L^q(region)}`
/// against `(eps * omega(eps; q (gamma + 1)))^(1/q)`, with `gamma` the
/// system's Hölder exponent unless overridden.
pub fn commutator_scaling(
    system: &SystemSpec,
    field: &Field,
    q: f64,
    profile: KernelProfile,
    epsilons: &[f64],
    region: &InteriorRegion,
    gamma: Option<f64>,
) -> Result<ScalingReport> {
    check_exponent("q", q)?;
    let eps = check_epsilons(epsilons)?;
    let gamma = gamma.unwrap_or(system.gamma());
    let p = q * (gamma + 1.0);
    let grid = field.grid();
    let comps = system.n() * system.directions();
    let mut pairs = Vec::with_capacity(eps.len());
    let mut bounds = Vec::with_capacity(eps.len());
    for &e in &eps {
        let k = make_kernel(grid, e, profile)?;
        let c = flux_commutator(system, field, &k, region)?;
        let mut best: f64 = 0.0;
        for comp in 0..comps {
            best = best.max(field_norm_p_with(&c, q, region, NormKind::Component(comp))?);
        }
        pairs.push((e, best));
        bounds.push((e * vmo_modulus(field, p, e, region)?).powf(1.0 / q));
    }
    let flux_scale = (0..grid.len())
        .filter(|&x| field.is_valid(x))
        .flat_map(|x| system.flux(field.state(x)))
        .fold(1.0f64, |m, v| m.max(v.abs()));
    ScalingReport::build(
        "commutator_norm",
        pairs,
        Some(bounds),
        flux_scale,
        region.describe(),
        ScalingParams {
            p: Some(p),
            q: Some(q),
            gamma: Some(gamma),
            kernel_profile: Some(profile.to_string()),
            ..Default::default()
        },
    )
}

/// `|R_eps|` against a test function over the given scales; the signed
/// values are kept alongside.
pub fn residual_scaling(
    system: &SystemSpec,
    field: &Field,
    test: &TestFunction,
    profile: KernelProfile,
    epsilons: &[f64],
) -> Result<ScalingReport> {
    let eps = check_epsilons(epsilons)?;
    let mut pairs = Vec::with_capacity(eps.len());
    let mut signed = Vec::with_capacity(eps.len());
    let mut bounds = Vec::with_capacity(eps.len());
    for &e in &eps {
        let k = make_kernel(field.grid(), e, profile)?;
        let r = companion_residual_mollified(system, field, &k, test)?;
        pairs.push((e, r.value.abs()));
        signed.push(r.value);
        bounds.push(r.quadrature_bound);
    }
    let scale = (0..field.grid().len())
        .filter(|&x| field.is_valid(x))
        .flat_map(|x| system.companion(field.state(x)))
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let mut report = ScalingReport::build(
        "companion_residual",
        pairs,
        None,
        scale,
        format!("test function support {:?}", test.support()),
        ScalingParams {
            gamma: Some(system.gamma()),
            kernel_profile: Some(profile.to_string()),
            ..Default::default()
        },
    )?;
    report.signed_values = Some(signed);
    report.add_note(format!(
        "quadrature bounds per eps (descending): {:?}",
        bounds.iter().map(|b| format!("{b:.3e}")).collect::<Vec<_>>()
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_function, Grid};
    use crate::systems::burgers_system;

    #[test]
    fn constant_field_is_degenerate() {
        let g = Grid::torus_1d(256, 1.0).unwrap();
        let f = Field::constant(g.clone(), &[0.3]).unwrap();
        let r = InteriorRegion::full(&g);
        let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let gr = gradient_scaling(&f, 3.0, KernelProfile::Bump, &eps, &r).unwrap();
        assert!(gr.is_degenerate() && gr.bound_holds(0.1));
        assert!(gr.values().iter().all(|v| *v <= 1e-12));
        let sys = crate::systems::custom_system(
            &serde_json::from_str(
                r#"{"name":"b","n":1,"d":0,"gamma":1.0,"sample_box":[[-2,2]],
                    "flux":[[[{"coef":0.5,"powers":[2]}]]],"companion":[[]],"multipliers":[[]]}"#,
            )
            .unwrap(),
        )
        .unwrap();
        let c = commutator_scaling(&sys, &f, 1.5, KernelProfile::Bump, &eps, &r, None).unwrap();
        assert!(c.is_degenerate());
    }

    #[test]
    fn smooth_field_mollification_error_is_quadratic() {
        // symmetric kernels leave an O(eps^2) error on smooth data
        let g = Grid::torus_1d(1024, 1.0).unwrap();
        let f = sample_function(&g, 1, |x, out| out[0] = (2.0 * std::f64::consts::PI * x[0]).sin()).unwrap();
        let r = InteriorRegion::full(&g);
        let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let rep = mollification_error_scaling(&f, 2.0, KernelProfile::Bump, &eps, &r).unwrap();
        assert!((rep.fitted_slope.unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn residual_signs_are_kept() {
        let g = Grid::spacetime_1d(128, 1.0, 128, 1.0).unwrap();
        let f = sample_function(&g, 1, |x, out| out[0] = if x[1] < 0.5 { 1.0 } else { -1.0 }).unwrap();
        let phi = TestFunction::new(&g, &[0.5, 0.5], &[0.3, 0.25]).unwrap();
        let rep = residual_scaling(&burgers_system(), &f, &phi, KernelProfile::TensorBump, &[0.1, 0.08, 0.05]).unwrap();
        let signed = rep.signed_values.unwrap();
        assert!(signed.iter().all(|v| *v < 0.0));
    }
}
