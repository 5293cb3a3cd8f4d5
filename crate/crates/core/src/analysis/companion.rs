use serde::Serialize;

use super::{integrate_box, tabulate, Integral, IndexBox};
use crate::error::{Error, Result};
use crate::field::{Field, InteriorRegion, TestFunction, MAX_AXES};
use crate::mollify::{mollified_derivative, mollify, Kernel};
use crate::parallel::*;
use crate::systems::SystemSpec;

fn check_system_field(system: &SystemSpec, field: &Field) -> Result<()> {
    crate::systems::check_field_shape(system, field)
}

/// Mollified states may leave a strict domain bound by rounding only
/// (the domain is convex). Pull such states back onto the domain and
/// reject anything further out.
fn admissible(system: &SystemSpec, u: &mut [f64]) -> Result<()> {
    if system.domain().contains(u) {
        return Ok(());
    }
    let dom = system.domain();
    for (j, x) in u.iter_mut().enumerate() {
        let scale = 1e-12 * (1.0 + x.abs());
        if let Some(lo) = dom.lower[j] {
            if *x <= lo && lo - *x <= scale {
                log::warn!("clamping component {j} of a mollified state from {x} into the domain");
                *x = lo + scale;
            }
        }
        if let Some(hi) = dom.upper[j] {
            if *x >= hi && *x - hi <= scale {
                log::warn!("clamping component {j} of a mollified state from {x} into the domain");
                *x = hi - scale;
            }
        }
    }
    system.check_state(u)
}

/// `[u, G(u)]` stacked per point, so one convolution yields both `u^eps` and
/// `G(u)^eps`.
fn stack_with_flux(system: &SystemSpec, field: &Field) -> Result<Field> {
    let (n, m) = (system.n(), system.n() * system.directions());
    for p in 0..field.grid().len() {
        if field.is_valid(p) {
            system.check_state(field.state(p))?;
        }
    }
    Ok(field.map_states(n + m, |u, out| {
        out[..n].copy_from_slice(u);
        system.model().flux(u, &mut out[n..]);
    }))
}

/// Mollified states and the commutator `G(u^eps) - G(u)^eps`, both over the
/// region (points outside are invalid). Component `(i, a)` of the commutator
/// sits at `i * (d + 1) + a`.
pub fn commutator_field_and_states(
    system: &SystemSpec,
    field: &Field,
    kernel: &Kernel,
    region: &InteriorRegion,
) -> Result<(Field, Field)> {
    check_system_field(system, field)?;
    let (n, m) = (system.n(), system.n() * system.directions());
    let stacked = mollify(&stack_with_flux(system, field)?, kernel, region)?;
    let grid = field.grid();
    let mut states = vec![0.0; grid.len() * n];
    let mut comm = vec![0.0; grid.len() * m];
    let mut valid = vec![false; grid.len()];
    let failures: Vec<Error> = states
        .par_chunks_mut(n)
        .zip(comm.par_chunks_mut(m))
        .zip(valid.par_iter_mut())
        .enumerate()
        .filter_map(|(p, ((us, cs), ok))| {
            if !stacked.is_valid(p) {
                return None;
            }
            let s = stacked.state(p);
            us.copy_from_slice(&s[..n]);
            if let Err(e) = admissible(system, us) {
                return Some(e);
            }
            system.model().flux(us, cs);
            for (c, g) in cs.iter_mut().zip(&s[n..]) {
                *c -= g;
            }
            *ok = true;
            None
        })
        .collect();
    if let Some(e) = failures.into_iter().next() {
        return Err(e);
    }
    let states = Field::from_raw(grid.clone(), n, states, Some(valid.clone()));
    let comm = Field::from_raw(grid.clone(), m, comm, Some(valid));
    Ok((states, comm))
}

/// `G_ia(u^eps) - G_ia(u)^eps` on the region, `n * (d + 1)` components.
pub fn flux_commutator(system: &SystemSpec, field: &Field, kernel: &Kernel, region: &InteriorRegion) -> Result<Field> {
    Ok(commutator_field_and_states(system, field, kernel, region)?.1)
}

/// `R_eps` in integrated-by-parts form, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifiedResidual {
    pub value: f64,
    /// `-int d_a phi B_i(u^eps) C_ia`.
    pub gradient_term: f64,
    /// `-int phi (DB_i(u^eps) . d_a u^eps) C_ia`.
    pub multiplier_term: f64,
    pub quadrature_bound: f64,
    pub epsilon: f64,
}

/// The test function's lattice box inside the region kept `eps` from
/// bounded edges, or an error when the support reaches closer.
fn support_box(field: &Field, test: &TestFunction, epsilon: f64) -> Result<InteriorRegion> {
    let grid = field.grid();
    let inner = InteriorRegion::with_margin(grid, epsilon)?;
    if !test.fits_in(&inner) {
        return Err(Error::MarginTooSmall {
            axis: (0..grid.dims()).find(|&a| !grid.periodic()[a]).unwrap_or(0),
            margin: inner.min_bounded_margin(),
            required: epsilon,
        });
    }
    let (lo, hi) = test.lattice_box(grid);
    inner.sub_box(&lo, &hi)
}

/// `R_eps = int phi B_i(u^eps) d_a (G_ia(u^eps) - G_ia(u)^eps)`, evaluated as
/// `-int d_a phi B_i(u^eps) C_ia - int phi DB_i(u^eps) d_a u^eps C_ia`.
///
/// For a weak solution `R_eps = int phi d_a Q_a(u^eps)`, so it converges to
/// minus [`companion_weak_residual`]: at a dissipative shock it tends to
/// `-int phi d(mu)` for the dissipation measure `mu >= 0`.
pub fn companion_residual_mollified(
    system: &SystemSpec,
    field: &Field,
    kernel: &Kernel,
    test: &TestFunction,
) -> Result<MollifiedResidual> {
    check_system_field(system, field)?;
    let grid = field.grid();
    let bx = support_box(field, test, kernel.epsilon())?;
    let (states, comm) = commutator_field_and_states(system, field, kernel, &bx)?;
    let (n, dirs) = (system.n(), system.directions());
    let derivs: Vec<Field> = (0..dirs)
        .map(|a| mollified_derivative(field, kernel, a, &bx))
        .collect::<Result<_>>()?;
    let term = |flat: usize, idx: &crate::field::Index, which: usize| -> Result<f64> {
        let mut x = [0.0; MAX_AXES];
        for a in 0..dirs {
            x[a] = grid.coordinate(a, idx[a]);
        }
        let phi = test.value(&x[..dirs]);
        let grad = test.gradient(&x[..dirs]);
        if phi == 0.0 && grad[..dirs].iter().all(|g| *g == 0.0) {
            return Ok(0.0);
        }
        let u = states.state(flat);
        let c = comm.state(flat);
        let b = system.multipliers(u);
        if which == 0 {
            let mut s = 0.0;
            for a in 0..dirs {
                let bc: f64 = (0..n).map(|i| b[i] * c[i * dirs + a]).sum();
                s += grad[a] * bc;
            }
            Ok(-s)
        } else {
            let db = system.multiplier_gradient(u);
            let mut s = 0.0;
            for a in 0..dirs {
                let du = derivs[a].state(flat);
                for i in 0..n {
                    let chain: f64 = (0..n).map(|j| db[i * n + j] * du[j]).sum();
                    s += chain * c[i * dirs + a];
                }
            }
            Ok(-phi * s)
        }
    };
    let t1 = tabulate(grid, &bx, |p, idx| term(p, idx, 0))?;
    let t2 = tabulate(grid, &bx, |p, idx| term(p, idx, 1))?;
    let total: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a + b).collect();
    let i1 = integrate_box(grid, &bx, &t1);
    let i2 = integrate_box(grid, &bx, &t2);
    let all = integrate_box(grid, &bx, &total);
    Ok(MollifiedResidual {
        value: all.value,
        gradient_term: i1.value,
        multiplier_term: i2.value,
        quadrature_bound: all.quadrature_bound,
        epsilon: kernel.epsilon(),
    })
}

/// `sum_a int Q_a(u) d_a phi dx` by lattice quadrature over the support of
/// `phi`. For a solution with a dissipation measure `mu = -d_a Q_a(u) >= 0`
/// this equals `+int phi d(mu)`.
pub fn companion_weak_residual(system: &SystemSpec, field: &Field, test: &TestFunction) -> Result<Integral> {
    check_system_field(system, field)?;
    let grid = field.grid();
    let dirs = system.directions();
    let (lo, hi) = test.lattice_box(grid);
    let bx = InteriorRegion::full(grid).sub_box(&lo, &hi)?;
    let values = tabulate(grid, &bx, |p, idx| {
        let mut x = [0.0; MAX_AXES];
        for a in 0..dirs {
            x[a] = grid.coordinate(a, idx[a]);
        }
        let grad = test.gradient(&x[..dirs]);
        if grad[..dirs].iter().all(|g| *g == 0.0) {
            return Ok(0.0);
        }
        if !field.is_valid(p) {
            return Err(Error::InvalidParameter("test function support meets invalid samples".into()));
        }
        let u = field.state(p);
        system.check_state(u)?;
        let q = system.companion(u);
        let w = crate::field::quadrature_weight(grid, idx) / grid.cell_volume();
        Ok(w * (0..dirs).map(|a| q[a] * grad[a]).sum::<f64>())
    })?;
    Ok(integrate_box(grid, &bx, &values))
}

/// Pointwise `D^eps = B_i(u^eps) d_a C_ia` on a region, with `d_a` taken by
/// centered differences of the commutator field.
#[derive(Debug, Clone)]
pub struct DissipationField {
    pub values: Field,
    pub epsilon: f64,
    pub system: String,
    pub region: String,
}

impl DissipationField {
    /// `int D^eps phi` over the points where `D^eps` is defined.
    pub fn integrate(&self, test: &TestFunction) -> Result<Integral> {
        self.integrate_where(test, |_| true)
    }

    /// `int D^eps phi` restricted to `|x_axis - center| <= half_width`
    /// (nearest periodic image on periodic axes).
    pub fn integrate_band(&self, test: &TestFunction, axis: usize, center: f64, half_width: f64) -> Result<Integral> {
        let grid = self.values.grid();
        if axis >= grid.dims() {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        let (len, periodic) = (grid.extent()[axis], grid.periodic()[axis]);
        self.integrate_where(test, move |x: &[f64]| {
            let mut d = x[axis] - center;
            if periodic {
                d -= len * (d / len).round();
            }
            d.abs() <= half_width
        })
    }

    fn integrate_where<F: Fn(&[f64]) -> bool + Sync + Send>(&self, test: &TestFunction, keep: F) -> Result<Integral> {
        let grid = self.values.grid();
        let dims = grid.dims();
        let (lo, hi) = test.lattice_box(grid);
        let bx = InteriorRegion::full(grid).sub_box(&lo, &hi)?;
        let values = tabulate(grid, &bx, |p, idx| {
            let mut x = [0.0; MAX_AXES];
            for a in 0..dims {
                x[a] = grid.coordinate(a, idx[a]);
            }
            let phi = test.value(&x[..dims]);
            if phi == 0.0 || !keep(&x[..dims]) {
                return Ok(0.0);
            }
            if !self.values.is_valid(p) {
                return Err(Error::MarginTooSmall {
                    axis: 0,
                    margin: 0.0,
                    required: self.epsilon,
                });
            }
            Ok(phi * self.values.value(p, 0))
        })?;
        Ok(integrate_box(grid, &bx, &values))
    }
}

/// `D^eps(x) = sum_{i,a} B_i(u^eps(x)) d_a C_ia(x)` on the region. Centered
/// differences need both neighbours inside the region, so on bounded axes
/// the outermost region layer is left invalid.
pub fn dissipation_density(
    system: &SystemSpec,
    field: &Field,
    kernel: &Kernel,
    region: &InteriorRegion,
) -> Result<DissipationField> {
    let (states, comm) = commutator_field_and_states(system, field, kernel, region)?;
    let grid = field.grid();
    let (n, dirs) = (system.n(), system.directions());
    let bx = IndexBox::of(region);
    let mut values = vec![0.0; grid.len()];
    let mut valid = vec![false; grid.len()];
    let cells: Vec<Option<(usize, f64)>> = (0..bx.len())
        .into_par_iter()
        .map(|k| {
            let idx = bx.index(k);
            let p = grid.flat_index(&idx);
            let b = system.multipliers(states.state(p));
            let mut total = 0.0;
            for a in 0..dirs {
                let mut plus = [0i64; MAX_AXES];
                plus[a] = 1;
                let mut minus = [0i64; MAX_AXES];
                minus[a] = -1;
                let up = grid.offset_index(&idx, &plus[..dirs])?;
                let dn = grid.offset_index(&idx, &minus[..dirs])?;
                if !comm.is_valid(up) || !comm.is_valid(dn) {
                    return None;
                }
                let h2 = 2.0 * grid.spacing()[a];
                let (cu, cd) = (comm.state(up), comm.state(dn));
                for i in 0..n {
                    total += b[i] * (cu[i * dirs + a] - cd[i * dirs + a]) / h2;
                }
            }
            Some((p, total))
        })
        .collect();
    for (p, v) in cells.into_iter().flatten() {
        values[p] = v;
        valid[p] = true;
    }
    Ok(DissipationField {
        values: Field::from_raw(grid.clone(), 1, values, Some(valid)),
        epsilon: kernel.epsilon(),
        system: system.name().to_string(),
        region: region.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_function, Grid};
    use crate::mollify::{make_kernel, KernelProfile};
    use crate::systems::{burgers_system, custom_system, CustomSystemDef};

    fn linear_system() -> SystemSpec {
        let def: CustomSystemDef = serde_json::from_str(
            r#"{"name":"linear","n":2,"d":1,"gamma":1.0,"sample_box":[[-1,1],[-1,1]],
                "flux":[[[{"coef":1.0,"powers":[1,0]}],[{"coef":2.0,"powers":[0,1]}]],
                        [[{"coef":1.0,"powers":[0,1]}],[{"coef":3.0,"powers":[1,0]},{"coef":-1.0,"powers":[0,1]}]]],
                "companion":[[],[]],"multipliers":[[],[]]}"#,
        )
        .unwrap();
        custom_system(&def).unwrap()
    }

    #[test]
    fn linear_flux_commutes() {
        let g = Grid::spacetime_1d(48, 1.0, 64, 1.0).unwrap();
        let f = sample_function(&g, 2, |x, out| {
            out[0] = (5.0 * x[0]).sin() + if x[1] < 0.3 { 1.0 } else { 0.0 };
            out[1] = x[0] * x[1];
        })
        .unwrap();
        let region = InteriorRegion::with_margin(&g, 0.2).unwrap();
        for profile in [KernelProfile::Bump, KernelProfile::TensorBump] {
            let k = make_kernel(&g, 0.15, profile).unwrap();
            let c = flux_commutator(&linear_system(), &f, &k, &region).unwrap();
            for p in region.flat_indices() {
                assert!(c.state(p).iter().all(|v| v.abs() <= 1e-12));
            }
        }
    }

    #[test]
    fn constant_field_gives_zero() {
        let g = Grid::spacetime_1d(64, 1.0, 64, 1.0).unwrap();
        let f = Field::constant(g.clone(), &[0.8]).unwrap();
        let sys = burgers_system();
        let k = make_kernel(&g, 0.1, KernelProfile::TensorBump).unwrap();
        let region = InteriorRegion::with_margin(&g, 0.1).unwrap();
        let c = flux_commutator(&sys, &f, &k, &region).unwrap();
        assert!(region.flat_indices().iter().all(|&p| c.state(p).iter().all(|v| v.abs() <= 1e-12)));
        let phi = TestFunction::new(&g, &[0.5, 0.5], &[0.3, 0.3]).unwrap();
        let r = companion_residual_mollified(&sys, &f, &k, &phi).unwrap();
        assert!(r.value.abs() <= 1e-12);
        let d = dissipation_density(&sys, &f, &k, &region).unwrap();
        assert!(d.values.values().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn burgers_commutator_at_symmetric_straddle() {
        // oracle: the kernel at x = 0.5 puts equal mass on the values a and b
        // and weight w0 on the midpoint value sampled at the jump itself, so
        // mean = (a + b)/2, variance = (1 - w0) (b - a)^2 / 4 and the
        // commutator of G = u^2/2 is minus half the variance
        let n = 256;
        let g = Grid::torus_1d(n, 1.0).unwrap();
        let (a, b) = (-0.5, 1.5);
        let f = sample_function(&g, 1, |x, out| {
            out[0] = if x[0] < 0.5 { a } else if x[0] > 0.5 { b } else { 0.5 * (a + b) };
        })
        .unwrap();
        let k = make_kernel(&g, 8.0 / n as f64, KernelProfile::Bump).unwrap();
        let def: CustomSystemDef = serde_json::from_str(
            r#"{"name":"b","n":1,"d":0,"gamma":1.0,"sample_box":[[-2,2]],
                "flux":[[[{"coef":0.5,"powers":[2]}]]],"companion":[[]],"multipliers":[[]]}"#,
        )
        .unwrap();
        let sys = custom_system(&def).unwrap();
        let c = flux_commutator(&sys, &f, &k, &InteriorRegion::full(&g)).unwrap();
        let w0 = k.taps().iter().find(|t| t.offset == vec![0]).unwrap().weight / n as f64;
        let expect = -(1.0 - w0) * (b - a) * (b - a) / 8.0;
        assert!((c.value(n / 2, 0) - expect).abs() <= 1e-6);
    }

    #[test]
    fn weak_residual_locality_and_linearity() {
        let g = Grid::spacetime_1d(128, 1.0, 128, 1.0).unwrap();
        let f = sample_function(&g, 1, |x, out| out[0] = if x[1] < 0.5 { 1.0 } else { -1.0 }).unwrap();
        let sys = burgers_system();
        // phi away from both jumps (x = 0 and x = 0.5) sees a constant field
        let far = TestFunction::new(&g, &[0.5, 0.25], &[0.3, 0.15]).unwrap();
        let r = companion_weak_residual(&sys, &f, &far).unwrap();
        assert!(r.value.abs() <= 1e-10);
        let phi = TestFunction::new(&g, &[0.5, 0.5], &[0.3, 0.2]).unwrap();
        let one = companion_weak_residual(&sys, &f, &phi).unwrap().value;
        let g2 = sample_function(&g, 1, |x, out| out[0] = if x[1] < 0.5 { 1.0 } else { -1.0 }).unwrap();
        assert_eq!(companion_weak_residual(&sys, &g2, &phi).unwrap().value, one);
    }
}
