//! Acceptance suite: one pass/fail line per criterion, with measured values.
//! Runs under `cargo test` (custom harness) and exits non-zero on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use clcons::analysis::{
    commutator_scaling, companion_residual_mollified, companion_weak_residual, dissipation_density,
    dyadic_epsilons, flux_commutator, gradient_scaling, residual_scaling,
};
use clcons::field::{sample_function, Field, Grid, InteriorRegion, TestFunction};
use clcons::generators::{
    burgers_riemann, burgers_smooth, fv_solve, riemann_initial_data, step_field, weierstrass_field, BurgersRiemann,
    FvOptions,
};
use clcons::mollify::{make_kernel, mollify, KernelProfile};
use clcons::systems::{
    burgers_system, compatibility_residual, custom_system, derivative_fd_check, euler_system, psystem_elasticity,
    random_states, EulerParams, StoredEnergy, SystemSpec,
};

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Composite Simpson rule with `m` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let s: f64 = (0..=m)
        .map(|k| {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f(a + k as f64 * h)
        })
        .sum();
    s * h / 3.0
}

/// Ordinary least-squares slope of `log y` against `log x`.
fn ls_slope(pairs: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pairs.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

fn check(ok: &mut bool, notes: &mut Vec<String>, pass: bool, what: String) {
    *ok &= pass;
    notes.push(format!("{}{}", if pass { "" } else { "FAILED " }, what));
}

/// `(2/3) int phi(x0, t) dt`: the Burgers dissipation measure of a unit
/// stationary shock at `x0` tested against `phi`, by Simpson quadrature.
fn shock_oracle(phi: &TestFunction, x0: f64, rate: f64) -> f64 {
    let (c, r) = (phi.center()[0], phi.radius()[0]);
    rate * simpson(|t| phi.value(&[t, x0]), c - r, c + r, 20_000)
}

// ---------------------------------------------------------------------------

fn structural() -> Outcome {
    let systems = [
        burgers_system(),
        euler_system(&EulerParams::default()).map_err(err)?,
        euler_system(&EulerParams { d: 2, ..Default::default() }).map_err(err)?,
        psystem_elasticity(StoredEnergy::Power { gamma: 0.5 }).map_err(err)?,
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (k, sys) in systems.iter().enumerate() {
        let states = random_states(sys, 1000, 100 + k as u64);
        let comp = compatibility_residual(sys, &states).map_err(err)?.max_residual;
        let fd = derivative_fd_check(sys, &states, 1e-6).map_err(err)?.max_error();
        let pass = comp <= 1e-8 && fd <= 1e-5;
        check(&mut ok, &mut notes, pass, format!("{} d={}: compat {comp:.1e}, fd {fd:.1e}", sys.name(), sys.d()));
    }
    Ok((ok, notes.join("; ")))
}

fn kernels() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let grids = [
        Grid::torus_1d(1024, 1.0).map_err(err)?,
        Grid::new(&[96, 128], &[1.0, 1.0], &[false, true]).map_err(err)?,
    ];
    let mut worst_mass: f64 = 0.0;
    let mut worst_const: f64 = 0.0;
    for g in &grids {
        let region = InteriorRegion::with_margin(g, 0.1).map_err(err)?;
        let f = Field::constant(g.clone(), &[1.7, -0.4]).map_err(err)?;
        for profile in [KernelProfile::Bump, KernelProfile::TensorBump] {
            for eps in [4.0 * g.max_spacing(), 0.05] {
                let k = make_kernel(g, eps, profile).map_err(err)?;
                let mass: f64 = k.taps().iter().map(|t| t.weight).sum::<f64>() * g.cell_volume();
                worst_mass = worst_mass.max((mass - 1.0).abs());
                let m = mollify(&f, &k, &region).map_err(err)?;
                for p in region.flat_indices() {
                    worst_const = worst_const.max((m.value(p, 0) - 1.7).abs()).max((m.value(p, 1) + 0.4).abs());
                }
            }
        }
    }
    check(&mut ok, &mut notes, worst_mass <= 1e-12, format!("mass error {worst_mass:.1e}"));
    check(&mut ok, &mut notes, worst_const <= 1e-12, format!("constant error {worst_const:.1e}"));

    // linear flux G(u) = (u, 2u - 0.5 v, ...) commutes with convolution
    let lin = custom_system(
        &serde_json::from_str(
            r#"{"name":"linear","n":2,"d":1,"gamma":1.0,"sample_box":[[-2,2],[-2,2]],
                "flux":[[[{"coef":1,"powers":[1,0]}],[{"coef":2,"powers":[1,0]},{"coef":-0.5,"powers":[0,1]}]],
                        [[{"coef":1,"powers":[0,1]}],[{"coef":3,"powers":[0,1]}]]],
                "companion":[[],[]],"multipliers":[[],[]]}"#,
        )
        .map_err(err)?,
    )
    .map_err(err)?;
    let g = Grid::new(&[128, 128], &[1.0, 1.0], &[true, true]).map_err(err)?;
    let u = sample_function(&g, 2, |x, out| {
        out[0] = (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + (x[0] * 40.0).floor() * 0.1;
        out[1] = (6.0 * PI * x[1]).sin();
    })
    .map_err(err)?;
    let k = make_kernel(&g, 0.06, KernelProfile::Bump).map_err(err)?;
    let c = flux_commutator(&lin, &u, &k, &InteriorRegion::full(&g)).map_err(err)?;
    let lin_err = c.sup_norm();
    check(&mut ok, &mut notes, lin_err <= 1e-12, format!("linear commutator {lin_err:.1e}"));

    // symbol oracle: continuous transform of the normalized bump at frequency 1
    let g = Grid::torus_1d(1024, 1.0).map_err(err)?;
    let eps = 1.0 / 16.0;
    let b = |x: f64| {
        let z = x / eps;
        if z.abs() < 1.0 {
            (-1.0 / (1.0 - z * z)).exp()
        } else {
            0.0
        }
    };
    let symbol = simpson(|x| b(x) * (2.0 * PI * x).cos(), -eps, eps, 40_000) / simpson(b, -eps, eps, 40_000);
    let f = sample_function(&g, 1, |x, out| out[0] = (2.0 * PI * x[0]).sin()).map_err(err)?;
    let k = make_kernel(&g, eps, KernelProfile::Bump).map_err(err)?;
    let m = mollify(&f, &k, &InteriorRegion::full(&g)).map_err(err)?;
    let sym_err = (0..g.len())
        .map(|p| (m.value(p, 0) - symbol * (2.0 * PI * g.coordinate(0, p)).sin()).abs())
        .fold(0.0, f64::max);
    check(&mut ok, &mut notes, sym_err <= 1e-10, format!("symbol error {sym_err:.1e}"));
    Ok((ok, notes.join("; ")))
}

fn weierstrass_4096() -> Result<Field, String> {
    let g = Grid::torus_1d(4096, 1.0).map_err(err)?;
    weierstrass_field(&g, 0.4, 12, 7, 1).map_err(err)
}

fn commutator_scaling_check() -> Outcome {
    let f = weierstrass_4096()?;
    let g = f.grid().clone();
    let eps = dyadic_epsilons(&g, Some(1.0 / 256.0), Some(1.0 / 16.0)).map_err(err)?;
    let sys = burgers_system().spatial_part().map_err(err)?;
    let rep = commutator_scaling(&sys, &f, 1.5, KernelProfile::Bump, &eps, &InteriorRegion::full(&g), None)
        .map_err(err)?;
    let slope = ls_slope(&rep.pairs);
    let ratios = rep.ratios.clone().ok_or("no ratios")?;
    let ratio_pairs: Vec<(f64, f64)> = eps.iter().copied().zip(ratios).collect();
    let ratio_slope = ls_slope(&ratio_pairs);
    let pass = slope >= 0.6 && ratio_slope >= -0.1;
    Ok((pass, format!("commutator slope {slope:.3} (>= 0.60), ratio slope {ratio_slope:.3} (>= -0.10)")))
}

fn gradient_scaling_check() -> Outcome {
    let f = weierstrass_4096()?;
    let g = f.grid().clone();
    let eps = dyadic_epsilons(&g, Some(1.0 / 256.0), Some(1.0 / 16.0)).map_err(err)?;
    let full = InteriorRegion::full(&g);
    let w = gradient_scaling(&f, 3.0, KernelProfile::Bump, &eps, &full).map_err(err)?;
    let step = step_field(&g, -1.0, 1.0, 0.25).map_err(err)?;
    let s = gradient_scaling(&step, 3.0, KernelProfile::Bump, &eps, &full).map_err(err)?;
    let (ws, ss) = (ls_slope(&w.pairs), ls_slope(&s.pairs));
    let pass = (ws + 0.6).abs() <= 0.1 && (ss + 2.0 / 3.0).abs() <= 0.1;
    Ok((pass, format!("Weierstrass slope {ws:.3} (-0.6 +- 0.1), step slope {ss:.3} (-0.667 +- 0.1)")))
}

/// Field, system and test function of the criteria whose self-consistency
/// is checked at the end.
struct Case {
    label: &'static str,
    system: SystemSpec,
    field: Field,
    test: TestFunction,
    epsilon: f64,
}

fn smooth_case(points: usize) -> Result<(Field, TestFunction), String> {
    let g = Grid::spacetime_1d(points, 0.5, points, 1.0).map_err(err)?;
    let f = burgers_smooth(&g, 0.1, 0.5).map_err(err)?;
    let phi = TestFunction::new(&g, &[0.25, 0.5], &[0.18, 0.3]).map_err(err)?;
    Ok((f, phi))
}

fn smooth_positive(cases: &mut Vec<Case>) -> Outcome {
    let sys = burgers_system();
    let (f, phi) = smooth_case(1024)?;
    let eps = dyadic_epsilons(f.grid(), None, None).map_err(err)?;
    let rep = residual_scaling(&sys, &f, &phi, KernelProfile::TensorBump, &eps).map_err(err)?;
    let values = rep.values();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let slope = ls_slope(&rep.pairs);
    let mut ok = true;
    let mut notes = Vec::new();
    check(
        &mut ok,
        &mut notes,
        decreasing && slope >= 1.0,
        format!("|R_eps| slope {slope:.3} (>= 1), eps {:.4}..{:.4}, decreasing {decreasing}", eps[0], eps[eps.len() - 1]),
    );
    let mut weak = Vec::new();
    for n in [256, 512, 1024] {
        let (f, phi) = smooth_case(n)?;
        weak.push(companion_weak_residual(&sys, &f, &phi).map_err(err)?.value.abs());
    }
    let pass = weak.iter().all(|w| *w <= 1e-4) && weak[1] < weak[0] && weak[2] < weak[1];
    check(&mut ok, &mut notes, pass, format!("weak residual 256/512/1024: {:.2e} {:.2e} {:.2e}", weak[0], weak[1], weak[2]));
    cases.push(Case {
        label: "smooth",
        system: sys,
        field: f,
        test: phi,
        epsilon: eps[eps.len() - 1],
    });
    Ok((ok, notes.join("; ")))
}

fn shock_sharpness(cases: &mut Vec<Case>) -> Outcome {
    let sys = burgers_system();
    let g = Grid::spacetime_1d(1024, 0.45, 1024, 1.0).map_err(err)?;
    let (f, exact) = burgers_riemann(&g, 1.0, -1.0, 0.5).map_err(err)?;
    let phi = TestFunction::new(&g, &[0.225, 0.5], &[0.15, 0.05]).map_err(err)?;
    exact.check_clear(&phi).map_err(err)?;
    let oracle = shock_oracle(&phi, 0.5, exact.dissipation_rate());
    let mut ok = true;
    let mut notes = Vec::new();
    let weak = companion_weak_residual(&sys, &f, &phi).map_err(err)?.value;
    let rel = (weak - oracle).abs() / oracle;
    check(&mut ok, &mut notes, rel <= 0.02, format!("weak {weak:.5} vs oracle {oracle:.5} (rel {rel:.1e})"));
    // R_eps and D^eps carry the opposite sign: R_eps = int phi d_a Q_a(u^eps)
    let eps = dyadic_epsilons(&g, None, None).map_err(err)?;
    let rep = residual_scaling(&sys, &f, &phi, KernelProfile::TensorBump, &eps).map_err(err)?;
    let signed = rep.signed_values.clone().ok_or("no signed values")?;
    let r_small = signed[signed.len() - 1];
    let e_small = eps[eps.len() - 1];
    let rel_r = (-r_small - oracle).abs() / oracle;
    check(&mut ok, &mut notes, rel_r <= 0.10, format!("-R_eps at eps={e_small:.4}: {:.5} (rel {rel_r:.1e})", -r_small));
    let k = make_kernel(&g, e_small, KernelProfile::TensorBump).map_err(err)?;
    let region = density_region(&g, &phi, e_small)?;
    let d = dissipation_density(&sys, &f, &k, &region).map_err(err)?;
    let band = d.integrate_band(&phi, 1, 0.5, e_small + 2.0 * g.spacing()[1]).map_err(err)?.value;
    let rel_d = (-band - oracle).abs() / oracle;
    check(&mut ok, &mut notes, rel_d <= 0.10, format!("-int D phi over band: {:.5} (rel {rel_d:.1e})", -band));
    cases.push(Case {
        label: "stationary shock",
        system: sys,
        field: f,
        test: phi,
        epsilon: e_small,
    });
    Ok((ok, notes.join("; ")))
}

/// Region covering the support of `phi` plus one lattice layer, kept `eps`
/// away from bounded edges.
fn density_region(grid: &Grid, phi: &TestFunction, eps: f64) -> Result<InteriorRegion, String> {
    let (lo, hi) = phi.lattice_box(grid);
    let lo: Vec<usize> = lo.iter().map(|v| v.saturating_sub(1)).collect();
    let hi: Vec<usize> = hi.iter().zip(grid.points()).map(|(v, n)| (v + 1).min(n - 1)).collect();
    InteriorRegion::with_margin(grid, eps).map_err(err)?.sub_box(&lo, &hi).map_err(err)
}

fn fv_burgers(cells: usize, end_time: f64, levels: usize) -> Result<clcons::generators::FvSolution, String> {
    let g = Grid::torus_1d(cells, 1.0).map_err(err)?;
    let init = riemann_initial_data(&g, &[1.0], &[-1.0], 0.5).map_err(err)?;
    fv_solve(
        &burgers_system(),
        &init,
        end_time,
        0.9,
        &FvOptions {
            time_points: Some(levels),
            ..Default::default()
        },
    )
    .map_err(err)
}

fn fv_consistency(cases: &mut Vec<Case>) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let exact = BurgersRiemann::new(1.0, -1.0, 0.5, 1.0, 0.2).map_err(err)?;
    let mut errors = Vec::new();
    let mut drift: f64 = 0.0;
    for cells in [128usize, 256, 512] {
        let sol = fv_burgers(cells, 0.2, 5)?;
        drift = drift.max(sol.max_step_drift);
        let h = 1.0 / cells as f64;
        let last = 4 * cells;
        errors.push(
            (0..cells)
                .map(|j| (sol.field.value(last + j, 0) - exact.value(0.2, j as f64 * h)).abs() * h)
                .sum::<f64>(),
        );
    }
    let sol = fv_burgers(1024, 0.45, 1024)?;
    drift = drift.max(sol.max_step_drift);
    check(&mut ok, &mut notes, drift <= 1e-12, format!("max per-step drift {drift:.1e}"));
    let mono = errors[1] < errors[0] && errors[2] < errors[1];
    check(&mut ok, &mut notes, mono, format!("L1 errors {:.2e} {:.2e} {:.2e}", errors[0], errors[1], errors[2]));
    let g = sol.field.grid().clone();
    let phi = TestFunction::new(&g, &[0.225, 0.5], &[0.15, 0.05]).map_err(err)?;
    BurgersRiemann::new(1.0, -1.0, 0.5, 1.0, 0.45).map_err(err)?.check_clear(&phi).map_err(err)?;
    let oracle = shock_oracle(&phi, 0.5, 2.0 / 3.0);
    let weak = companion_weak_residual(&burgers_system(), &sol.field, &phi).map_err(err)?.value;
    let rel = (weak - oracle).abs() / oracle;
    check(&mut ok, &mut notes, rel <= 0.15, format!("FV dissipation {weak:.5} vs {oracle:.5} (rel {rel:.1e})"));
    cases.push(Case {
        label: "FV Burgers",
        system: burgers_system(),
        field: sol.field,
        test: phi,
        epsilon: 8.0 * g.max_spacing(),
    });
    Ok((ok, notes.join("; ")))
}

fn euler_case(cells: usize, end_time: f64) -> Result<Field, String> {
    let sys = euler_system(&EulerParams::default()).map_err(err)?;
    let g = Grid::torus_1d(cells, 1.0).map_err(err)?;
    let init = riemann_initial_data(&g, &[2.0, 0.0], &[0.5, 0.0], 0.5).map_err(err)?;
    let opts = FvOptions {
        floors: Some(vec![Some(0.1), None]),
        ..Default::default()
    };
    Ok(fv_solve(&sys, &init, end_time, 0.8, &opts).map_err(err)?.field)
}

fn euler_end_to_end(cases: &mut Vec<Case>) -> Outcome {
    let sys = euler_system(&EulerParams::default()).map_err(err)?;
    let t_end = 0.15;
    let mut ok = true;
    let mut notes = Vec::new();
    let f = euler_case(1024, t_end)?;
    let rho_min = (0..f.grid().len()).map(|p| f.value(p, 0)).fold(f64::MAX, f64::min);
    check(&mut ok, &mut notes, rho_min >= 0.1, format!("min rho {rho_min:.3}"));
    // sweep bumps over the space-time box
    let g = f.grid().clone();
    let mut worst = f64::MAX;
    let mut count = 0;
    for rt in [0.03, 0.07] {
        for &ct in &[0.04, 0.075, 0.11] {
            if ct - rt <= 0.0 || ct + rt >= t_end {
                continue;
            }
            for rx in [0.03, 0.1, 0.25] {
                for k in 0..16 {
                    let cx = k as f64 / 16.0;
                    let phi = TestFunction::new(&g, &[ct, cx], &[rt, rx]).map_err(err)?;
                    let r = companion_weak_residual(&sys, &f, &phi).map_err(err)?;
                    worst = worst.min(r.value + 3.0 * r.quadrature_bound);
                    count += 1;
                }
            }
        }
    }
    check(&mut ok, &mut notes, worst >= 0.0, format!("{count} bumps, min(residual + 3 tol) {worst:.2e}"));
    // dissipation around the right-moving shock under refinement
    let mut mags = Vec::new();
    let mut last_field = None;
    let shock_phi = |g: &Grid| TestFunction::new(g, &[0.075, 0.6], &[0.06, 0.15]);
    for cells in [256usize, 512, 1024] {
        let f = if cells == 1024 { f.clone() } else { euler_case(cells, t_end)? };
        let phi = shock_phi(f.grid()).map_err(err)?;
        mags.push(companion_weak_residual(&sys, &f, &phi).map_err(err)?.value);
        last_field = Some(f);
    }
    let changes: Vec<f64> = mags.windows(2).map(|w| (w[1] - w[0]).abs() / w[1].abs()).collect();
    check(
        &mut ok,
        &mut notes,
        changes.iter().all(|c| *c <= 0.2) && mags.iter().all(|m| *m > 0.0),
        format!("shock dissipation {:.4e} {:.4e} {:.4e}, changes {:.1e} {:.1e}", mags[0], mags[1], mags[2], changes[0], changes[1]),
    );
    let field = last_field.ok_or("no field")?;
    let phi = shock_phi(field.grid()).map_err(err)?;
    cases.push(Case {
        label: "FV Euler",
        system: sys,
        epsilon: 8.0 * field.grid().max_spacing(),
        field,
        test: phi,
    });
    Ok((ok, notes.join("; ")))
}

fn self_consistency(cases: &[Case]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for c in cases {
        if let Err(e) = consistency_case(c, &mut ok, &mut notes) {
            check(&mut ok, &mut notes, false, format!("{}: error: {e}", c.label));
        }
    }
    Ok((ok, notes.join("; ")))
}

fn consistency_case(c: &Case, ok: &mut bool, notes: &mut Vec<String>) -> Result<(), String> {
    {
        let g = c.field.grid();
        let k = make_kernel(g, c.epsilon, KernelProfile::TensorBump).map_err(err)?;
        let r = companion_residual_mollified(&c.system, &c.field, &k, &c.test).map_err(err)?;
        let region = density_region(g, &c.test, c.epsilon)?;
        let d = dissipation_density(&c.system, &c.field, &k, &region).map_err(err)?;
        let i = d.integrate(&c.test).map_err(err)?;
        let h = g.max_spacing();
        let tol = 10.0 * (h * h + r.quadrature_bound.max(i.quadrature_bound));
        let diff = (i.value - r.value).abs();
        check(ok, notes, diff <= tol, format!("{}: |int D phi - R_eps| {diff:.2e} <= {tol:.2e}", c.label));
    }
    Ok(())
}

fn main() {
    let mut cases = Vec::new();
    type Run<'a> = Box<dyn FnMut(&mut Vec<Case>) -> Outcome + 'a>;
    let criteria: Vec<(u32, &str, Duration, Run)> = vec![
        (1, "structural validation", Duration::from_secs(10), Box::new(|_| structural())),
        (2, "kernel and mollifier suite", Duration::from_secs(10), Box::new(|_| kernels())),
        (3, "commutator scaling", Duration::from_secs(120), Box::new(|_| commutator_scaling_check())),
        (4, "gradient scaling", Duration::from_secs(120), Box::new(|_| gradient_scaling_check())),
        (5, "smooth solution conserves", Duration::from_secs(180), Box::new(smooth_positive)),
        (6, "shock dissipation is sharp", Duration::from_secs(180), Box::new(shock_sharpness)),
        (7, "finite-volume consistency", Duration::from_secs(120), Box::new(fv_consistency)),
        (8, "Euler end to end", Duration::from_secs(180), Box::new(euler_end_to_end)),
        (9, "analysis self-consistency", Duration::from_secs(600), Box::new(|c| self_consistency(c))),
    ];
    let mut failed = 0;
    for (id, name, budget, mut run) in criteria {
        let start = Instant::now();
        let outcome = run(&mut cases);
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((p, d)) => (p, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= budget;
        let verdict = if pass && in_time { "PASS" } else { "FAIL" };
        if verdict == "FAIL" {
            failed += 1;
        }
        let timing = if in_time {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s over budget {}s", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!("criterion {id} [{name}]: {verdict} ({timing}) {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
