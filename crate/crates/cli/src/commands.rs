//! The four subcommands. Each returns a JSON report and whether every
//! configured threshold passed; writing files is left to the caller.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use clcons::analysis::{
    besov_seminorm, commutator_scaling, companion_weak_residual, dyadic_epsilons, gradient_scaling,
    mollification_error_scaling, residual_scaling, snap_epsilons, vmo_modulus, ScalingParams, ScalingReport,
};
use clcons::field::io::{load_clf, save_clf};
use clcons::field::{Field, Grid, InteriorRegion, TestFunction};
use clcons::generators::GeneratorSpec;
use clcons::systems::custom::load_custom_system;
use clcons::systems::{
    builtin_system, compatibility_residual, derivative_fd_check, euler_system, flux_gradient_holder_estimate,
    growth_check, psystem_elasticity, random_states, weak_residual, EulerParams, StoredEnergy,
    SystemSpec,
};

use crate::config::{Quantity, QuantityThreshold, RunConfig, SystemConfig};
use crate::error::CliError;

pub const VERSION: &str = concat!("clcons ", env!("CARGO_PKG_VERSION"));

/// Step of the finite-difference derivative check.
const FD_STEP: f64 = 1e-6;

pub struct Outcome {
    pub report: Value,
    pub passed: bool,
    /// Quantity series to be written as CSV next to the JSON report.
    pub series: Vec<ScalingReport>,
    /// A generated field to be written to the output path.
    pub field: Option<Field>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn build_system(cfg: &SystemConfig) -> Result<SystemSpec, CliError> {
    let given = |pairs: &[(&str, bool)]| -> Result<(), CliError> {
        match pairs.iter().find(|(_, set)| *set) {
            Some((key, _)) => Err(config_err(format!("`{key}` is not a parameter of system `{}`", cfg.name))),
            None => Ok(()),
        }
    };
    let euler_keys = [
        ("d", cfg.d.is_some()),
        ("kappa", cfg.kappa.is_some()),
        ("gamma0", cfg.gamma0.is_some()),
        ("rho_min", cfg.rho_min.is_some()),
        ("rho_max", cfg.rho_max.is_some()),
        ("v_max", cfg.v_max.is_some()),
    ];
    let file = [("file", cfg.file.is_some())];
    let energy = [("energy_gamma", cfg.energy_gamma.is_some())];
    let system = match cfg.name.as_str() {
        "burgers" => {
            given(&euler_keys)?;
            given(&file)?;
            given(&energy)?;
            builtin_system("burgers")?
        }
        "euler" => {
            given(&file)?;
            given(&energy)?;
            let base = EulerParams::default();
            euler_system(&EulerParams {
                d: cfg.d.unwrap_or(base.d),
                kappa: cfg.kappa.unwrap_or(base.kappa),
                gamma0: cfg.gamma0.unwrap_or(base.gamma0),
                rho_min: cfg.rho_min.unwrap_or(base.rho_min),
                rho_max: cfg.rho_max.unwrap_or(base.rho_max),
                v_max: cfg.v_max.unwrap_or(base.v_max),
            })?
        }
        "psystem" => {
            given(&euler_keys)?;
            given(&file)?;
            psystem_elasticity(StoredEnergy::Power {
                gamma: cfg.energy_gamma.unwrap_or(0.5),
            })?
        }
        "custom" => {
            given(&euler_keys)?;
            given(&energy)?;
            let path = cfg
                .file
                .as_ref()
                .ok_or_else(|| config_err("system `custom` needs a definition file"))?;
            load_custom_system(path).map_err(|e| config_err(format!("custom system {}: {e}", path.display())))?
        }
        other => return Err(config_err(format!("unknown system `{other}`"))),
    };
    Ok(system)
}

fn require_system(cfg: &RunConfig) -> Result<SystemSpec, CliError> {
    build_system(cfg.system.as_ref().ok_or_else(|| config_err("no system configured"))?)
}

fn optional_system(cfg: &RunConfig) -> Result<Option<SystemSpec>, CliError> {
    cfg.system.as_ref().map(build_system).transpose()
}

fn grid_of(cfg: &RunConfig) -> Result<Grid, CliError> {
    let spec = cfg.grid.as_ref().ok_or_else(|| config_err("no grid configured"))?;
    Ok(Grid::try_from(spec.clone())?)
}

/// Where `generate` records the resolved config of a field file.
pub fn sidecar_path(field_path: &Path) -> PathBuf {
    let mut s = field_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Loaded {
    field: Field,
    origin: Value,
    /// `Some(true)` for generators that do not produce solutions.
    synthetic: Option<bool>,
    diagnostics: Option<Value>,
}

fn load_field(cfg: &RunConfig, system: Option<&SystemSpec>) -> Result<Loaded, CliError> {
    match (&cfg.input, &cfg.generator) {
        (Some(_), Some(_)) => Err(config_err("give either an input field or a generator, not both")),
        (None, None) => Err(config_err("no input field or generator configured")),
        (Some(path), None) => {
            let field = load_clf(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            // a sidecar written by `generate` tells us what the field is
            let generator = std::fs::read_to_string(sidecar_path(path))
                .ok()
                .and_then(|t| serde_json::from_str::<Value>(&t).ok())
                .and_then(|v| v.pointer("/config/generator").cloned())
                .and_then(|g| serde_json::from_value::<GeneratorSpec>(g).ok());
            Ok(Loaded {
                field,
                origin: json!({ "input": path, "generator": generator }),
                synthetic: generator.as_ref().map(GeneratorSpec::is_synthetic),
                diagnostics: None,
            })
        }
        (None, Some(g)) => {
            let grid = grid_of(cfg)?;
            let out = g.generate(&grid, system)?;
            Ok(Loaded {
                field: out.field,
                origin: json!({ "generator": g }),
                synthetic: Some(g.is_synthetic()),
                diagnostics: out.diagnostics.map(|d| serde_json::to_value(d).unwrap_or(Value::Null)),
            })
        }
    }
}

/// The system to analyse a field with. A field without a time axis on a
/// torus is matched against the spatial part of the system.
fn match_system(system: &SystemSpec, field: &Field, notes: &mut Vec<String>) -> Result<SystemSpec, CliError> {
    if field.components() != system.n() {
        return Err(config_err(format!(
            "field has {} components but system `{}` has n = {}",
            field.components(),
            system.name(),
            system.n()
        )));
    }
    let grid = field.grid();
    if grid.dims() == system.directions() {
        return Ok(system.clone());
    }
    if grid.dims() + 1 == system.directions() && grid.periodic().iter().all(|p| *p) {
        notes.push(format!(
            "field has no time axis: analysed against the spatial fluxes of `{}`",
            system.name()
        ));
        return Ok(system.spatial_part()?);
    }
    Err(config_err(format!(
        "field has {} axes but system `{}` has {} directions",
        grid.dims(),
        system.name(),
        system.directions()
    )))
}

/// The configured test function, or the standard bump: centered in the
/// domain, radius a third of the extent on bounded axes and an eighth on
/// periodic ones.
fn test_function(cfg: &RunConfig, grid: &Grid) -> Result<TestFunction, CliError> {
    if let Some(t) = &cfg.test_function {
        return Ok(TestFunction::new(grid, &t.center, &t.radius)?);
    }
    let center: Vec<f64> = grid.extent().iter().map(|l| l / 2.0).collect();
    let radius: Vec<f64> = grid
        .extent()
        .iter()
        .zip(grid.periodic())
        .map(|(l, p)| if *p { l / 8.0 } else { l / 3.0 })
        .collect();
    Ok(TestFunction::new(grid, &center, &radius)?)
}

/// `int phi(t, c) dt` along axis 0 through the center `c` of the other axes,
/// by composite Simpson.
fn phi_time_integral(test: &TestFunction) -> f64 {
    let (c, r) = (test.center(), test.radius());
    let (a, b) = (c[0] - r[0], c[0] + r[0]);
    let m = 4000;
    let h = (b - a) / m as f64;
    let mut x = c.to_vec();
    let mut sum = 0.0;
    for k in 0..=m {
        x[0] = a + k as f64 * h;
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * test.value(&x);
    }
    sum * h / 3.0
}

fn vmo_report(field: &Field, p: f64, eps: &[f64], region: &InteriorRegion) -> Result<ScalingReport, CliError> {
    let pairs = eps
        .iter()
        .map(|&e| Ok((e, vmo_modulus(field, p, e, region)?)))
        .collect::<Result<Vec<_>, clcons::Error>>()?;
    Ok(ScalingReport::build(
        "vmo_modulus",
        pairs,
        None,
        field.sup_norm().max(1.0).powf(p),
        region.describe(),
        ScalingParams {
            p: Some(p),
            ..Default::default()
        },
    )?)
}

/// Failed threshold checks for one series.
fn check_series(report: &ScalingReport, th: &QuantityThreshold) -> Vec<String> {
    let name = &report.quantity_name;
    let mut fails = Vec::new();
    let max = report.values().into_iter().fold(0.0f64, f64::max);
    if let Some(lim) = th.value_max {
        if max > lim {
            fails.push(format!("{name}: largest value {max:.6e} exceeds {lim:.6e}"));
        }
    }
    if let Some(lim) = th.value_min {
        if max < lim {
            fails.push(format!("{name}: largest value {max:.6e} is below {lim:.6e}"));
        }
    }
    if report.is_degenerate() {
        return fails;
    }
    let slope = |which: &str, v: Option<f64>, lim: f64, above: bool| match v {
        None => Some(format!("{name}: no {which} could be fitted")),
        Some(s) if above && s < lim => Some(format!("{name}: {which} {s:.4} is below {lim}")),
        Some(s) if !above && s > lim => Some(format!("{name}: {which} {s:.4} exceeds {lim}")),
        _ => None,
    };
    if let Some(lim) = th.slope_min {
        fails.extend(slope("slope", report.fitted_slope, lim, true));
    }
    if let Some(lim) = th.slope_max {
        fails.extend(slope("slope", report.fitted_slope, lim, false));
    }
    if let Some(lim) = th.ratio_slope_min {
        fails.extend(slope("ratio slope", report.ratio_slope, lim, true));
    }
    fails
}

fn check_value(name: &str, value: f64, th: &QuantityThreshold) -> Vec<String> {
    let mut fails = Vec::new();
    if let Some(lim) = th.value_max {
        if value > lim {
            fails.push(format!("{name}: value {value:.6e} exceeds {lim:.6e}"));
        }
    }
    if let Some(lim) = th.value_min {
        if value < lim {
            fails.push(format!("{name}: value {value:.6e} is below {lim:.6e}"));
        }
    }
    if th.slope_min.is_some() || th.slope_max.is_some() || th.ratio_slope_min.is_some() {
        fails.push(format!("{name}: slope thresholds do not apply to a single value"));
    }
    fails
}

fn envelope(cfg: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(cfg.command));
    m.insert("config".into(), serde_json::to_value(cfg).unwrap_or(Value::Null));
    m
}

fn finish(mut m: Map<String, Value>, failures: Vec<String>, notes: Vec<String>) -> (Value, bool) {
    let passed = failures.is_empty();
    m.insert("status".into(), json!(if passed { "pass" } else { "fail" }));
    m.insert("failures".into(), json!(failures));
    m.insert("notes".into(), json!(notes));
    (Value::Object(m), passed)
}

pub fn check_system(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let system = require_system(cfg)?;
    let samples = cfg.samples.unwrap_or(1000);
    if samples < 2 {
        return Err(config_err("check-system needs at least 2 samples"));
    }
    let thresholds = cfg.thresholds.clone().unwrap_or_default();
    let states = random_states(&system, samples, cfg.seed.unwrap_or(0));
    let compat = compatibility_residual(&system, &states)?;
    let growth = growth_check(&system, &states, system.gamma())?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = states
        .chunks_exact(2)
        .filter(|w| w[0] != w[1])
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect();
    let holder_gamma = cfg.gamma.or(system.box_gamma()).unwrap_or(system.gamma());
    let holder = flux_gradient_holder_estimate(&system, &pairs, holder_gamma)?;
    let fd = derivative_fd_check(&system, &states, FD_STEP)?;

    let mut failures = Vec::new();
    if !(compat.max_residual <= thresholds.compatibility_max) {
        let at = compat
            .worst
            .as_ref()
            .map(|w| format!(" at j = {}, alpha = {}, state {:?}", w.j, w.alpha, w.state))
            .unwrap_or_default();
        failures.push(format!(
            "compatibility residual {:.3e} exceeds {:.1e}{at}",
            compat.max_residual, thresholds.compatibility_max
        ));
    }
    if !growth.pass {
        failures.push(format!(
            "companion growth ratio {:.4} exceeds the growth constant {:.4}",
            growth.max_ratio, growth.constant
        ));
    }
    let holder_ok = holder.constant.is_finite() && thresholds.holder_max.is_none_or(|m| holder.constant <= m);
    if !holder_ok {
        failures.push(format!(
            "flux-gradient Hölder quotient {:.4e} (gamma = {}) out of bounds",
            holder.constant, holder.gamma
        ));
    }
    if !(fd.max_error() <= thresholds.fd_max) {
        failures.push(format!(
            "finite-difference derivative error {:.3e} exceeds {:.1e}",
            fd.max_error(),
            thresholds.fd_max
        ));
    }
    let mut m = envelope(cfg);
    m.insert("system".into(), serde_json::to_value(system.info())?);
    m.insert("compatibility".into(), serde_json::to_value(&compat)?);
    m.insert("growth".into(), serde_json::to_value(&growth)?);
    m.insert("holder".into(), serde_json::to_value(&holder)?);
    m.insert("derivatives".into(), serde_json::to_value(&fd)?);
    let (report, passed) = finish(m, failures, Vec::new());
    Ok(Outcome {
        report,
        passed,
        series: Vec::new(),
        field: None,
    })
}

pub fn generate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.generator.as_ref().ok_or_else(|| config_err("no generator configured"))?;
    if cfg.output.is_none() {
        return Err(config_err("generate needs an output path"));
    }
    let grid = grid_of(cfg)?;
    let system = optional_system(cfg)?;
    if spec.needs_system() && system.is_none() {
        return Err(config_err(format!("generator `{}` needs a system", spec.kind())));
    }
    let out = spec.generate(&grid, system.as_ref())?;
    let mut notes = Vec::new();
    if spec.is_synthetic() {
        notes.push("scaling-only: synthetic field, not a solution of any system".to_string());
    }
    let mut m = envelope(cfg);
    m.insert("grid".into(), serde_json::to_value(grid.spec())?);
    m.insert("generator".into(), json!(spec.kind()));
    m.insert("components".into(), json!(out.field.components()));
    if let Some(s) = &system {
        m.insert("system".into(), serde_json::to_value(s.info())?);
    }
    if let Some(d) = &out.diagnostics {
        m.insert("solver".into(), serde_json::to_value(d)?);
    }
    let (report, passed) = finish(m, Vec::new(), notes);
    Ok(Outcome {
        report,
        passed,
        series: Vec::new(),
        field: Some(out.field),
    })
}

/// `analyze` (one epsilon) and `sweep` (a sequence of them).
pub fn measure(cfg: &RunConfig, single: bool) -> Result<Outcome, CliError> {
    let base_system = optional_system(cfg)?;
    let loaded = load_field(cfg, base_system.as_ref())?;
    let field = &loaded.field;
    let grid = field.grid().clone();
    let mut notes = Vec::new();
    let system = base_system
        .as_ref()
        .map(|s| match_system(s, field, &mut notes))
        .transpose()?;

    let eps = if single {
        let e = cfg.epsilon.ok_or_else(|| config_err("analyze needs an epsilon"))?;
        snap_epsilons(&grid, &[e])?
    } else if let Some(list) = &cfg.epsilons {
        snap_epsilons(&grid, list)?
    } else {
        let r = cfg.epsilon_range.as_ref();
        dyadic_epsilons(&grid, r.and_then(|r| r.lo), r.and_then(|r| r.hi))?
    };
    let max_eps = *eps.first().ok_or_else(|| config_err("no epsilon values"))?;
    let margin = cfg.margin.unwrap_or(max_eps);
    let bounded = grid.periodic().iter().any(|p| !p);
    if bounded && margin < max_eps * (1.0 - 1e-12) {
        return Err(config_err(format!(
            "region too small for max epsilon: margin {margin} < {max_eps}"
        )));
    }
    let region = InteriorRegion::with_margin(&grid, margin)?;

    let quantities: Vec<Quantity> = match &cfg.quantities {
        Some(q) => q.clone(),
        None => Quantity::ALL
            .iter()
            .copied()
            .filter(|q| system.is_some() || !q.needs_system())
            .collect(),
    };
    if let Some(q) = quantities.iter().find(|q| q.needs_system() && system.is_none()) {
        return Err(config_err(format!("{} needs a system", q.name())));
    }
    let p = cfg.p.unwrap_or(2.0);
    let q_exp = cfg.q.unwrap_or(1.5);
    let profile = cfg.kernel_profile.unwrap_or_default();
    let test = if quantities.iter().any(|q| q.needs_test_function()) {
        Some(test_function(cfg, &grid)?)
    } else {
        None
    };
    let synthetic = loaded.synthetic;
    if synthetic == Some(true) && quantities.iter().any(|q| q.needs_test_function()) {
        notes.push("scaling-only: synthetic field, not a solution; residuals test scaling, not conservation".into());
    }
    let thresholds = cfg.thresholds.clone().unwrap_or_default();

    let mut results = Map::new();
    let mut failures = Vec::new();
    let mut series = Vec::new();
    for &quantity in &quantities {
        let th = thresholds.quantities.get(&quantity).cloned().unwrap_or_default();
        let report = match quantity {
            Quantity::MollificationError => mollification_error_scaling(field, p, profile, &eps, &region)?,
            Quantity::GradientNorm => gradient_scaling(field, p, profile, &eps, &region)?,
            Quantity::VmoModulus => vmo_report(field, p, &eps, &region)?,
            Quantity::CommutatorNorm => {
                let sys = system.as_ref().expect("checked above");
                commutator_scaling(sys, field, q_exp, profile, &eps, &region, cfg.gamma)?
            }
            Quantity::CompanionResidual => {
                let sys = system.as_ref().expect("checked above");
                let mut r = residual_scaling(sys, field, test.as_ref().expect("built above"), profile, &eps)?;
                if synthetic == Some(true) {
                    r.add_note("scaling-only");
                }
                r
            }
            Quantity::WeakResidual => {
                let sys = system.as_ref().expect("checked above");
                let phi = test.as_ref().expect("built above");
                let w = companion_weak_residual(sys, field, phi)?;
                let conservation = weak_residual(sys, field, phi)?;
                let mut entry = json!({
                    "value": w.value,
                    "quadrature_bound": w.quadrature_bound,
                    "conservation_residuals": conservation,
                });
                if !grid.periodic()[0] && grid.dims() > 1 {
                    entry["phi_time_integral"] = json!(phi_time_integral(phi));
                }
                let fails = check_value(quantity.name(), w.value, &th);
                entry["pass"] = json!(fails.is_empty());
                failures.extend(fails);
                results.insert(quantity.name().into(), entry);
                continue;
            }
        };
        let fails = if single {
            check_value(quantity.name(), report.values()[0], &th)
        } else {
            check_series(&report, &th)
        };
        let entry = json!({ "report": report, "pass": fails.is_empty() });
        failures.extend(fails);
        results.insert(quantity.name().into(), entry);
        series.push(report);
    }
    if let Some(s) = cfg.s {
        let b = besov_seminorm(field, p, s, &region, max_eps)?;
        results.insert("besov_seminorm".into(), serde_json::to_value(b)?);
    }

    let mut m = envelope(cfg);
    m.insert("grid".into(), serde_json::to_value(grid.spec())?);
    m.insert("epsilons".into(), json!(eps));
    m.insert("region".into(), json!(region.describe()));
    m.insert(
        "field".into(),
        json!({
            "origin": loaded.origin,
            "components": field.components(),
            "label": match synthetic {
                Some(true) => "scaling-only",
                Some(false) => "solution",
                None => "unknown",
            },
            "solver": loaded.diagnostics,
        }),
    );
    if let Some(s) = &system {
        m.insert("system".into(), serde_json::to_value(s.info())?);
    }
    if let Some(t) = &test {
        m.insert(
            "test_function".into(),
            json!({ "center": t.center(), "radius": t.radius() }),
        );
    }
    m.insert("results".into(), Value::Object(results));
    let (report, passed) = finish(m, failures, notes);
    if single {
        series.clear();
    }
    Ok(Outcome {
        report,
        passed,
        series,
        field: None,
    })
}

/// Write a generated field.
pub fn save_field(field: &Field, path: &Path) -> Result<(), CliError> {
    Ok(save_clf(field, path)?)
}
