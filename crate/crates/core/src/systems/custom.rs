//! Systems defined in JSON as sums of power terms.
//!
//! Every flux, companion flux and multiplier is a list of terms
//! `coef * prod_j f_j(u_j)` where `f_j(x) = x^p` or, with `abs`, `|x|^p`.
//! Gradients are differentiated term by term, so a definition is exact up to
//! floating point. Example (Burgers with its entropy pair):
//!
//! ```json
//! {
//!   "name": "burgers-custom", "n": 1, "d": 1, "gamma": 1.0,
//!   "sample_box": [[-2.0, 2.0]],
//!   "flux": [[ [{"coef": 1.0, "powers": [1]}], [{"coef": 0.5, "powers": [2]}] ]],
//!   "companion": [ [{"coef": 0.5, "powers": [2]}], [{"coef": 0.3333333333333333, "powers": [3]}] ],
//!   "multipliers": [ [{"coef": 1.0, "powers": [1]}] ]
//! }
//! ```
//!
//! `flux[i][a]` lists the terms of `G_ia`; `companion[a]` those of `Q_a`;
//! `multipliers[i]` those of `B_i`. Optional `lower`/`upper` give strict
//! domain bounds per component (`null` for none).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FluxModel, StateDomain, SystemSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    /// Exponent per state component; missing trailing entries are 0.
    #[serde(default)]
    pub powers: Vec<f64>,
    /// Use `|u_j|^p` instead of `u_j^p` for the flagged components.
    #[serde(default)]
    pub abs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystemDef {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub sample_box: Vec<(f64, f64)>,
    #[serde(default)]
    pub lower: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub upper: Option<Vec<Option<f64>>>,
    pub flux: Vec<Vec<Vec<Term>>>,
    pub companion: Vec<Vec<Term>>,
    pub multipliers: Vec<Vec<Term>>,
}

impl Term {
    fn power(&self, j: usize) -> f64 {
        self.powers.get(j).copied().unwrap_or(0.0)
    }

    fn factor(&self, j: usize, x: f64) -> f64 {
        let p = self.power(j);
        if p == 0.0 {
            return 1.0;
        }
        if self.abs.get(j).copied().unwrap_or(false) {
            x.abs().powf(p)
        } else if p.fract() == 0.0 {
            x.powi(p as i32)
        } else {
            x.powf(p)
        }
    }

    fn factor_derivative(&self, j: usize, x: f64) -> f64 {
        let p = self.power(j);
        if p == 0.0 {
            return 0.0;
        }
        if p == 1.0 && !self.abs.get(j).copied().unwrap_or(false) {
            return 1.0;
        }
        if self.abs.get(j).copied().unwrap_or(false) {
            if x == 0.0 {
                return 0.0;
            }
            p * x.abs().powf(p - 1.0) * x.signum()
        } else if p.fract() == 0.0 {
            p * x.powi(p as i32 - 1)
        } else {
            p * x.powf(p - 1.0)
        }
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.coef * (0..u.len()).map(|j| self.factor(j, u[j])).product::<f64>()
    }

    fn grad(&self, u: &[f64], j: usize) -> f64 {
        let mut prod = self.coef * self.factor_derivative(j, u[j]);
        for k in (0..u.len()).filter(|&k| k != j) {
            prod *= self.factor(k, u[k]);
        }
        prod
    }
}

fn eval_sum(terms: &[Term], u: &[f64]) -> f64 {
    terms.iter().map(|t| t.eval(u)).sum()
}

fn grad_sum(terms: &[Term], u: &[f64], j: usize) -> f64 {
    terms.iter().map(|t| t.grad(u, j)).sum()
}

#[derive(Debug, Clone)]
struct PolySystem {
    def: CustomSystemDef,
}

impl FluxModel for PolySystem {
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let dirs = self.def.d + 1;
        for (i, row) in self.def.flux.iter().enumerate() {
            for (a, terms) in row.iter().enumerate() {
                out[i * dirs + a] = eval_sum(terms, u);
            }
        }
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        let (n, dirs) = (self.def.n, self.def.d + 1);
        for (i, row) in self.def.flux.iter().enumerate() {
            for (a, terms) in row.iter().enumerate() {
                for j in 0..n {
                    out[(i * dirs + a) * n + j] = grad_sum(terms, u, j);
                }
            }
        }
    }

    fn companion(&self, u: &[f64], out: &mut [f64]) {
        for (a, terms) in self.def.companion.iter().enumerate() {
            out[a] = eval_sum(terms, u);
        }
    }

    fn companion_gradient(&self, u: &[f64], out: &mut [f64]) {
        let n = self.def.n;
        for (a, terms) in self.def.companion.iter().enumerate() {
            for j in 0..n {
                out[a * n + j] = grad_sum(terms, u, j);
            }
        }
    }

    fn multipliers(&self, u: &[f64], out: &mut [f64]) {
        for (i, terms) in self.def.multipliers.iter().enumerate() {
            out[i] = eval_sum(terms, u);
        }
    }

    fn multiplier_gradient(&self, u: &[f64], out: &mut [f64]) {
        let n = self.def.n;
        for (i, terms) in self.def.multipliers.iter().enumerate() {
            for j in 0..n {
                out[i * n + j] = grad_sum(terms, u, j);
            }
        }
    }
}

pub fn custom_system(def: &CustomSystemDef) -> Result<SystemSpec> {
    let (n, dirs) = (def.n, def.d + 1);
    let shape_err = |what: &str| Err(Error::DimensionMismatch(format!("custom system `{}`: {what}", def.name)));
    if def.flux.len() != n || def.flux.iter().any(|row| row.len() != dirs) {
        return shape_err("flux must be n lists of d+1 term lists");
    }
    if def.companion.len() != dirs {
        return shape_err("companion must have d+1 term lists");
    }
    if def.multipliers.len() != n {
        return shape_err("multipliers must have n term lists");
    }
    let all_terms = def
        .flux
        .iter()
        .flatten()
        .chain(&def.companion)
        .chain(&def.multipliers)
        .flatten();
    for t in all_terms {
        if t.powers.len() > n || t.abs.len() > n {
            return shape_err("term has more powers than state components");
        }
        if !t.coef.is_finite() || t.powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return shape_err("coefficients must be finite and powers non-negative");
        }
    }
    let mut domain = StateDomain::unbounded(n);
    if let Some(lower) = &def.lower {
        if lower.len() != n {
            return shape_err("lower must have n entries");
        }
        domain.lower = lower.clone();
    }
    if let Some(upper) = &def.upper {
        if upper.len() != n {
            return shape_err("upper must have n entries");
        }
        domain.upper = upper.clone();
    }
    SystemSpec::new(
        def.name.clone(),
        n,
        def.d,
        domain,
        def.sample_box.clone(),
        def.gamma,
        Arc::new(PolySystem { def: def.clone() }),
    )
}

pub fn load_custom_system(path: impl AsRef<std::path::Path>) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path)?;
    let def: CustomSystemDef = serde_json::from_str(&text)?;
    custom_system(&def)
}

#[cfg(test)]
pub(crate) const BURGERS_JSON: &str = r#"{
  "name": "burgers-custom", "n": 1, "d": 1, "gamma": 1.0,
  "sample_box": [[-2.0, 2.0]],
  "flux": [[ [{"coef": 1.0, "powers": [1]}], [{"coef": 0.5, "powers": [2]}] ]],
  "companion": [ [{"coef": 0.5, "powers": [2]}], [{"coef": 0.3333333333333333, "powers": [3]}] ],
  "multipliers": [ [{"coef": 1.0, "powers": [1]}] ]
}"#;

/// Pressureless-plus-linear-pressure gas in `(rho, v)`, enough to exercise the
/// generic Newton inversion.
#[cfg(test)]
pub(crate) const EULER_1D_JSON: &str = r#"{
  "name": "linear-pressure-gas", "n": 2, "d": 1, "gamma": 1.0,
  "sample_box": [[0.5, 2.0], [-1.0, 1.0]],
  "lower": [0.0, null],
  "flux": [
    [ [{"coef": 1.0, "powers": [1, 0]}], [{"coef": 1.0, "powers": [1, 1]}] ],
    [ [{"coef": 1.0, "powers": [1, 1]}], [{"coef": 1.0, "powers": [1, 2]}, {"coef": 1.0, "powers": [1, 0]}] ]
  ],
  "companion": [ [], [] ],
  "multipliers": [ [], [] ]
}"#;
