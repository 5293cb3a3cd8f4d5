//! Quantitative measurements on sampled fields: Besov and VMO moduli,
//! mollified gradients, flux commutators, companion residuals, dissipation
//! densities and log-log scaling fits.

mod companion;
mod moduli;
mod report;
mod scaling;

pub use companion::{
    commutator_field_and_states, companion_residual_mollified, companion_weak_residual, dissipation_density,
    flux_commutator, DissipationField, MollifiedResidual,
};
pub use moduli::{besov_seminorm, vmo_modulus, BesovEstimate};
pub use report::{fit_loglog_exponent, LogLogFit, ScalingParams, ScalingReport};
pub use scaling::{commutator_scaling, gradient_scaling, mollification_error_scaling, residual_scaling};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Grid, InteriorRegion, Index, MAX_AXES};
use crate::parallel::*;

/// A grid integral with a Riemann-sum error estimate.
///
/// `quadrature_bound` is `cell_volume * sum_a sum_x |f(x + e_a) - f(x)|`, the
/// sampled total variation of the integrand times the cell size, which bounds
/// the error of a lattice sum against the integral of a function whose
/// oscillation on each cell is controlled by its neighbouring samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub quadrature_bound: f64,
}

/// `|x|^p` with fast paths for the common integer exponents.
#[inline]
pub(crate) fn pow_abs(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else {
        a.powf(p)
    }
}

/// Round each `epsilon` to the nearest positive multiple of the largest grid
/// spacing; returns them deduplicated and sorted descending.
pub fn snap_epsilons(grid: &Grid, epsilons: &[f64]) -> Result<Vec<f64>> {
    let h = grid.max_spacing();
    let mut out = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {e}")));
        }
        let k = (e / h).round().max(1.0);
        out.push(k * h);
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out.dedup();
    Ok(out)
}

/// Dyadic sequence `hi, hi/2, hi/4, ...` down to `lo`, snapped to the grid.
/// Defaults: `lo = 4 * max spacing`, `hi = min extent / 8`.
pub fn dyadic_epsilons(grid: &Grid, lo: Option<f64>, hi: Option<f64>) -> Result<Vec<f64>> {
    let lo = lo.unwrap_or(4.0 * grid.max_spacing());
    let hi = hi.unwrap_or(grid.min_extent() / 8.0);
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!("empty epsilon window [{lo}, {hi}]")));
    }
    let mut raw = Vec::new();
    let mut e = hi;
    while e >= lo * (1.0 - 1e-9) {
        raw.push(e);
        e *= 0.5;
    }
    snap_epsilons(grid, &raw)
}

/// Row-major iteration helper over an index box.
#[derive(Debug, Clone)]
pub(crate) struct IndexBox {
    pub lo: Vec<usize>,
    pub shape: Vec<usize>,
}

impl IndexBox {
    pub fn of(region: &InteriorRegion) -> Self {
        let shape = region.lo().iter().zip(region.hi()).map(|(l, h)| h - l + 1).collect();
        Self {
            lo: region.lo().to_vec(),
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn index(&self, k: usize) -> Index {
        let mut idx = [0usize; MAX_AXES];
        let mut rest = k;
        for a in (0..self.shape.len()).rev() {
            idx[a] = self.lo[a] + rest % self.shape[a];
            rest /= self.shape[a];
        }
        idx
    }
}

/// Integrate values tabulated in box order over `region` (a lattice box)
/// with weight `cell_volume` per point, plus the variation bound.
pub(crate) fn integrate_box(grid: &Grid, region: &InteriorRegion, values: &[f64]) -> Integral {
    let b = IndexBox::of(region);
    debug_assert_eq!(values.len(), b.len());
    let cv = grid.cell_volume();
    let value = ordered_sum(values.len(), |k| values[k]) * cv;
    let dims = b.shape.len();
    let mut variation = 0.0;
    let mut stride = 1usize;
    let mut strides = vec![0usize; dims];
    for a in (0..dims).rev() {
        strides[a] = stride;
        stride *= b.shape[a];
    }
    for a in 0..dims {
        let len = b.shape[a];
        let wraps = grid.periodic()[a] && len == grid.points()[a];
        let s = strides[a];
        variation += ordered_sum(values.len(), |k| {
            let j = (k / s) % len;
            if j + 1 < len {
                (values[k + s] - values[k]).abs()
            } else if wraps && len > 1 {
                (values[k - j * s] - values[k]).abs()
            } else {
                0.0
            }
        });
    }
    Integral {
        value,
        quadrature_bound: variation * cv,
    }
}

/// Evaluate `f(flat, index)` over the region box, in box order.
pub(crate) fn tabulate<F>(grid: &Grid, region: &InteriorRegion, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &Index) -> Result<f64> + Sync + Send,
{
    let b = IndexBox::of(region);
    let results: Vec<Result<f64>> = (0..b.len())
        .into_par_iter()
        .map(|k| {
            let idx = b.index(k);
            f(grid.flat_index(&idx), &idx)
        })
        .collect();
    results.into_iter().collect()
}
