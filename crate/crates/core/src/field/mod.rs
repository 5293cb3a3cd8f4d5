//! Sampled fields on uniform space-time grids.

mod bump;
mod grid;
pub mod io;
mod region;

pub use bump::{bump_profile, bump_profile_derivative, TestFunction};
pub use grid::{make_grid, Grid, GridSpec, Index, MAX_AXES};
pub use region::InteriorRegion;

use crate::error::{Error, Result};
use crate::parallel::*;

/// A map from grid points to `R^n`, stored point-major with the component
/// index fastest.
///
/// Fields produced by shifts or convolutions on grids with bounded axes carry a
/// validity mask: samples whose stencil left the grid hold `0.0`, are marked
/// invalid and contribute nothing to norms or integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
    valid: Option<Vec<bool>>,
}

/// How the pointwise magnitude `|u(x)|` is formed in norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    /// Euclidean norm over all components.
    #[default]
    Euclidean,
    /// Absolute value of a single component.
    Component(usize),
}

impl Field {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidParameter("component count must be positive".into()));
        }
        if values.len() != grid.len() * components {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                grid.len() * components,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                point: pos / components,
                component: pos % components,
            });
        }
        Ok(Self {
            grid,
            components,
            values,
            valid: None,
        })
    }

    pub(crate) fn from_raw(grid: Grid, components: usize, values: Vec<f64>, valid: Option<Vec<bool>>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * components);
        let valid = valid.filter(|m| m.iter().any(|v| !v));
        Self {
            grid,
            components,
            values,
            valid,
        }
    }

    pub fn constant(grid: Grid, state: &[f64]) -> Result<Self> {
        let values = state.iter().copied().cycle().take(grid.len() * state.len()).collect();
        Self::new(grid, state.len(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn state(&self, point: usize) -> &[f64] {
        &self.values[point * self.components..(point + 1) * self.components]
    }

    #[inline]
    pub fn value(&self, point: usize, component: usize) -> f64 {
        self.values[point * self.components + component]
    }

    #[inline]
    pub fn is_valid(&self, point: usize) -> bool {
        self.valid.as_ref().is_none_or(|m| m[point])
    }

    pub fn valid_mask(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn has_invalid(&self) -> bool {
        self.valid.is_some()
    }

    /// Pointwise map of states. Invalid points stay invalid and hold zeros.
    pub fn map_states<F>(&self, out_components: usize, f: F) -> Field
    where
        F: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let n = self.components;
        let mut out = vec![0.0; self.grid.len() * out_components];
        out.par_chunks_mut(out_components)
            .enumerate()
            .for_each(|(p, dst)| {
                if self.is_valid(p) {
                    f(&self.values[p * n..(p + 1) * n], dst);
                }
            });
        Field::from_raw(self.grid.clone(), out_components, out, self.valid.clone())
    }

    /// `a * self + b * other`, pointwise. Validity is the intersection.
    pub fn linear_combination(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let valid = merge_masks(self.valid.as_deref(), other.valid.as_deref());
        Ok(Field::from_raw(self.grid.clone(), self.components, values, valid))
    }

    pub fn scaled(&self, c: f64) -> Field {
        let values = self.values.iter().map(|x| c * x).collect();
        Field::from_raw(self.grid.clone(), self.components, values, self.valid.clone())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Single-component view of component `c`.
    pub fn component(&self, c: usize) -> Field {
        let values = (0..self.grid.len()).map(|p| self.value(p, c)).collect();
        Field::from_raw(self.grid.clone(), 1, values, self.valid.clone())
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::DimensionMismatch(
                "fields live on different grids or have different component counts".into(),
            ));
        }
        Ok(())
    }

    /// Largest pointwise Euclidean magnitude over valid points.
    pub fn sup_norm(&self) -> f64 {
        ordered_max(self.grid.len(), |p| {
            if self.is_valid(p) {
                self.state(p).iter().map(|v| v * v).sum::<f64>().sqrt()
            } else {
                0.0
            }
        })
    }
}

pub(crate) fn merge_masks(a: Option<&[bool]>, b: Option<&[bool]>) -> Option<Vec<bool>> {
    match (a, b) {
        (None, None) => None,
        (Some(m), None) | (None, Some(m)) => Some(m.to_vec()),
        (Some(m), Some(n)) => Some(m.iter().zip(n).map(|(x, y)| *x && *y).collect()),
    }
}

/// Trapezoid quadrature weight of a lattice point: the cell volume, halved
/// for each bounded axis on which the point is an endpoint.
#[inline]
pub fn quadrature_weight(grid: &Grid, idx: &Index) -> f64 {
    let mut w = grid.cell_volume();
    for a in 0..grid.dims() {
        if !grid.periodic()[a] && (idx[a] == 0 || idx[a] + 1 == grid.points()[a]) {
            w *= 0.5;
        }
    }
    w
}

/// Samples `evaluator` at every lattice point. The evaluator receives the
/// physical coordinates (one per axis) and writes `components` values.
pub fn sample_function<F>(grid: &Grid, components: usize, evaluator: F) -> Result<Field>
where
    F: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    let dims = grid.dims();
    let mut values = vec![0.0; grid.len() * components];
    values
        .par_chunks_mut(components)
        .enumerate()
        .for_each(|(p, dst)| {
            let x = grid.point(p);
            evaluator(&x[..dims], dst);
        });
    Field::new(grid.clone(), components, values)
}

/// Translate a field by a lattice vector: `out[x] = in[x - offset]`.
///
/// Periodic axes wrap. On bounded axes samples whose source lies outside the
/// grid are marked invalid.
pub fn shift_field(field: &Field, offset: &[i64]) -> Result<Field> {
    let grid = field.grid();
    if offset.len() != grid.dims() {
        return Err(Error::DimensionMismatch(format!(
            "offset has {} entries for a {}-axis grid",
            offset.len(),
            grid.dims()
        )));
    }
    let n = field.components();
    let mut neg = [0i64; MAX_AXES];
    for (a, o) in offset.iter().enumerate() {
        neg[a] = -o;
    }
    let mut values = vec![0.0; grid.len() * n];
    let mut valid = vec![true; grid.len()];
    values
        .par_chunks_mut(n)
        .zip(valid.par_iter_mut())
        .enumerate()
        .for_each(|(p, (dst, ok))| {
            let idx = grid.multi_index(p);
            match grid.offset_index(&idx, &neg) {
                Some(src) if field.is_valid(src) => dst.copy_from_slice(field.state(src)),
                _ => *ok = false,
            }
        });
    Ok(Field::from_raw(grid.clone(), n, values, Some(valid)))
}

/// Discrete `L^p` norm over a region using `NormKind::Euclidean`.
pub fn field_norm_p(field: &Field, p: f64, region: &InteriorRegion) -> Result<f64> {
    field_norm_p_with(field, p, region, NormKind::Euclidean)
}

/// `( sum_{x in region} |u(x)|^p * cell_volume )^(1/p)`; invalid samples
/// contribute nothing (no volume renormalization).
pub fn field_norm_p_with(field: &Field, p: f64, region: &InteriorRegion, kind: NormKind) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("norm exponent must be >= 1, got {p}")));
    }
    region.check_grid(field.grid())?;
    if let NormKind::Component(c) = kind {
        if c >= field.components() {
            return Err(Error::InvalidParameter(format!("component {c} out of range")));
        }
    }
    let points = region.flat_indices();
    if points.is_empty() {
        return Err(Error::EmptyRegion("norm over an empty region".into()));
    }
    let sum = ordered_sum(points.len(), |k| {
        let pt = points[k];
        if !field.is_valid(pt) {
            return 0.0;
        }
        let mag = match kind {
            NormKind::Euclidean => field.state(pt).iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::Component(c) => field.value(pt, c).abs(),
        };
        mag.powf(p)
    });
    Ok((sum * field.grid().cell_volume()).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Grid {
        make_grid(&[n], &[1.0], &[true]).unwrap()
    }

    #[test]
    fn constant_sampling() {
        let g = make_grid(&[8, 8], &[1.0, 1.0], &[false, true]).unwrap();
        let f = sample_function(&g, 2, |_, out| out.copy_from_slice(&[3.0, -1.0])).unwrap();
        assert!(f.values().chunks(2).all(|s| s == [3.0, -1.0]));
    }

    #[test]
    fn sine_sample_value() {
        let f = sample_function(&torus(256), 1, |x, out| out[0] = (2.0 * PI * x[0]).sin()).unwrap();
        assert!((f.value(64, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nan_evaluator_rejected() {
        let r = sample_function(&torus(16), 1, |x, out| out[0] = if x[0] > 0.5 { f64::NAN } else { 0.0 });
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn shift_identities() {
        let g = torus(32);
        let f = sample_function(&g, 1, |x, out| out[0] = (2.0 * PI * x[0]).cos() + x[0]).unwrap();
        let zero = shift_field(&f, &[0]).unwrap();
        assert_eq!(zero.values(), f.values());
        assert!(!zero.has_invalid());
        let full = shift_field(&f, &[32]).unwrap();
        assert_eq!(full.values(), f.values());
        let c = Field::constant(g, &[1.5]).unwrap();
        assert_eq!(shift_field(&c, &[1]).unwrap().values(), c.values());
    }

    #[test]
    fn shift_on_bounded_axis_marks_invalid() {
        let g = make_grid(&[6, 8], &[1.0, 1.0], &[false, true]).unwrap();
        let f = Field::constant(g.clone(), &[1.0]).unwrap();
        let s = shift_field(&f, &[2, 0]).unwrap();
        let region = InteriorRegion::full(&g);
        // two of six time levels lost
        let n = field_norm_p(&s, 1.0, &region).unwrap();
        let full = field_norm_p(&f, 1.0, &region).unwrap();
        assert!((n / full - 4.0 / 6.0).abs() < 1e-14);
        assert!(!s.is_valid(0) && s.is_valid(g.flat_index(&[2, 0, 0, 0])));
    }

    #[test]
    fn norm_examples() {
        let g = torus(64);
        let region = InteriorRegion::full(&g);
        let two = Field::constant(g.clone(), &[2.0]).unwrap();
        assert!((field_norm_p(&two, 3.0, &region).unwrap() - 2.0).abs() < 1e-14);
        let zero = Field::constant(g, &[0.0]).unwrap();
        assert_eq!(field_norm_p(&zero, 2.0, &region).unwrap(), 0.0);
    }

    #[test]
    fn sine_l2_norm_matches_quadrature_oracle() {
        // independent oracle: composite Simpson on a fine grid of sin^2
        let m = 20_000;
        let h = 1.0 / m as f64;
        let simpson: f64 = (0..=m)
            .map(|k| {
                let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * (2.0 * PI * k as f64 * h).sin().powi(2)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - 0.5).abs() < 1e-12);
        let g = torus(1024);
        let f = sample_function(&g, 1, |x, out| out[0] = (2.0 * PI * x[0]).sin()).unwrap();
        let n = field_norm_p(&f, 2.0, &InteriorRegion::full(&g)).unwrap();
        assert!((n - simpson.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn component_norm_variant() {
        let g = torus(16);
        let f = Field::constant(g.clone(), &[3.0, 4.0]).unwrap();
        let r = InteriorRegion::full(&g);
        assert!((field_norm_p(&f, 2.0, &r).unwrap() - 5.0).abs() < 1e-14);
        let c1 = field_norm_p_with(&f, 2.0, &r, NormKind::Component(1)).unwrap();
        assert!((c1 - 4.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn shift_roundtrip_on_torus(a in -40i64..40, b in -40i64..40, seed in 0u64..1000) {
            let g = make_grid(&[8, 12], &[1.0, 2.0], &[true, true]).unwrap();
            let f = sample_function(&g, 2, |x, out| {
                out[0] = (x[0] * 3.1 + seed as f64).sin();
                out[1] = x[1] * x[0];
            }).unwrap();
            let back = shift_field(&shift_field(&f, &[a, b]).unwrap(), &[-a, -b]).unwrap();
            prop_assert_eq!(back.values(), f.values());
        }

        #[test]
        fn norm_is_absolutely_homogeneous(c in -50.0f64..50.0, p in 1.0f64..4.0) {
            let g = torus(64);
            let f = sample_function(&g, 1, |x, out| out[0] = (2.0 * PI * x[0]).sin() + 0.3).unwrap();
            let r = InteriorRegion::full(&g);
            let lhs = field_norm_p(&f.scaled(c), p, &r).unwrap();
            let rhs = c.abs() * field_norm_p(&f, p, &r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn sampling_reads_back_exactly(k in 0usize..64) {
            let g = torus(64);
            let eval = |x: f64| (5.0 * x).exp() - x * x;
            let f = sample_function(&g, 1, |x, out| out[0] = eval(x[0])).unwrap();
            prop_assert_eq!(f.value(k, 0), eval(g.coordinate(0, k)));
        }
    }
}
