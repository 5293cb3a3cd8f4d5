use serde::Serialize;

use super::grid::{Grid, Index, MAX_AXES};
use crate::error::{Error, Result};

/// Index box kept a physical distance `margin` away from every bounded edge.
///
/// Periodic axes always take the full range with zero margin. Everything the
/// analysis module integrates is restricted to such a region, so kernel
/// supports centered in it never leave the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorRegion {
    #[serde(skip)]
    grid: Grid,
    margins: Vec<f64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl InteriorRegion {
    pub fn new(grid: &Grid, margins: &[f64]) -> Result<Self> {
        if margins.len() != grid.dims() {
            return Err(Error::DimensionMismatch(format!(
                "{} margins for a {}-axis grid",
                margins.len(),
                grid.dims()
            )));
        }
        let mut lo = Vec::with_capacity(grid.dims());
        let mut hi = Vec::with_capacity(grid.dims());
        for axis in 0..grid.dims() {
            let m = margins[axis];
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidParameter(format!("margin on axis {axis} must be non-negative")));
            }
            let n = grid.points()[axis];
            if grid.periodic()[axis] {
                if m != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "periodic axis {axis} takes margin 0, got {m}"
                    )));
                }
                lo.push(0);
                hi.push(n - 1);
            } else {
                let k = (m / grid.spacing()[axis] - 1e-9).ceil().max(0.0) as usize;
                if 2 * k >= n {
                    return Err(Error::EmptyRegion(format!(
                        "margin {m} leaves no points on axis {axis}"
                    )));
                }
                lo.push(k);
                hi.push(n - 1 - k);
            }
        }
        Ok(Self {
            grid: grid.clone(),
            margins: margins.to_vec(),
            lo,
            hi,
        })
    }

    /// The whole grid.
    pub fn full(grid: &Grid) -> Self {
        Self::new(grid, &vec![0.0; grid.dims()]).expect("zero margins always give a region")
    }

    /// Margin `margin` on every bounded axis and zero on periodic axes.
    pub fn with_margin(grid: &Grid, margin: f64) -> Result<Self> {
        let margins: Vec<f64> = grid
            .periodic()
            .iter()
            .map(|&p| if p { 0.0 } else { margin })
            .collect();
        Self::new(grid, &margins)
    }

    /// The box `[lo, hi]` (inclusive, per axis) intersected with this region.
    pub fn sub_box(&self, lo: &[usize], hi: &[usize]) -> Result<Self> {
        let dims = self.grid.dims();
        if lo.len() != dims || hi.len() != dims {
            return Err(Error::DimensionMismatch(format!("sub-box needs {dims} bounds per side")));
        }
        let mut out = self.clone();
        for a in 0..dims {
            out.lo[a] = lo[a].max(self.lo[a]);
            out.hi[a] = hi[a].min(self.hi[a]);
            if out.lo[a] > out.hi[a] {
                return Err(Error::EmptyRegion(format!("sub-box is empty on axis {a}")));
            }
            out.margins[a] = if self.grid.periodic()[a] {
                0.0
            } else {
                let room = out.lo[a].min(self.grid.points()[a] - 1 - out.hi[a]);
                room as f64 * self.grid.spacing()[a]
            };
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn lo(&self) -> &[usize] {
        &self.lo
    }

    pub fn hi(&self) -> &[usize] {
        &self.hi
    }

    /// Smallest margin over bounded axes (infinite for a fully periodic grid).
    pub fn min_bounded_margin(&self) -> f64 {
        (0..self.grid.dims())
            .filter(|&a| !self.grid.periodic()[a])
            .map(|a| self.margins[a])
            .fold(f64::INFINITY, f64::min)
    }

    /// Error unless every bounded-axis margin is at least `required`.
    pub fn require_margin(&self, required: f64) -> Result<()> {
        for axis in 0..self.grid.dims() {
            if self.grid.periodic()[axis] {
                continue;
            }
            // compare in lattice units: the box edge must sit at least `required` from the boundary
            let room = self.lo[axis].min(self.grid.points()[axis] - 1 - self.hi[axis]);
            let have = room as f64 * self.grid.spacing()[axis];
            if have + 1e-12 * self.grid.spacing()[axis] < required {
                return Err(Error::MarginTooSmall {
                    axis,
                    margin: have,
                    required,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, idx: &Index) -> bool {
        (0..self.grid.dims()).all(|a| idx[a] >= self.lo[a] && idx[a] <= self.hi[a])
    }

    pub fn contains_flat(&self, flat: usize) -> bool {
        self.contains(&self.grid.multi_index(flat))
    }

    pub fn len(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat grid indices of all region points in storage order.
    pub fn flat_indices(&self) -> Vec<usize> {
        let dims = self.grid.dims();
        let mut out = Vec::with_capacity(self.len());
        let mut idx: Index = [0; MAX_AXES];
        idx[..dims].copy_from_slice(&self.lo);
        loop {
            out.push(self.grid.flat_index(&idx));
            let mut axis = dims;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < self.hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = self.lo[axis];
            }
        }
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::DimensionMismatch("region belongs to a different grid".into()));
        }
        Ok(())
    }

    /// Human-readable box description used in reports.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = (0..self.grid.dims())
            .map(|a| {
                let h = self.grid.spacing()[a];
                format!(
                    "x{a}:[{:.6},{:.6}]{}",
                    self.lo[a] as f64 * h,
                    self.hi[a] as f64 * h,
                    if self.grid.periodic()[a] { " periodic" } else { "" }
                )
            })
            .collect();
        parts.join(" x ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_margins_shrink_box() {
        let g = Grid::new(&[11, 8], &[1.0, 1.0], &[false, true]).unwrap();
        let r = InteriorRegion::new(&g, &[0.2, 0.0]).unwrap();
        assert_eq!(r.lo(), &[2, 0]);
        assert_eq!(r.hi(), &[8, 7]);
        assert_eq!(r.len(), 7 * 8);
        assert_eq!(r.flat_indices().len(), r.len());
        assert!(r.require_margin(0.2).is_ok());
        assert!(r.require_margin(0.25).is_err());
    }

    #[test]
    fn periodic_axis_needs_zero_margin() {
        let g = Grid::new(&[8], &[1.0], &[true]).unwrap();
        assert!(InteriorRegion::new(&g, &[0.1]).is_err());
        assert_eq!(InteriorRegion::full(&g).len(), 8);
    }

    #[test]
    fn oversized_margin_is_empty() {
        let g = Grid::new(&[9], &[1.0], &[false]).unwrap();
        assert!(matches!(InteriorRegion::new(&g, &[0.55]), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn flat_indices_are_sorted_and_inside() {
        let g = Grid::new(&[6, 5, 4], &[1.0, 1.0, 1.0], &[false, false, true]).unwrap();
        let r = InteriorRegion::new(&g, &[0.2, 0.25, 0.0]).unwrap();
        let idx = r.flat_indices();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(idx.iter().all(|&p| r.contains_flat(p)));
        let count = (0..g.len()).filter(|&p| r.contains_flat(p)).count();
        assert_eq!(count, idx.len());
    }
}
