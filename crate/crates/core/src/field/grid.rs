use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of coordinates (time plus three space axes).
pub const MAX_AXES: usize = 4;

/// Multi-index into a grid; unused trailing entries are zero.
pub type Index = [usize; MAX_AXES];

/// The user-facing description of a grid, as it appears in headers and configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points_per_axis: Vec<usize>,
    pub extent_per_axis: Vec<f64>,
    pub periodic_per_axis: Vec<bool>,
}

/// Uniform rectangular lattice over a box in space-time.
///
/// Periodic axes hold `points` samples at `k * extent / points`; bounded axes
/// include both closed-interval endpoints, so their spacing is
/// `extent / (points - 1)`. Axis 0 is time whenever the grid is space-time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    points: Vec<usize>,
    extent: Vec<f64>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(points: &[usize], extent: &[f64], periodic: &[bool]) -> Result<Self> {
        let dims = points.len();
        if dims == 0 || extent.len() != dims || periodic.len() != dims {
            return Err(Error::DimensionMismatch(format!(
                "points/extent/periodic lengths {}/{}/{}",
                points.len(),
                extent.len(),
                periodic.len()
            )));
        }
        if dims > MAX_AXES {
            return Err(Error::DimensionMismatch(format!(
                "{dims} axes requested, at most {MAX_AXES} supported"
            )));
        }
        for (axis, (&n, &len)) in points.iter().zip(extent).enumerate() {
            if n < 4 {
                return Err(Error::TooFewPoints { axis, points: n });
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "extent on axis {axis} must be positive, got {len}"
                )));
            }
        }
        let spacing: Vec<f64> = points
            .iter()
            .zip(extent)
            .zip(periodic)
            .map(|((&n, &len), &per)| if per { len / n as f64 } else { len / (n - 1) as f64 })
            .collect();
        let mut strides = vec![1usize; dims];
        for axis in (0..dims.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * points[axis + 1];
        }
        Ok(Self {
            points: points.to_vec(),
            extent: extent.to_vec(),
            periodic: periodic.to_vec(),
            spacing,
            strides,
        })
    }

    /// One periodic axis of `points` samples over `[0, extent)`.
    pub fn torus_1d(points: usize, extent: f64) -> Result<Self> {
        Self::new(&[points], &[extent], &[true])
    }

    /// `(0, t_end) x T^1`: bounded time axis 0, periodic space axis 1.
    pub fn spacetime_1d(time_points: usize, t_end: f64, space_points: usize, length: f64) -> Result<Self> {
        Self::new(&[time_points, space_points], &[t_end, length], &[false, true])
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_extent(&self) -> f64 {
        self.extent.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        index as f64 * self.spacing[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Index {
        let mut idx = [0usize; MAX_AXES];
        let mut rem = flat;
        for axis in 0..self.dims() {
            idx[axis] = rem / self.strides[axis];
            rem %= self.strides[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &Index) -> usize {
        (0..self.dims()).map(|a| idx[a] * self.strides[a]).sum()
    }

    /// Physical coordinates of a lattice point.
    pub fn point(&self, flat: usize) -> [f64; MAX_AXES] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_AXES];
        for axis in 0..self.dims() {
            x[axis] = self.coordinate(axis, idx[axis]);
        }
        x
    }

    /// Displace `idx` by `offset` lattice steps. Periodic axes wrap; `None` when
    /// a bounded axis leaves the grid.
    #[inline]
    pub fn offset_index(&self, idx: &Index, offset: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for axis in 0..self.dims() {
            let n = self.points[axis] as i64;
            let mut k = idx[axis] as i64 + offset[axis];
            if self.periodic[axis] {
                k = k.rem_euclid(n);
            } else if k < 0 || k >= n {
                return None;
            }
            flat += k as usize * self.strides[axis];
        }
        Some(flat)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            points_per_axis: self.points.clone(),
            extent_per_axis: self.extent.clone(),
            periodic_per_axis: self.periodic.clone(),
        }
    }
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(&spec.points_per_axis, &spec.extent_per_axis, &spec.periodic_per_axis)
    }
}

impl From<Grid> for GridSpec {
    fn from(grid: Grid) -> Self {
        grid.spec()
    }
}

/// Builds a grid, validating lengths, point counts and extents.
pub fn make_grid(points: &[usize], extent: &[f64], periodic: &[bool]) -> Result<Grid> {
    Grid::new(points, extent, periodic)
}
