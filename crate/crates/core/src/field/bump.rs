use serde::{Deserialize, Serialize};

use super::grid::{Grid, MAX_AXES};
use super::region::InteriorRegion;
use crate::error::{Error, Result};

/// `exp(-1 / (1 - z^2))` on `|z| < 1`, zero elsewhere.
#[inline]
pub fn bump_profile(z: f64) -> f64 {
    let q = 1.0 - z * z;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// Closed-form derivative of [`bump_profile`].
#[inline]
pub fn bump_profile_derivative(z: f64) -> f64 {
    let q = 1.0 - z * z;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp() * (-2.0 * z / (q * q))
    }
}

/// Smooth compactly supported test function: a product of scaled bumps
/// centered at `center` with half-widths `radius`. Values and partial
/// derivatives come from the closed form; periodic axes use the nearest image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    center: Vec<f64>,
    radius: Vec<f64>,
    period: Vec<Option<f64>>,
}

/// A test function tabulated on the lattice points of its support.
#[derive(Debug, Clone)]
pub struct SampledTestFunction {
    pub dims: usize,
    /// Flat grid indices with non-zero value or derivative.
    pub points: Vec<usize>,
    pub value: Vec<f64>,
    /// Gradient, `dims` entries per point.
    pub gradient: Vec<f64>,
}

impl TestFunction {
    pub fn new(grid: &Grid, center: &[f64], radius: &[f64]) -> Result<Self> {
        let dims = grid.dims();
        if center.len() != dims || radius.len() != dims {
            return Err(Error::DimensionMismatch(format!(
                "test function needs {dims} center and radius entries"
            )));
        }
        let mut period = Vec::with_capacity(dims);
        for axis in 0..dims {
            let (c, r, len) = (center[axis], radius[axis], grid.extent()[axis]);
            if !(r > 0.0 && r.is_finite() && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad test function on axis {axis}")));
            }
            if grid.periodic()[axis] {
                if r >= 0.5 * len {
                    return Err(Error::InvalidParameter(format!(
                        "radius {r} must be below half the period on axis {axis}"
                    )));
                }
                period.push(Some(len));
            } else {
                if c - r < 0.0 || c + r > len {
                    return Err(Error::InvalidParameter(format!(
                        "support [{}, {}] leaves the domain on axis {axis}",
                        c - r,
                        c + r
                    )));
                }
                period.push(None);
            }
        }
        Ok(Self {
            center: center.to_vec(),
            radius: radius.to_vec(),
            period,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn dims(&self) -> usize {
        self.center.len()
    }

    #[inline]
    fn scaled(&self, axis: usize, x: f64) -> f64 {
        let mut d = x - self.center[axis];
        if let Some(l) = self.period[axis] {
            d -= l * (d / l).round();
        }
        d / self.radius[axis]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.dims()).map(|a| bump_profile(self.scaled(a, x[a]))).product()
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_AXES] {
        let dims = self.dims();
        let mut z = [0.0; MAX_AXES];
        let mut b = [0.0; MAX_AXES];
        for a in 0..dims {
            z[a] = self.scaled(a, x[a]);
            b[a] = bump_profile(z[a]);
        }
        let mut g = [0.0; MAX_AXES];
        for a in 0..dims {
            let mut prod = bump_profile_derivative(z[a]) / self.radius[a];
            for o in (0..dims).filter(|&o| o != a) {
                prod *= b[o];
            }
            g[a] = prod;
        }
        g
    }

    /// Support box `[c - r, c + r]` per axis (unwrapped).
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.center
            .iter()
            .zip(&self.radius)
            .map(|(c, r)| (c - r, c + r))
            .collect()
    }

    /// Inclusive lattice index box covering the support. On a periodic axis a
    /// support that crosses the seam takes the whole axis.
    pub fn lattice_box(&self, grid: &Grid) -> (Vec<usize>, Vec<usize>) {
        let mut lo = Vec::with_capacity(self.dims());
        let mut hi = Vec::with_capacity(self.dims());
        for a in 0..self.dims() {
            let h = grid.spacing()[a];
            let n = grid.points()[a] as i64;
            let l = ((self.center[a] - self.radius[a]) / h).floor() as i64;
            let u = ((self.center[a] + self.radius[a]) / h).ceil() as i64;
            if grid.periodic()[a] && (l < 0 || u >= n) {
                lo.push(0);
                hi.push(n as usize - 1);
            } else {
                lo.push(l.clamp(0, n - 1) as usize);
                hi.push(u.clamp(0, n - 1) as usize);
            }
        }
        (lo, hi)
    }

    /// Whether the support lies inside the region box on every bounded axis.
    pub fn fits_in(&self, region: &InteriorRegion) -> bool {
        let grid = region.grid();
        (0..self.dims()).all(|a| {
            if grid.periodic()[a] {
                return true;
            }
            let h = grid.spacing()[a];
            let (lo, hi) = (region.lo()[a] as f64 * h, region.hi()[a] as f64 * h);
            self.center[a] - self.radius[a] >= lo - 1e-12 && self.center[a] + self.radius[a] <= hi + 1e-12
        })
    }

    /// Distance from the support to a point set on a periodic axis, used to
    /// keep analysis windows clear of known features.
    pub fn clears(&self, axis: usize, x: f64, half_width: f64) -> bool {
        let d = self.scaled(axis, x).abs() * self.radius[axis];
        d >= self.radius[axis] + half_width
    }

    /// Tabulate value and gradient on all lattice points of the support.
    pub fn sample(&self, grid: &Grid) -> Result<SampledTestFunction> {
        if grid.dims() != self.dims() {
            return Err(Error::DimensionMismatch("test function and grid differ in dimension".into()));
        }
        let dims = grid.dims();
        // enumerate lattice ranges covering the support on each axis
        let mut ranges: Vec<Vec<usize>> = Vec::with_capacity(dims);
        for a in 0..dims {
            let h = grid.spacing()[a];
            let n = grid.points()[a] as i64;
            let lo = ((self.center[a] - self.radius[a]) / h).floor() as i64;
            let hi = ((self.center[a] + self.radius[a]) / h).ceil() as i64;
            let mut r: Vec<usize> = if grid.periodic()[a] {
                (lo..=hi).map(|k| k.rem_euclid(n) as usize).collect()
            } else {
                (lo.max(0)..=hi.min(n - 1)).map(|k| k as usize).collect()
            };
            r.sort_unstable();
            r.dedup();
            ranges.push(r);
        }
        let mut points = Vec::new();
        let mut value = Vec::new();
        let mut gradient = Vec::new();
        let mut counters = vec![0usize; dims];
        let total: usize = ranges.iter().map(Vec::len).product();
        for _ in 0..total {
            let mut idx = [0usize; MAX_AXES];
            let mut x = [0.0; MAX_AXES];
            for a in 0..dims {
                idx[a] = ranges[a][counters[a]];
                x[a] = grid.coordinate(a, idx[a]);
            }
            let v = self.value(&x[..dims]);
            let g = self.gradient(&x[..dims]);
            if v != 0.0 || g[..dims].iter().any(|&d| d != 0.0) {
                points.push(grid.flat_index(&idx));
                value.push(v);
                gradient.extend_from_slice(&g[..dims]);
            }
            for a in (0..dims).rev() {
                counters[a] += 1;
                if counters[a] < ranges[a].len() {
                    break;
                }
                counters[a] = 0;
            }
        }
        Ok(SampledTestFunction {
            dims,
            points,
            value,
            gradient,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_finite_difference() {
        for &z in &[-0.9, -0.4, 0.0, 0.3, 0.77] {
            let h = 1e-6;
            let fd = (bump_profile(z + h) - bump_profile(z - h)) / (2.0 * h);
            assert!((fd - bump_profile_derivative(z)).abs() < 1e-8);
        }
        assert_eq!(bump_profile(1.0), 0.0);
        assert_eq!(bump_profile_derivative(-1.2), 0.0);
    }

    #[test]
    fn vanishes_outside_support_exactly() {
        let g = Grid::new(&[40, 64], &[1.0, 1.0], &[false, true]).unwrap();
        let phi = TestFunction::new(&g, &[0.5, 0.9], &[0.2, 0.15]).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            let t = (x[0] - 0.5).abs() / 0.2;
            let mut d = x[1] - 0.9;
            d -= d.round();
            let s = d.abs() / 0.15;
            if t >= 1.0 || s >= 1.0 {
                assert_eq!(phi.value(&x[..2]), 0.0);
                assert!(phi.gradient(&x[..2])[..2].iter().all(|&v| v == 0.0));
            }
        }
        // the support wraps across x = 1
        assert!(phi.value(&[0.5, 0.02]) > 0.0);
    }

    #[test]
    fn sampled_support_matches_dense_evaluation() {
        let g = Grid::new(&[33, 32], &[1.0, 1.0], &[false, true]).unwrap();
        let phi = TestFunction::new(&g, &[0.5, 0.05], &[0.3, 0.2]).unwrap();
        let s = phi.sample(&g).unwrap();
        let dense = (0..g.len()).filter(|&p| phi.value(&g.point(p)[..2]) != 0.0).count();
        assert_eq!(s.points.iter().filter(|&&p| phi.value(&g.point(p)[..2]) != 0.0).count(), dense);
    }

    #[test]
    fn rejects_support_leaving_bounded_axis() {
        let g = Grid::new(&[16, 16], &[1.0, 1.0], &[false, true]).unwrap();
        assert!(TestFunction::new(&g, &[0.1, 0.5], &[0.2, 0.1]).is_err());
        assert!(TestFunction::new(&g, &[0.5, 0.5], &[0.2, 0.6]).is_err());
    }
}
