//! Discrete mollification with bump kernels.
//!
//! A kernel is a finite list of lattice taps `(offset, weight)` with
//! `sum weight * cell_volume = 1`. Convolution is the direct sum
//! `sum_taps weight * cell_volume * u(x - offset)`, wrapping on periodic axes.
//! Taps are stored as a center tap plus pairs `(o, -o)`, and every sum adds
//! the two members of a pair before scaling, so symmetry and antisymmetry
//! survive rounding exactly.
//!
//! The `tensor_bump` profile (and the radial bump on one-axis grids) factors
//! into one-dimensional taps; those kernels are applied axis by axis, which
//! agrees with the direct sum to rounding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{bump_profile, bump_profile_derivative, Field, Grid, InteriorRegion, MAX_AXES};
use crate::parallel::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelProfile {
    /// `exp(-1 / (1 - |x/eps|^2))`, radial.
    #[default]
    Bump,
    /// Product of one-dimensional bumps of half-width `eps / sqrt(D)` on a
    /// `D`-axis grid, so the support cube sits inside the `eps`-ball.
    TensorBump,
}

impl KernelProfile {
    pub fn name(self) -> &'static str {
        match self {
            KernelProfile::Bump => "bump",
            KernelProfile::TensorBump => "tensor_bump",
        }
    }
}

impl fmt::Display for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(KernelProfile::Bump),
            "tensor_bump" | "tensor-bump" => Ok(KernelProfile::TensorBump),
            other => Err(Error::InvalidParameter(format!("unknown kernel profile `{other}`"))),
        }
    }
}

/// One kernel tap: `weight` is the kernel density at the lattice offset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tap {
    pub offset: Vec<i64>,
    pub weight: f64,
}

/// One-dimensional factor: `w[k]` for `k = 0..=r` already multiplied by the
/// axis spacing; `w[-k] = w[k]` (even) or `-w[k]` (odd).
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    w: Vec<f64>,
    odd: bool,
}

impl Factor {
    fn reach(&self) -> usize {
        self.w.len() - 1
    }
}

/// Taps in paired form with weights premultiplied by the cell volume.
#[derive(Debug, Clone, PartialEq)]
struct Stencil {
    center: f64,
    pairs: Vec<([i64; MAX_AXES], f64)>,
    odd: bool,
    reach: Vec<usize>,
    factors: Option<Vec<Factor>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    epsilon: f64,
    grid: Grid,
    profile: KernelProfile,
    stencil: Stencil,
}

/// Lattice offsets `o != 0` in the box `|o_a| <= reach_a` whose first non-zero
/// coordinate is positive: one representative per pair `(o, -o)`.
fn half_offsets(reach: &[usize]) -> Vec<[i64; MAX_AXES]> {
    let dims = reach.len();
    let mut out = Vec::new();
    let mut o = [0i64; MAX_AXES];
    for (a, &r) in reach.iter().enumerate() {
        o[a] = -(r as i64);
    }
    loop {
        let first = o[..dims].iter().find(|&&v| v != 0);
        if matches!(first, Some(&v) if v > 0) {
            out.push(o);
        }
        let mut a = dims;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if o[a] < reach[a] as i64 {
                o[a] += 1;
                break;
            }
            o[a] = -(reach[a] as i64);
        }
    }
}

/// Largest `k` with `k * h < radius`.
fn axis_reach(radius: f64, h: f64) -> usize {
    let mut k = (radius / h).floor() as usize;
    while k > 0 && k as f64 * h >= radius {
        k -= 1;
    }
    k
}

fn bump_factor(radius: f64, h: f64) -> Factor {
    let r = axis_reach(radius, h);
    let raw: Vec<f64> = (0..=r).map(|k| bump_profile(k as f64 * h / radius)).collect();
    let mass = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    Factor {
        w: raw.iter().map(|v| v / mass).collect(),
        odd: false,
    }
}

/// Derivative of [`bump_factor`] with the same normalization.
fn bump_derivative_factor(radius: f64, h: f64) -> Factor {
    let r = axis_reach(radius, h);
    let mass: f64 = bump_profile(0.0) + 2.0 * (1..=r).map(|k| bump_profile(k as f64 * h / radius)).sum::<f64>();
    let w = (0..=r)
        .map(|k| if k == 0 { 0.0 } else { bump_derivative_scaled(k as f64 * h, radius) / mass })
        .collect();
    Factor { w, odd: true }
}

/// `d/dx bump(x / radius)` times `h`-free scaling: `bump'(x/r) / r`.
fn bump_derivative_scaled(x: f64, radius: f64) -> f64 {
    bump_profile_derivative(x / radius) / radius
}

impl Stencil {
    fn from_factors(factors: Vec<Factor>) -> Self {
        let reach: Vec<usize> = factors.iter().map(Factor::reach).collect();
        let odd = factors.iter().filter(|f| f.odd).count() % 2 == 1;
        let weight = |o: &[i64; MAX_AXES]| -> f64 {
            factors
                .iter()
                .enumerate()
                .map(|(a, f)| {
                    let k = o[a].unsigned_abs() as usize;
                    if f.odd && o[a] < 0 {
                        -f.w[k]
                    } else {
                        f.w[k]
                    }
                })
                .product()
        };
        let center = weight(&[0; MAX_AXES]);
        let pairs = half_offsets(&reach)
            .into_iter()
            .map(|o| (o, weight(&o)))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        Stencil {
            center,
            pairs,
            odd,
            reach,
            factors: Some(factors),
        }
    }

    /// Sum of all tap weights (times cell volume). Pair members are added
    /// first, so odd stencils give exactly zero.
    fn mass(&self) -> f64 {
        let sign = if self.odd { -1.0 } else { 1.0 };
        self.center + self.pairs.iter().map(|(_, w)| w + sign * w).sum::<f64>()
    }

    /// Enforce zero total weight on a derivative stencil by removing the mean
    /// from every tap. For antisymmetric stencils the mean is exactly zero.
    fn remove_mean(&mut self) {
        let taps = 1 + 2 * self.pairs.len();
        let mean = self.mass() / taps as f64;
        if mean != 0.0 {
            // only reachable for stencils that are not antisymmetric
            self.center -= mean;
            for (_, w) in &mut self.pairs {
                *w -= mean;
            }
        }
    }
}

/// Build the discrete kernel for `epsilon` on `grid`.
pub fn make_kernel(grid: &Grid, epsilon: f64, profile: KernelProfile) -> Result<Kernel> {
    let minimum = 2.0 * grid.max_spacing();
    if !(epsilon.is_finite() && epsilon >= minimum * (1.0 - 1e-12)) {
        return Err(Error::EpsilonTooSmall { epsilon, minimum });
    }
    let maximum = 0.5 * grid.min_extent();
    if epsilon >= maximum {
        return Err(Error::EpsilonTooLarge { epsilon, maximum });
    }
    let dims = grid.dims();
    let separable = dims == 1 || profile == KernelProfile::TensorBump;
    let stencil = if separable {
        let radius = epsilon / (dims as f64).sqrt();
        Stencil::from_factors((0..dims).map(|a| bump_factor(radius, grid.spacing()[a])).collect())
    } else {
        radial_stencil(grid, epsilon, false, 0)
    };
    Ok(Kernel {
        epsilon,
        grid: grid.clone(),
        profile,
        stencil,
    })
}

/// Radial bump taps, or (with `derivative`) the taps of its `axis` partial
/// derivative, normalized by the discrete mass of the bump.
fn radial_stencil(grid: &Grid, epsilon: f64, derivative: bool, axis: usize) -> Stencil {
    let dims = grid.dims();
    let h = grid.spacing();
    let reach: Vec<usize> = h.iter().map(|&hh| axis_reach(epsilon, hh)).collect();
    let offsets = half_offsets(&reach);
    let radius_of = |o: &[i64; MAX_AXES]| -> f64 {
        (0..dims).map(|a| (o[a] as f64 * h[a]).powi(2)).sum::<f64>().sqrt()
    };
    let raw: Vec<f64> = offsets.iter().map(|o| bump_profile(radius_of(o) / epsilon)).collect();
    let mass = (bump_profile(0.0) + 2.0 * raw.iter().sum::<f64>()) * grid.cell_volume();
    let cv = grid.cell_volume();
    let mut pairs = Vec::new();
    for (o, b) in offsets.iter().zip(&raw) {
        if *b == 0.0 {
            continue;
        }
        let w = if derivative {
            let r = radius_of(o);
            bump_derivative_scaled(r, epsilon) * (o[axis] as f64 * h[axis] / r) / mass * cv
        } else {
            b / mass * cv
        };
        pairs.push((*o, w));
    }
    Stencil {
        center: if derivative { 0.0 } else { bump_profile(0.0) / mass * cv },
        pairs,
        odd: derivative,
        reach,
        factors: None,
    }
}

impl Kernel {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    pub fn profile_name(&self) -> &'static str {
        self.profile.name()
    }

    /// Whether convolution runs axis by axis.
    pub fn is_separable(&self) -> bool {
        self.stencil.factors.is_some()
    }

    /// Largest tap offset per axis, in lattice steps.
    pub fn reach(&self) -> &[usize] {
        &self.stencil.reach
    }

    /// All taps with their densities.
    pub fn taps(&self) -> Vec<Tap> {
        expand(&self.stencil, &self.grid)
    }

    /// `sum weight * cell_volume`.
    pub fn mass(&self) -> f64 {
        self.stencil.mass()
    }

    fn derivative_stencil(&self, axis: usize) -> Stencil {
        let mut s = match &self.stencil.factors {
            Some(_) => {
                let dims = self.grid.dims();
                let radius = self.epsilon / (dims as f64).sqrt();
                let factors = (0..dims)
                    .map(|a| {
                        let h = self.grid.spacing()[a];
                        if a == axis {
                            bump_derivative_factor(radius, h)
                        } else {
                            bump_factor(radius, h)
                        }
                    })
                    .collect();
                Stencil::from_factors(factors)
            }
            None => radial_stencil(&self.grid, self.epsilon, true, axis),
        };
        s.remove_mean();
        s
    }

    /// Taps of the `axis` derivative kernel.
    pub fn derivative_taps(&self, axis: usize) -> Result<Vec<Tap>> {
        self.check_axis(axis)?;
        Ok(expand(&self.derivative_stencil(axis), &self.grid))
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.grid.dims() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for a {}-axis grid",
                self.grid.dims()
            )));
        }
        Ok(())
    }
}

fn expand(s: &Stencil, grid: &Grid) -> Vec<Tap> {
    let dims = grid.dims();
    let cv = grid.cell_volume();
    let sign = if s.odd { -1.0 } else { 1.0 };
    let mut taps = Vec::with_capacity(1 + 2 * s.pairs.len());
    if s.center != 0.0 || !s.odd {
        taps.push(Tap {
            offset: vec![0; dims],
            weight: s.center / cv,
        });
    }
    for (o, w) in &s.pairs {
        taps.push(Tap {
            offset: o[..dims].to_vec(),
            weight: w / cv,
        });
        taps.push(Tap {
            offset: o[..dims].iter().map(|v| -v).collect(),
            weight: sign * w / cv,
        });
    }
    taps
}

/// Convolution strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Separable passes when the kernel factors, else direct.
    #[default]
    Auto,
    /// The reference direct tap sum.
    Direct,
}

/// `u * eta^eps` on the region; points outside the region are invalid.
pub fn mollify(field: &Field, kernel: &Kernel, region: &InteriorRegion) -> Result<Field> {
    mollify_with(field, kernel, region, Method::Auto)
}

pub fn mollify_with(field: &Field, kernel: &Kernel, region: &InteriorRegion, method: Method) -> Result<Field> {
    prepare(field, kernel, region)?;
    apply(field, &kernel.stencil, region, method)
}

/// `d_axis (u * eta^eps)` computed as `u * d_axis eta^eps`, per component.
pub fn mollified_derivative(field: &Field, kernel: &Kernel, axis: usize, region: &InteriorRegion) -> Result<Field> {
    mollified_derivative_with(field, kernel, axis, region, Method::Auto)
}

pub fn mollified_derivative_with(
    field: &Field,
    kernel: &Kernel,
    axis: usize,
    region: &InteriorRegion,
    method: Method,
) -> Result<Field> {
    prepare(field, kernel, region)?;
    kernel.check_axis(axis)?;
    apply(field, &kernel.derivative_stencil(axis), region, method)
}

fn prepare(field: &Field, kernel: &Kernel, region: &InteriorRegion) -> Result<()> {
    if field.grid() != kernel.grid() {
        return Err(Error::DimensionMismatch("kernel was built for a different grid".into()));
    }
    region.check_grid(field.grid())?;
    region.require_margin(kernel.epsilon())
}

fn apply(field: &Field, stencil: &Stencil, region: &InteriorRegion, method: Method) -> Result<Field> {
    let grid = field.grid();
    let dims = grid.dims();
    for a in 0..dims {
        let n = grid.points()[a];
        if grid.periodic()[a] {
            continue;
        }
        let r = stencil.reach[a];
        if region.lo()[a] < r || region.hi()[a] + r >= n {
            return Err(Error::MarginTooSmall {
                axis: a,
                margin: region.lo()[a].min(n - 1 - region.hi()[a]) as f64 * grid.spacing()[a],
                required: r as f64 * grid.spacing()[a],
            });
        }
    }
    let boxed = match (&stencil.factors, method) {
        (Some(factors), Method::Auto) => separable(field, factors, region)?,
        _ => direct(field, stencil, region)?,
    };
    Ok(scatter(field, region, boxed))
}

fn box_shape(region: &InteriorRegion) -> Vec<usize> {
    region.lo().iter().zip(region.hi()).map(|(l, h)| h - l + 1).collect()
}

/// Place box-ordered values into a full-grid field masked to the region.
fn scatter(field: &Field, region: &InteriorRegion, boxed: Vec<f64>) -> Field {
    let grid = field.grid();
    let c = field.components();
    if region.len() == grid.len() {
        return Field::from_raw(grid.clone(), c, boxed, None);
    }
    let mut values = vec![0.0; grid.len() * c];
    let mut valid = vec![false; grid.len()];
    for (k, p) in region.flat_indices().into_iter().enumerate() {
        values[p * c..(p + 1) * c].copy_from_slice(&boxed[k * c..(k + 1) * c]);
        valid[p] = true;
    }
    Field::from_raw(grid.clone(), c, values, Some(valid))
}

fn invalid_source(p: usize) -> Error {
    Error::InvalidParameter(format!("field sample {p} inside the kernel support is invalid"))
}

/// Reference tap sum over the region box, in box order.
fn direct(field: &Field, stencil: &Stencil, region: &InteriorRegion) -> Result<Vec<f64>> {
    let grid = field.grid();
    let c = field.components();
    let points = region.flat_indices();
    let sign = if stencil.odd { -1.0 } else { 1.0 };
    let dims = grid.dims();
    let mut out = vec![0.0; points.len() * c];
    let failures: Vec<usize> = out
        .par_chunks_mut(c)
        .enumerate()
        .filter_map(|(k, dst)| {
            let p = points[k];
            let idx = grid.multi_index(p);
            if !field.is_valid(p) {
                return Some(p);
            }
            for (d, s) in dst.iter_mut().zip(field.state(p)) {
                *d = stencil.center * s;
            }
            let mut neg = [0i64; MAX_AXES];
            for (o, w) in &stencil.pairs {
                for a in 0..dims {
                    neg[a] = -o[a];
                }
                // u(x - o) pairs with u(x + o)
                let (Some(minus), Some(plus)) = (grid.offset_index(&idx, &neg[..dims]), grid.offset_index(&idx, &o[..dims]))
                else {
                    return Some(p);
                };
                if !field.is_valid(minus) || !field.is_valid(plus) {
                    return Some(p);
                }
                let (um, up) = (field.state(minus), field.state(plus));
                for j in 0..c {
                    dst[j] += w * (um[j] + sign * up[j]);
                }
            }
            None
        })
        .collect();
    match failures.first() {
        Some(&p) => Err(invalid_source(p)),
        None => Ok(out),
    }
}

/// Axis-by-axis application of a factored stencil over the region box.
fn separable(field: &Field, factors: &[Factor], region: &InteriorRegion) -> Result<Vec<f64>> {
    let grid = field.grid();
    let dims = grid.dims();
    let c = field.components();
    let out_shape = box_shape(region);
    // gather the region box grown by the reach on every axis
    let mut shape: Vec<usize> = (0..dims).map(|a| out_shape[a] + 2 * factors[a].reach()).collect();
    let total: usize = shape.iter().product();
    let mut buf = vec![0.0; total * c];
    let mut bad = vec![false; total];
    buf.par_chunks_mut(c)
        .zip(bad.par_iter_mut())
        .enumerate()
        .for_each(|(k, (dst, flag))| {
            let mut rest = k;
            let mut flat = 0usize;
            for a in (0..dims).rev() {
                let j = rest % shape[a];
                rest /= shape[a];
                let n = grid.points()[a] as i64;
                let mut src = region.lo()[a] as i64 - factors[a].reach() as i64 + j as i64;
                if grid.periodic()[a] {
                    src = src.rem_euclid(n);
                }
                flat += src as usize * grid.strides()[a];
            }
            if field.is_valid(flat) {
                dst.copy_from_slice(field.state(flat));
            } else {
                *flag = true;
            }
        });
    if bad.iter().any(|&b| b) {
        return Err(invalid_source(0));
    }
    for (s, factor) in factors.iter().enumerate() {
        let r = factor.reach();
        let len_in = shape[s];
        let len_out = out_shape[s];
        let outer: usize = shape[..s].iter().product();
        let inner: usize = shape[s + 1..].iter().product::<usize>() * c;
        let mut next = vec![0.0; outer * len_out * inner];
        let sign = if factor.odd { -1.0 } else { 1.0 };
        let w = &factor.w;
        let src = &buf;
        next.par_chunks_mut(inner).enumerate().for_each(|(row, dst)| {
            let o = row / len_out;
            let j = row % len_out;
            let base = (o * len_in + j + r) * inner;
            let mid = &src[base..base + inner];
            for (d, m) in dst.iter_mut().zip(mid) {
                *d = w[0] * m;
            }
            for (k, wk) in w.iter().enumerate().skip(1) {
                let lo = &src[base - k * inner..base - k * inner + inner];
                let hi = &src[base + k * inner..base + k * inner + inner];
                for ((d, a), b) in dst.iter_mut().zip(lo).zip(hi) {
                    *d += wk * (a + sign * b);
                }
            }
        });
        buf = next;
        shape[s] = len_out;
    }
    Ok(buf)
}
