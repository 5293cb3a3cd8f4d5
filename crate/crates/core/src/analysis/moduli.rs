use serde::Serialize;

use super::pow_abs;
use crate::error::{Error, Result};
use crate::field::{Field, InteriorRegion, MAX_AXES};
use crate::parallel::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesovEstimate {
    pub seminorm: f64,
    /// Lattice shift attaining the maximum.
    pub worst_shift: Vec<i64>,
    pub worst_shift_length: f64,
    pub shifts_examined: usize,
}

/// Lattice offsets `o` with `|o h| <= radius` (closed ball), optionally
/// without the origin.
fn ball_offsets(spacing: &[f64], radius: f64, with_origin: bool) -> Vec<([i64; MAX_AXES], f64)> {
    let dims = spacing.len();
    let reach: Vec<i64> = spacing.iter().map(|h| (radius / h * (1.0 + 1e-12)).floor() as i64).collect();
    let mut out = Vec::new();
    let mut o = [0i64; MAX_AXES];
    for a in 0..dims {
        o[a] = -reach[a];
    }
    let tol = radius * (1.0 + 1e-12);
    loop {
        let len = (0..dims).map(|a| (o[a] as f64 * spacing[a]).powi(2)).sum::<f64>().sqrt();
        if len <= tol && (with_origin || len > 0.0) {
            out.push((o, len));
        }
        let mut a = dims;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if o[a] < reach[a] {
                o[a] += 1;
                break;
            }
            o[a] = -reach[a];
        }
    }
}

fn diff_norm(u: &[f64], v: &[f64]) -> f64 {
    if u.len() == 1 {
        return (u[0] - v[0]).abs();
    }
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_valid(field: &Field) -> Result<()> {
    if field.has_invalid() {
        return Err(Error::InvalidParameter("moduli need a field without invalid samples".into()));
    }
    Ok(())
}

/// `max |x'|^(-s) || u - u(. - x') ||_{L^p(region)}` over non-zero lattice
/// shifts of length at most `max_shift_length`.
pub fn besov_seminorm(
    field: &Field,
    p: f64,
    s: f64,
    region: &InteriorRegion,
    max_shift_length: f64,
) -> Result<BesovEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    check_valid(field)?;
    region.check_grid(field.grid())?;
    region.require_margin(max_shift_length)?;
    let grid = field.grid();
    let dims = grid.dims();
    let shifts = ball_offsets(grid.spacing(), max_shift_length, false);
    if shifts.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no lattice shift of length <= {max_shift_length}"
        )));
    }
    let points = region.flat_indices();
    let cv = grid.cell_volume();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, (o, len)) in shifts.iter().enumerate() {
        let mut neg = [0i64; MAX_AXES];
        for a in 0..dims {
            neg[a] = -o[a];
        }
        let sum = ordered_sum(points.len(), |m| {
            let x = points[m];
            let idx = grid.multi_index(x);
            let y = grid.offset_index(&idx, &neg[..dims]).expect("margin checked");
            pow_abs(diff_norm(field.state(x), field.state(y)), p)
        });
        let v = (sum * cv).powf(1.0 / p) / len.powf(s);
        if v > best.0 {
            best = (v, k);
        }
    }
    let (o, len) = shifts[best.1];
    Ok(BesovEstimate {
        seminorm: best.0,
        worst_shift: o[..dims].to_vec(),
        worst_shift_length: len,
        shifts_examined: shifts.len(),
    })
}

/// `(1/eps) sum_{x in region} cell_volume * avg_{|y - x| <= eps} |u(x) - u(y)|^p`,
/// where the ball average runs over all lattice points of the closed ball,
/// the center included.
pub fn vmo_modulus(field: &Field, p: f64, epsilon: f64, region: &InteriorRegion) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let grid = field.grid();
    let minimum = 2.0 * grid.max_spacing();
    if !(epsilon >= minimum * (1.0 - 1e-12)) {
        return Err(Error::EpsilonTooSmall { epsilon, minimum });
    }
    check_valid(field)?;
    region.check_grid(grid)?;
    region.require_margin(epsilon)?;
    let dims = grid.dims();
    let ball = ball_offsets(grid.spacing(), epsilon, true);
    if ball.len() < 2 {
        return Err(Error::EmptyRegion("ball holds fewer than two lattice points".into()));
    }
    let points = region.flat_indices();
    let inv = 1.0 / ball.len() as f64;
    let sum = ordered_sum(points.len(), |m| {
        let x = points[m];
        let idx = grid.multi_index(x);
        let ux = field.state(x);
        let mut acc = 0.0;
        for (o, _) in &ball {
            let y = grid.offset_index(&idx, &o[..dims]).expect("margin checked");
            acc += pow_abs(diff_norm(ux, field.state(y)), p);
        }
        acc * inv
    });
    Ok(sum * grid.cell_volume() / epsilon)
}
