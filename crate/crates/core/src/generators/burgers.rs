use crate::error::{Error, Result};
use crate::field::{sample_function, Field, Grid, TestFunction};

fn check_spacetime(grid: &Grid) -> Result<()> {
    if grid.dims() != 2 || grid.periodic()[0] || !grid.periodic()[1] {
        return Err(Error::InvalidParameter(
            "expected a space-time grid: bounded time axis 0, periodic space axis 1".into(),
        ));
    }
    Ok(())
}

/// One Riemann wave of Burgers' equation centered at the origin.
#[derive(Debug, Clone, Copy)]
struct Wave {
    left: f64,
    right: f64,
}

impl Wave {
    /// Slowest and fastest signal speeds.
    fn speeds(&self) -> (f64, f64) {
        if self.left > self.right {
            let s = 0.5 * (self.left + self.right);
            (s, s)
        } else {
            (self.left, self.right)
        }
    }

    /// Value at offset `d` from the wave center after time `t`. A sample lying
    /// exactly on a jump takes the right state: any intermediate value would
    /// put a one-point spike into sampled fluxes.
    fn value(&self, d: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return if d < 0.0 { self.left } else { self.right };
        }
        let xi = d / t;
        if self.left > self.right {
            if xi < 0.5 * (self.left + self.right) {
                self.left
            } else {
                self.right
            }
        } else {
            xi.clamp(self.left, self.right)
        }
    }
}

/// Exact entropy solution of a Burgers Riemann problem on a periodic interval:
/// the main wave at `x0` and the compensating wrap wave at `x0 + L/2`.
#[derive(Debug, Clone)]
pub struct BurgersRiemann {
    pub u_left: f64,
    pub u_right: f64,
    pub x0: f64,
    pub length: f64,
    pub end_time: f64,
    main: Wave,
    wrap: Wave,
}

impl BurgersRiemann {
    /// Validate the datum and check that the two waves stay apart up to `end_time`.
    pub fn new(u_left: f64, u_right: f64, x0: f64, length: f64, end_time: f64) -> Result<Self> {
        if !(u_left.is_finite() && u_right.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidParameter("Riemann states must be finite".into()));
        }
        if u_left == u_right {
            return Err(Error::InvalidParameter("degenerate Riemann datum: u_left == u_right".into()));
        }
        if !(length > 0.0 && end_time >= 0.0) {
            return Err(Error::InvalidParameter("length must be positive and end time non-negative".into()));
        }
        let main = Wave { left: u_left, right: u_right };
        let wrap = Wave { left: u_right, right: u_left };
        let (a, b) = main.speeds();
        let (a2, b2) = wrap.speeds();
        let t = end_time;
        // main wave occupies [aT, bT] around x0, the wrap wave [a2 T, b2 T]
        // around x0 + L/2; both gaps must stay open
        let gap_right = 0.5 * length + a2 * t - b * t;
        let gap_left = 0.5 * length + a * t - b2 * t;
        if gap_right <= 0.0 || gap_left <= 0.0 {
            return Err(Error::WaveInteraction(format!(
                "the wave at x0 = {x0} meets the wrap wave at x0 + L/2 before t = {end_time} \
                 (gaps {gap_left:.4}, {gap_right:.4}); use a longer period or a shorter end time"
            )));
        }
        Ok(Self {
            u_left,
            u_right,
            x0,
            length,
            end_time,
            main,
            wrap,
        })
    }

    pub fn is_shock(&self) -> bool {
        self.u_left > self.u_right
    }

    /// Shock speed `(u_l + u_r)/2`, or `None` for a rarefaction.
    pub fn shock_speed(&self) -> Option<f64> {
        self.is_shock().then_some(0.5 * (self.u_left + self.u_right))
    }

    /// Companion dissipation rate per unit time at the main shock,
    /// `(u_l - u_r)^3 / 12`, and zero for a rarefaction.
    pub fn dissipation_rate(&self) -> f64 {
        if self.is_shock() {
            (self.u_left - self.u_right).powi(3) / 12.0
        } else {
            0.0
        }
    }

    fn wrap_offset(&self, x: f64, center: f64) -> f64 {
        let l = self.length;
        (x - center + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        let (a, b) = self.main.speeds();
        let d1 = self.wrap_offset(x, self.x0);
        if d1 >= a * t && d1 <= b * t {
            return self.main.value(d1, t);
        }
        let (a2, b2) = self.wrap.speeds();
        let d2 = self.wrap_offset(x, self.x0 + 0.5 * self.length);
        if d2 >= a2 * t && d2 <= b2 * t {
            return self.wrap.value(d2, t);
        }
        if d1 > b * t && d2 < a2 * t {
            self.u_right
        } else {
            self.u_left
        }
    }

    /// Arc occupied by the wrap wave up to time `t`, as `(lo, hi)` in unwrapped
    /// coordinates around `x0 + L/2`.
    pub fn wrap_zone(&self, t: f64) -> (f64, f64) {
        let (a2, b2) = self.wrap.speeds();
        let c = self.x0 + 0.5 * self.length;
        (c + a2.min(0.0) * t, c + b2.max(0.0) * t)
    }

    /// Refuse test functions whose support reaches the wrap wave.
    pub fn check_clear(&self, test: &TestFunction) -> Result<()> {
        if test.dims() != 2 {
            return Err(Error::DimensionMismatch("expected a space-time test function".into()));
        }
        let (t_lo, t_hi) = test.support()[0];
        let t = t_hi.clamp(0.0, self.end_time).max(t_lo.max(0.0));
        let (lo, hi) = self.wrap_zone(t);
        let mid = 0.5 * (lo + hi);
        if test.clears(1, mid, 0.5 * (hi - lo)) {
            Ok(())
        } else {
            Err(Error::WaveInteraction(format!(
                "test function support {:?} overlaps the wrap wave on [{lo:.4}, {hi:.4}] (mod {})",
                test.support(),
                self.length
            )))
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        sample_function(grid, 1, |x, out| out[0] = self.value(x[0], x[1]))
    }
}

/// Exact Burgers Riemann solution on a space-time grid; the end time is the
/// extent of the time axis.
pub fn burgers_riemann(grid: &Grid, u_left: f64, u_right: f64, x0: f64) -> Result<(Field, BurgersRiemann)> {
    check_spacetime(grid)?;
    let sol = BurgersRiemann::new(u_left, u_right, x0, grid.extent()[1], grid.extent()[0])?;
    Ok((sol.sample(grid)?, sol))
}

/// Solve `u = a sin(2 pi (x - u t) / L)` by Newton iteration, falling back to
/// bisection on `[-|a|, |a|]` whenever a step leaves the bracket.
fn characteristic_value(a: f64, k: f64, x: f64, t: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let f = |u: f64| u - a * (k * (x - u * t)).sin();
    let df = |u: f64| 1.0 + a * k * t * (k * (x - u * t)).cos();
    let (mut lo, mut hi) = (-a.abs(), a.abs());
    let mut u = a * (k * x).sin();
    for _ in 0..200 {
        let r = f(u);
        if r.abs() <= 1e-15 * (1.0 + a.abs()) {
            return Ok(u);
        }
        // f is increasing on the bracket before the shock time
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let newton = u - r / df(u);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - u).abs() <= 1e-15 * a.abs() || hi - lo <= 1e-16 {
            return Ok(next);
        }
        u = next;
    }
    Err(Error::NoConvergence(format!("characteristic solve at x = {x}, t = {t}")))
}

/// Classical solution of Burgers' equation from `u0(x) = a sin(2 pi x / L)`,
/// valid strictly before the shock time `L / (2 pi |a|)`.
pub fn burgers_smooth(grid: &Grid, amplitude: f64, end_time: f64) -> Result<Field> {
    check_spacetime(grid)?;
    let length = grid.extent()[1];
    if !(end_time >= 0.0 && (end_time - grid.extent()[0]).abs() <= 1e-12 * end_time.max(1.0)) {
        return Err(Error::InvalidParameter(format!(
            "end time {end_time} must equal the time extent {} of the grid",
            grid.extent()[0]
        )));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidParameter("amplitude must be finite".into()));
    }
    if amplitude != 0.0 {
        let shock = length / (std::f64::consts::TAU * amplitude.abs());
        if end_time >= shock {
            return Err(Error::InvalidParameter(format!(
                "end time {end_time} is not before the shock time {shock}"
            )));
        }
    }
    let k = std::f64::consts::TAU / length;
    let values: Vec<Result<f64>> = {
        use crate::parallel::*;
        (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let x = grid.point(p);
                characteristic_value(amplitude, k, x[1], x[0])
            })
            .collect()
    };
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Field::new(grid.clone(), 1, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{burgers_system, weak_residual};

    #[test]
    fn riemann_states_and_checks() {
        assert!(BurgersRiemann::new(1.0, 1.0, 0.5, 1.0, 0.1).is_err());
        // stationary shock: the wrap rarefaction reaches it at t = L/2
        assert!(BurgersRiemann::new(1.0, -1.0, 0.5, 1.0, 0.45).is_ok());
        assert!(matches!(
            BurgersRiemann::new(1.0, -1.0, 0.5, 1.0, 0.6),
            Err(Error::WaveInteraction(_))
        ));
        let s = BurgersRiemann::new(1.0, -1.0, 0.5, 1.0, 0.4).unwrap();
        assert_eq!(s.value(0.2, 0.49), 1.0);
        assert_eq!(s.value(0.2, 0.51), -1.0);
        assert_eq!(s.value(0.2, 0.5), -1.0);
        // inside the wrap rarefaction u = (x - 1)/t
        assert!((s.value(0.2, 0.9) - (-0.5)).abs() < 1e-12);
        assert!((s.value(0.2, 0.05) - 0.25).abs() < 1e-12);
        assert!((s.dissipation_rate() - 2.0 / 3.0).abs() < 1e-15);
        let r = BurgersRiemann::new(-1.0, 1.0, 0.5, 1.0, 0.4).unwrap();
        assert!((r.value(0.2, 0.6) - 0.5).abs() < 1e-12);
        assert_eq!(r.value(0.2, 0.3), -1.0);
        assert_eq!(r.shock_speed(), None);
    }

    #[test]
    fn moving_shock_speed() {
        let s = BurgersRiemann::new(2.0, 0.0, 0.25, 4.0, 0.5).unwrap();
        assert_eq!(s.shock_speed(), Some(1.0));
        assert_eq!(s.value(0.5, 0.74), 2.0);
        assert_eq!(s.value(0.5, 0.76), 0.0);
    }

    #[test]
    fn clearance_check() {
        let g = Grid::spacetime_1d(64, 0.4, 64, 1.0).unwrap();
        let (_, s) = burgers_riemann(&g, 1.0, -1.0, 0.5).unwrap();
        let near = TestFunction::new(&g, &[0.2, 0.5], &[0.15, 0.05]).unwrap();
        assert!(s.check_clear(&near).is_ok());
        let wide = TestFunction::new(&g, &[0.2, 0.5], &[0.15, 0.3]).unwrap();
        assert!(s.check_clear(&wide).is_err());
    }

    #[test]
    fn shock_weak_residual_is_small() {
        let g = Grid::spacetime_1d(512, 0.45, 512, 1.0).unwrap();
        let (f, s) = burgers_riemann(&g, 1.0, -1.0, 0.5).unwrap();
        let phi = TestFunction::new(&g, &[0.225, 0.5], &[0.15, 0.04]).unwrap();
        s.check_clear(&phi).unwrap();
        let r = weak_residual(&burgers_system(), &f, &phi).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-3), "{r:?}");
    }

    #[test]
    fn smooth_solution_oracles() {
        let g = Grid::spacetime_1d(33, 0.5, 64, 1.0).unwrap();
        let f = burgers_smooth(&g, 0.1, 0.5).unwrap();
        for j in 0..64 {
            let x = g.coordinate(1, j);
            assert_eq!(f.value(j, 0), 0.1 * (std::f64::consts::TAU * x).sin());
        }
        // every sample satisfies the characteristic relation
        for p in 0..g.len() {
            let x = g.point(p);
            let u = f.value(p, 0);
            assert!((u - 0.1 * (std::f64::consts::TAU * (x[1] - u * x[0])).sin()).abs() <= 1e-14);
        }
        let z = burgers_smooth(&g, 0.0, 0.5).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        assert!(burgers_smooth(&g, 0.4, 0.5).is_err());
    }
}
