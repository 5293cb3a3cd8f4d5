use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SystemSpec;
use crate::error::{Error, Result};

/// Where the compatibility identity is worst.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityWorst {
    pub j: usize,
    pub alpha: usize,
    pub state: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    /// `max |d_j Q_a - sum_i B_i d_j G_ia|` over samples, `j` and `a`.
    pub max_residual: f64,
    pub worst: Option<CompatibilityWorst>,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub max_ratio: f64,
    pub constant: f64,
    pub gamma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub gamma: f64,
    /// Largest Hölder quotient found.
    pub constant: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    pub step: f64,
    pub flux_error: f64,
    pub companion_error: f64,
    pub multiplier_error: f64,
}

impl FdReport {
    pub fn max_error(&self) -> f64 {
        self.flux_error.max(self.companion_error).max(self.multiplier_error)
    }
}

/// `count` states drawn uniformly from the system's sample box.
pub fn random_states(system: &SystemSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            system
                .sample_box()
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect()
}

pub fn compatibility_residual(system: &SystemSpec, states: &[Vec<f64>]) -> Result<CompatibilityReport> {
    let (n, dirs) = (system.n(), system.directions());
    let mut best = 0.0;
    let mut worst = None;
    for u in states {
        system.check_state(u)?;
        let dq = system.companion_gradient(u);
        let b = system.multipliers(u);
        let dg = system.flux_jacobian(u);
        for a in 0..dirs {
            for j in 0..n {
                let lhs = dq[a * n + j];
                let rhs: f64 = (0..n).map(|i| b[i] * dg[(i * dirs + a) * n + j]).sum();
                let r = (lhs - rhs).abs();
                if r > best || worst.is_none() {
                    best = r.max(best);
                    worst = Some(CompatibilityWorst {
                        j,
                        alpha: a,
                        state: u.clone(),
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    Ok(CompatibilityReport {
        max_residual: best,
        worst,
        samples: states.len(),
    })
}

/// Largest `|Q_a(u)| / (1 + |u|^(2 + gamma))`, compared with the system's
/// growth constant.
pub fn growth_check(system: &SystemSpec, states: &[Vec<f64>], gamma: f64) -> Result<GrowthReport> {
    let mut max_ratio: f64 = 0.0;
    for u in states {
        system.check_state(u)?;
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let denom = 1.0 + norm.powf(2.0 + gamma);
        for q in system.companion(u) {
            max_ratio = max_ratio.max(q.abs() / denom);
        }
    }
    Ok(GrowthReport {
        max_ratio,
        constant: system.growth_constant(),
        gamma,
        pass: max_ratio <= system.growth_constant(),
    })
}

/// Largest quotient `|DG_ia(s1) - DG_ia(s2)| / |s1 - s2|^gamma` over pairs and
/// `(i, a)`, with the gradient difference measured in the Euclidean norm over `j`.
pub fn flux_gradient_holder_estimate(
    system: &SystemSpec,
    pairs: &[(Vec<f64>, Vec<f64>)],
    gamma: f64,
) -> Result<HolderReport> {
    let (n, dirs) = (system.n(), system.directions());
    let mut constant: f64 = 0.0;
    let mut worst_pair = None;
    for (s1, s2) in pairs {
        system.check_state(s1)?;
        system.check_state(s2)?;
        let dist = s1.iter().zip(s2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist == 0.0 {
            return Err(Error::InvalidParameter(format!("coincident pair {s1:?}")));
        }
        let g1 = system.flux_jacobian(s1);
        let g2 = system.flux_jacobian(s2);
        for ia in 0..n * dirs {
            let diff = (0..n)
                .map(|j| (g1[ia * n + j] - g2[ia * n + j]).powi(2))
                .sum::<f64>()
                .sqrt();
            let q = diff / dist.powf(gamma);
            if q > constant {
                constant = q;
                worst_pair = Some((s1.clone(), s2.clone()));
            }
        }
    }
    Ok(HolderReport {
        gamma,
        constant,
        worst_pair,
    })
}

/// Compare analytic gradients of `G`, `Q` and `B` with central differences.
/// Errors are `|fd - exact| / max(1, |exact|)`: relative for large entries,
/// absolute near zero.
pub fn derivative_fd_check(system: &SystemSpec, states: &[Vec<f64>], step: f64) -> Result<FdReport> {
    let n = system.n();
    let scaled = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1.0);
    let mut report = FdReport {
        step,
        flux_error: 0.0,
        companion_error: 0.0,
        multiplier_error: 0.0,
    };
    for u in states {
        system.check_state(u)?;
        let dg = system.flux_jacobian(u);
        let dq = system.companion_gradient(u);
        let db = system.multiplier_gradient(u);
        for j in 0..n {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += step;
            dn[j] -= step;
            let (gp, gm) = (system.flux(&up), system.flux(&dn));
            for (k, (a, b)) in gp.iter().zip(&gm).enumerate() {
                let fd = (a - b) / (2.0 * step);
                report.flux_error = report.flux_error.max(scaled(fd, dg[k * n + j]));
            }
            let (qp, qm) = (system.companion(&up), system.companion(&dn));
            for (a_idx, (a, b)) in qp.iter().zip(&qm).enumerate() {
                let fd = (a - b) / (2.0 * step);
                report.companion_error = report.companion_error.max(scaled(fd, dq[a_idx * n + j]));
            }
            let (bp, bm) = (system.multipliers(&up), system.multipliers(&dn));
            for (i, (a, b)) in bp.iter().zip(&bm).enumerate() {
                let fd = (a - b) / (2.0 * step);
                report.multiplier_error = report.multiplier_error.max(scaled(fd, db[i * n + j]));
            }
        }
    }
    Ok(report)
}
