use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through `(log eps, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `log value` on `log eps` over pairs with a
/// positive value. Needs at least three such pairs.
pub fn fit_loglog_exponent(pairs: &[(f64, f64)]) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(e, v)| *e > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all epsilons coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Exponents and kernel used for a sweep, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ScalingParams {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub gamma: Option<f64>,
    pub kernel_profile: Option<String>,
}

/// A quantity measured over a sequence of mollification scales, optionally
/// paired with a theoretical bound.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub quantity_name: String,
    /// `(eps, value)` sorted by `eps` descending.
    pub pairs: Vec<(f64, f64)>,
    pub bounds: Option<Vec<f64>>,
    pub ratios: Option<Vec<f64>>,
    pub fitted_slope: Option<f64>,
    pub fitted_intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// Log-log slope of `value / bound`.
    pub ratio_slope: Option<f64>,
    /// Set when every value vanishes to rounding; slopes are then undefined.
    pub degenerate: Option<String>,
    /// Signed measurements when `value` is a magnitude.
    pub signed_values: Option<Vec<f64>>,
    pub region: String,
    pub parameters: ScalingParams,
    pub notes: Vec<String>,
}

impl ScalingReport {
    /// Assemble a report. `scale` sets the rounding floor: values at or below
    /// `1e-12 * scale` count as zero.
    pub fn build(
        quantity_name: impl Into<String>,
        mut pairs: Vec<(f64, f64)>,
        bounds: Option<Vec<f64>>,
        scale: f64,
        region: String,
        parameters: ScalingParams,
    ) -> Result<Self> {
        if let Some(b) = &bounds {
            if b.len() != pairs.len() {
                return Err(Error::DimensionMismatch("one bound per epsilon required".into()));
            }
        }
        if let Some(bad) = pairs.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "value at eps = {} must be finite and non-negative, got {}",
                bad.0, bad.1
            )));
        }
        // sort jointly by eps descending
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| pairs[b].0.total_cmp(&pairs[a].0));
        let bounds = bounds.map(|b| order.iter().map(|&k| b[k]).collect::<Vec<f64>>());
        pairs = order.iter().map(|&k| pairs[k]).collect();

        let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let degenerate = pairs
            .iter()
            .all(|(_, v)| *v <= floor)
            .then(|| "degenerate: identically zero".to_string());
        let mut notes = Vec::new();
        let ratios = bounds.as_ref().map(|b| {
            pairs
                .iter()
                .zip(b)
                .map(|((_, v), bd)| if *bd > 0.0 { v / bd } else if *v <= floor { 0.0 } else { f64::INFINITY })
                .collect::<Vec<f64>>()
        });
        let (mut fitted_slope, mut fitted_intercept, mut r_squared, mut ratio_slope) = (None, None, None, None);
        if degenerate.is_none() {
            let positive: Vec<(f64, f64)> = pairs.iter().copied().filter(|(_, v)| *v > floor).collect();
            match fit_loglog_exponent(&positive) {
                Ok(fit) => {
                    fitted_slope = Some(fit.slope);
                    fitted_intercept = Some(fit.intercept);
                    r_squared = Some(fit.r_squared);
                }
                Err(_) => notes.push("fewer than three non-zero values; no fit".into()),
            }
            if let Some(r) = &ratios {
                let rp: Vec<(f64, f64)> = pairs
                    .iter()
                    .zip(r)
                    .filter(|((_, v), q)| *v > floor && q.is_finite())
                    .map(|((e, _), q)| (*e, *q))
                    .collect();
                if let Ok(fit) = fit_loglog_exponent(&rp) {
                    ratio_slope = Some(fit.slope);
                }
            }
        }
        Ok(Self {
            quantity_name: quantity_name.into(),
            pairs,
            bounds,
            ratios,
            fitted_slope,
            fitted_intercept,
            r_squared,
            ratio_slope,
            degenerate,
            signed_values: None,
            region,
            parameters,
            notes,
        })
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    /// The bound does not degrade as `eps` shrinks: the ratio slope is at
    /// least `-tolerance`. Degenerate reports pass trivially.
    pub fn bound_holds(&self, tolerance: f64) -> bool {
        if self.is_degenerate() {
            return true;
        }
        self.ratio_slope.is_some_and(|s| s >= -tolerance)
    }

    /// Largest `ratio / ratio at the largest eps`: the two-sided check that
    /// the value stays within a multiple of the bound with the constant
    /// fitted at the coarsest scale.
    pub fn max_relative_ratio(&self) -> Option<f64> {
        let r = self.ratios.as_ref()?;
        let first = *r.first()?;
        if !(first > 0.0) {
            return None;
        }
        Some(r.iter().fold(0.0f64, |m, v| m.max(v / first)))
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// CSV with the fixed columns `epsilon,value,bound,ratio` (empty cells
    /// when no bound applies).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "value", "bound", "ratio"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for (k, (e, v)) in self.pairs.iter().enumerate() {
            let b = self.bounds.as_ref().map(|b| format!("{:e}", b[k])).unwrap_or_default();
            let r = self.ratios.as_ref().map(|r| format!("{:e}", r[k])).unwrap_or_default();
            w.write_record([format!("{e:e}"), format!("{v:e}"), b, r])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
