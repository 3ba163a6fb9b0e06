//! Least-squares fitting of base models.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ar2::fit_ar2_robust_params;
use super::{BaseModel, Family};
use crate::error::{BapcError, Result};
use crate::numerics::lm::levenberg_marquardt;
use crate::numerics::lstsq;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative parameter change that ends a local minimisation.
    pub tolerance: f64,
    /// Frequency starts for the damped sinusoid. `None` uses 16 values
    /// log-spaced in `[2 pi / n, pi]`.
    pub frequency_grid: Option<Vec<f64>>,
    /// Outlier removal for AR(2) coefficient estimation.
    pub robust: bool,
    /// MAD multiplier of the outlier rule.
    pub robust_k: f64,
    pub robust_max_rounds: usize,
    /// Recorded for reproducibility; the built-in fitters are deterministic.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 500,
            tolerance: 1e-12,
            frequency_grid: None,
            robust: true,
            robust_k: 3.0,
            robust_max_rounds: 10,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(BapcError::Config("fit tolerance must be positive".into()));
        }
        if !(self.robust_k > 0.0) {
            return Err(BapcError::Config("robust_k must be positive".into()));
        }
        if let Some(grid) = &self.frequency_grid {
            if grid.is_empty() || grid.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(BapcError::Config(
                    "frequency grid must be non-empty with positive entries".into(),
                ));
            }
        }
        Ok(())
    }

    fn grid_for(&self, n: usize) -> Vec<f64> {
        match &self.frequency_grid {
            Some(g) => g.clone(),
            None => {
                let lo = (TAU / n as f64).min(PI).ln();
                let hi = PI.ln();
                (0..16).map(|i| (lo + (hi - lo) * i as f64 / 15.0).exp()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: BaseModel,
    pub sse: f64,
    /// False when the local optimiser hit its iteration cap; the model is
    /// then the best point found.
    pub converged: bool,
    /// Rows dropped by robust AR(2) estimation (target indices).
    pub removed: Vec<i64>,
}

pub fn fit(family: Family, series: &TimeSeries, config: &FitConfig) -> Result<FitOutcome> {
    fit_with_warm_starts(family, series, config, &[])
}

/// Like [`fit`], adding `warm` parameter vectors to the multi-start set of
/// the iterative fitters.
pub fn fit_with_warm_starts(
    family: Family,
    series: &TimeSeries,
    config: &FitConfig,
    warm: &[&BaseModel],
) -> Result<FitOutcome> {
    config.validate()?;
    let n = series.len();
    if n < family.n_params() {
        return Err(BapcError::Fit(format!(
            "{} needs at least {} values, got {n}",
            family.name(),
            family.n_params()
        )));
    }
    match family {
        Family::Ar2 => {
            let robust = fit_ar2_robust_params(series, config.robust_k, config.robust_max_rounds, config.robust)?;
            let p = robust.params;
            let model = BaseModel::new(family, vec![p.y1, p.y2, p.phi1, p.phi2])?;
            let sse = sse_of(&model, series)?;
            Ok(FitOutcome { model, sse, converged: robust.converged, removed: robust.removed })
        }
        Family::DampedSinusoid => fit_damped(series, config, warm),
        _ => fit_linear(family, series),
    }
}

/// Robust AR(2) fit regardless of `config.robust`.
pub fn fit_ar2_robust(series: &TimeSeries, config: &FitConfig) -> Result<(BaseModel, Vec<i64>)> {
    config.validate()?;
    let r = fit_ar2_robust_params(series, config.robust_k, config.robust_max_rounds, true)?;
    let p = r.params;
    Ok((BaseModel::new(Family::Ar2, vec![p.y1, p.y2, p.phi1, p.phi2])?, r.removed))
}

fn sse_of(model: &BaseModel, series: &TimeSeries) -> Result<f64> {
    let mut acc = crate::numerics::NeumaierSum::new();
    for (t, y) in series.iter() {
        let e = y - model.eval(t as f64)?;
        acc.add(e * e);
    }
    Ok(acc.value())
}

/// Families that are linear after reparametrising `alpha cos(x + phi)` as
/// `A cos x + B sin x`.
fn fit_linear(family: Family, series: &TimeSeries) -> Result<FitOutcome> {
    let n = series.len();
    let ts: Vec<f64> = series.indices().map(|t| t as f64).collect();
    let y = DVector::from_column_slice(series.values());
    let columns: Vec<Box<dyn Fn(f64) -> f64>> = match family {
        Family::Constant => vec![Box::new(|_| 1.0)],
        Family::Linear => vec![Box::new(|_| 1.0), Box::new(|t| t)],
        Family::PolySeasonal { period } => vec![
            Box::new(|_| 1.0),
            Box::new(|t| t),
            Box::new(|t| t * t),
            Box::new(move |t| (TAU * t / period).cos()),
            Box::new(move |t| (TAU * t / period).sin()),
        ],
        Family::Sinusoid { period } => vec![
            Box::new(move |t| (TAU * t / period).cos()),
            Box::new(move |t| (TAU * t / period).sin()),
        ],
        Family::DampedSinusoid | Family::Ar2 => unreachable!("iterative families"),
    };
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j](ts[i]));
    let coef = lstsq(&x, &y)?;
    let params = match family {
        Family::PolySeasonal { .. } => {
            let (alpha, phi) = amplitude_phase(coef[3], coef[4]);
            vec![coef[0], coef[1], coef[2], alpha, phi]
        }
        Family::Sinusoid { .. } => {
            let (alpha, phi) = amplitude_phase(coef[0], coef[1]);
            vec![alpha, phi]
        }
        _ => coef.iter().copied().collect(),
    };
    let model = BaseModel::new(family, params)?;
    let sse = sse_of(&model, series)?;
    Ok(FitOutcome { model, sse, converged: true, removed: Vec::new() })
}

/// `A cos x + B sin x = alpha cos(x + phi)` with `alpha >= 0`, `phi` in `[0, 2 pi)`.
fn amplitude_phase(a: f64, b: f64) -> (f64, f64) {
    (a.hypot(b), wrap_phase((-b).atan2(a)))
}

pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Canonical representative: `alpha > 0`, `omega` in `(0, pi]`, `phi` in
/// `[0, 2 pi)`. The frequency fold relies on integer sample times.
fn canonical_damped(mut p: [f64; 4]) -> [f64; 4] {
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[3] += PI;
    }
    p[2] = p[2].rem_euclid(TAU);
    if p[2] > PI {
        p[2] = TAU - p[2];
        p[3] = -p[3];
    }
    p[3] = wrap_phase(p[3]);
    p
}

fn fit_damped(series: &TimeSeries, config: &FitConfig, warm: &[&BaseModel]) -> Result<FitOutcome> {
    let ts: Vec<f64> = series.indices().map(|t| t as f64).collect();
    let ys = series.values();
    let n = ts.len();

    let residuals = |p: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 4);
        for i in 0..n {
            let t = ts[i];
            let decay = (-p[1] * t).exp();
            let (s, c) = (p[2] * t + p[3]).sin_cos();
            let f = p[0] * decay * c;
            let ds = -p[0] * decay * s;
            r[i] = f - ys[i];
            j[(i, 0)] = decay * c;
            j[(i, 1)] = -t * f;
            j[(i, 2)] = t * ds;
            j[(i, 3)] = ds;
        }
        (r, j)
    };

    let mut starts: Vec<[f64; 4]> = Vec::new();
    for omega in config.grid_for(n) {
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                (omega * ts[i]).cos()
            } else {
                (omega * ts[i]).sin()
            }
        });
        let Ok(coef) = lstsq(&x, &DVector::from_column_slice(ys)) else {
            continue;
        };
        let (alpha, phi) = amplitude_phase(coef[0], coef[1]);
        if alpha > 0.0 {
            starts.push([alpha, 0.0, omega, phi]);
        }
    }
    for m in warm {
        if m.family() == Family::DampedSinusoid {
            let p = m.params();
            starts.push([p[0], p[1], p[2], p[3]]);
        }
    }
    if starts.is_empty() {
        return Err(BapcError::Fit("no usable damped-sinusoid starting point".into()));
    }

    let mut best: Option<([f64; 4], f64, bool)> = None;
    for start in starts {
        let report = levenberg_marquardt(&start, config.max_iterations, config.tolerance, residuals);
        if !report.sse.is_finite() || report.params.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let p = canonical_damped([report.params[0], report.params[1], report.params[2], report.params[3]]);
        if best.as_ref().is_none_or(|b| report.sse < b.1) {
            best = Some((p, report.sse, report.converged));
        }
    }
    let (p, sse, converged) =
        best.ok_or_else(|| BapcError::Fit("every damped-sinusoid start diverged".into()))?;
    if p[0] == 0.0 || p[2] == 0.0 {
        return Err(BapcError::Fit("damped-sinusoid fit degenerated to zero amplitude or frequency".into()));
    }
    Ok(FitOutcome {
        model: BaseModel::new(Family::DampedSinusoid, p.to_vec())?,
        sse,
        converged,
        removed: Vec::new(),
    })
}
