//! The three BAPC steps, the sliding-window variant and correction-window
//! scans.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correction::{fit_correction, CorrectionSpec};
use crate::error::{BapcError, Result};
use crate::models::{fit, fit_with_warm_starts, BaseModel, Family, FitConfig};
use crate::series::{TimeSeries, WindowConfig};

/// Everything needed to run BAPC on one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct BapcConfig {
    pub family: Family,
    pub correction: CorrectionSpec,
    pub window: WindowConfig,
    pub fit: FitConfig,
}

impl BapcConfig {
    pub fn new(family: Family, correction: CorrectionSpec, window: WindowConfig) -> Self {
        BapcConfig { family, correction, window, fit: FitConfig::default() }
    }

    pub fn with_correction_size(&self, r: usize) -> Result<Self> {
        Ok(BapcConfig { window: WindowConfig::new(self.window.train_size, r)?, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BapcResult {
    pub theta0: BaseModel,
    pub theta_r: BaseModel,
    /// `theta0 - theta_r`.
    pub delta_theta: Vec<f64>,
    /// `y_t - f_theta0(t)` over the training window.
    pub residuals: TimeSeries,
    /// Predicted residuals on the correction window, starting at
    /// `window.correction_start(start)`.
    pub correction: Vec<f64>,
    /// `y'`, equal to `y` outside the correction window.
    pub modified: TimeSeries,
    pub window: WindowConfig,
    /// Rows dropped by robust AR(2) estimation in steps 1 and 3.
    pub removed_step1: Vec<i64>,
    pub removed_step3: Vec<i64>,
    /// False when an iterative fit stopped at its iteration cap.
    pub converged: bool,
}

impl BapcResult {
    pub fn family(&self) -> Family {
        self.theta0.family()
    }

    /// `f_theta0(t) - f_theta_r(t)`.
    pub fn surrogate(&self, t: f64) -> Result<f64> {
        surrogate_correction(self, t)
    }

    pub fn correction_start(&self) -> i64 {
        self.window.correction_start(self.residuals.start_index())
    }
}

/// `x` shifted by a multiple of 2 pi into `(reference - pi, reference + pi]`.
fn nearest_branch(x: f64, reference: f64) -> f64 {
    let mut d = (x - reference).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    reference + d
}

/// Runs BAPC on a series whose length equals the training window.
pub fn bapc(series: &TimeSeries, config: &BapcConfig) -> Result<BapcResult> {
    let n = config.window.train_size;
    let r = config.window.correction_size;
    if series.len() != n {
        return Err(BapcError::Config(format!(
            "series has {} values but the training window is n={n}",
            series.len()
        )));
    }
    if r > n {
        return Err(BapcError::Config(format!("r={r} exceeds n={n}")));
    }

    // Step 1.
    let step1 = fit(config.family, series, &config.fit)?;
    let theta0 = step1.model;
    let residuals = series.with_values(
        series
            .iter()
            .map(|(t, y)| Ok(y - theta0.eval(t as f64)?))
            .collect::<Result<Vec<f64>>>()?,
    )?;

    if r == 0 {
        return Ok(BapcResult {
            theta_r: theta0.clone(),
            delta_theta: vec![0.0; theta0.params().len()],
            theta0,
            residuals,
            correction: Vec::new(),
            modified: series.clone(),
            window: config.window,
            removed_step1: step1.removed,
            removed_step3: Vec::new(),
            converged: step1.converged,
        });
    }

    // Step 2.
    let model = fit_correction(&config.correction, &residuals)?;

    // Step 3.
    let first = config.window.correction_start(series.start_index());
    let correction = (first..=series.end_index())
        .map(|t| model.predict(t, &residuals))
        .collect::<Result<Vec<f64>>>()?;
    let mut values = series.values().to_vec();
    let offset = n - r;
    for (v, c) in values[offset..].iter_mut().zip(&correction) {
        *v -= c;
    }
    let modified = series.with_values(values)?;
    let step3 = fit_with_warm_starts(config.family, &modified, &config.fit, &[&theta0])?;
    let mut theta_r_params = step3.model.params().to_vec();
    if let Some(k) = config.family.phase_index() {
        theta_r_params[k] = nearest_branch(theta_r_params[k], theta0.params()[k]);
    }
    let theta_r = BaseModel::new(config.family, theta_r_params)?;
    let delta_theta = theta0.params().iter().zip(theta_r.params()).map(|(a, b)| a - b).collect();

    Ok(BapcResult {
        theta0,
        theta_r,
        delta_theta,
        residuals,
        correction,
        modified,
        window: config.window,
        removed_step1: step1.removed,
        removed_step3: step3.removed,
        converged: step1.converged && step3.converged,
    })
}

/// The surrogate correction `f_theta0(t) - f_theta_r(t)`.
pub fn surrogate_correction(result: &BapcResult, t: f64) -> Result<f64> {
    Ok(result.theta0.eval(t)? - result.theta_r.eval(t)?)
}

/// BAPC on the window ending at anchor `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorResult {
    pub s: i64,
    pub outcome: std::result::Result<AnchorOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorOutcome {
    pub result: BapcResult,
    /// `Delta f^s(t)` for `t = s - n + 1, ..., s`.
    pub surrogate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbapcResult {
    pub window: WindowConfig,
    /// Ordered by anchor.
    pub anchors: Vec<AnchorResult>,
}

impl SbapcResult {
    /// `(s, t, Delta f^s(t))` for every successful anchor, ordered by `s`
    /// then `t`.
    pub fn surrogate_matrix(&self) -> Vec<(i64, i64, f64)> {
        let n = self.window.train_size as i64;
        self.anchors
            .iter()
            .filter_map(|a| a.outcome.as_ref().ok().map(|o| (a.s, o)))
            .flat_map(|(s, o)| o.surrogate.iter().enumerate().map(move |(i, v)| (s, s - n + 1 + i as i64, *v)))
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = (i64, &str)> {
        self.anchors.iter().filter_map(|a| a.outcome.as_ref().err().map(|e| (a.s, e.as_str())))
    }
}

fn run_anchor(series: &TimeSeries, s: i64, config: &BapcConfig) -> Result<AnchorOutcome> {
    let n = config.window.train_size as i64;
    let window = series.slice(s - n + 1, s)?;
    let result = bapc(&window, config)?;
    let surrogate = (s - n + 1..=s)
        .map(|t| surrogate_correction(&result, t as f64))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AnchorOutcome { result, surrogate })
}

/// Sequential BAPC: one run per anchor `s` on `y_{s-n+1}, ..., y_s`.
/// Anchors run in parallel; failures are recorded per anchor.
pub fn sbapc(series: &TimeSeries, config: &BapcConfig) -> Result<SbapcResult> {
    let n = config.window.train_size;
    if n > series.len() {
        return Err(BapcError::Config(format!(
            "training window n={n} longer than the series ({})",
            series.len()
        )));
    }
    let first = series.start_index() + n as i64 - 1;
    let anchors: Vec<i64> = (first..=series.end_index()).collect();
    let anchors = anchors
        .into_par_iter()
        .map(|s| AnchorResult { s, outcome: run_anchor(series, s, config).map_err(|e| e.to_string()) })
        .collect();
    Ok(SbapcResult { window: config.window, anchors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub r: usize,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    pub t_eval: i64,
    pub entries: Vec<ScanEntry>,
    /// Correction size maximising `|Delta f_r(t_eval)|`; the smallest such
    /// `r` on ties.
    pub argmax: Option<usize>,
}

/// Runs BAPC for every `r = 0..=n` and records `Delta f_r(t_eval)`. The
/// training window is the whole series; `config.window` is ignored.
pub fn window_scan(series: &TimeSeries, config: &BapcConfig, t_eval: i64) -> Result<WindowScan> {
    if !series.contains(t_eval) {
        return Err(BapcError::Range {
            first: t_eval,
            last: t_eval,
            start: series.start_index(),
            end: series.end_index(),
        });
    }
    let n = series.len();
    let entries: Vec<ScanEntry> = (0..=n)
        .into_par_iter()
        .map(|r| {
            let outcome = WindowConfig::new(n, r)
                .and_then(|window| bapc(series, &BapcConfig { window, ..config.clone() }))
                .and_then(|res| surrogate_correction(&res, t_eval as f64));
            match outcome {
                Ok(v) => ScanEntry { r, value: Some(v), error: None },
                Err(e) => ScanEntry { r, value: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let mut argmax: Option<(usize, f64)> = None;
    for e in &entries {
        if let Some(v) = e.value {
            if argmax.is_none_or(|(_, best)| v.abs() > best) {
                argmax = Some((e.r, v.abs()));
            }
        }
    }
    Ok(WindowScan { t_eval, entries, argmax: argmax.map(|a| a.0) })
}
