//! Integrated-gradient attribution of the surrogate correction
//! `f_theta0(t) - f_theta_r(t)` to the individual parameters, integrating
//! along the segment from `theta_r` to `theta0`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::SbapcResult;
use crate::error::{BapcError, Result};
use crate::models::ar2::{ar2_closed_form, CLOSED_FORM_MAX_T};
use crate::models::{eval_params, gradient_params, Ar2Params, BaseModel, Family};
use crate::numerics::{binomial_dd, DoubleDouble, GaussLegendre, NeumaierSum};

/// Default Gauss-Legendre node count.
pub const DEFAULT_NODES: usize = 64;

/// Below this modulus of the exponent increment the exponential closed form
/// hands over to quadrature.
pub const DEGENERATE_EXPONENT: f64 = 1e-9;

/// Tolerance of the completeness identity, scaled by `1 + |Delta f|`.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IgMethod {
    Linear,
    ExponentialClosedForm,
    Ar2ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub t: f64,
    pub anchor: Option<i64>,
    /// `f_theta0(t) - f_theta_r(t)`.
    pub surrogate: f64,
    /// `|sum_k IG_k - surrogate|`.
    pub completeness_residual: f64,
    pub method: IgMethod,
    /// For quadrature: largest change of a component when the node count
    /// is doubled.
    pub error_estimate: Option<f64>,
}

impl Attribution {
    fn build(names: Vec<String>, values: Vec<f64>, t: f64, surrogate: f64, method: IgMethod) -> Self {
        let total: f64 = values.iter().copied().collect::<NeumaierSum>().value();
        Attribution {
            names,
            values,
            t,
            anchor: None,
            surrogate,
            completeness_residual: (total - surrogate).abs(),
            method,
            error_estimate: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn is_complete(&self) -> bool {
        self.completeness_residual <= COMPLETENESS_TOLERANCE * (1.0 + self.surrogate.abs())
    }
}

/// A point `a + h (b - a)` on the straight path between parameter vectors.
pub fn segment_point(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + h * (y - x)).collect()
}

fn names_of(family: Family) -> Vec<String> {
    family.param_names().iter().map(|s| s.to_string()).collect()
}

fn check_pair(theta0: &BaseModel, theta_r: &BaseModel) -> Result<Family> {
    if theta0.family() != theta_r.family() {
        return Err(BapcError::Config(format!(
            "parameter endpoints belong to different families ({} and {})",
            theta0.family(),
            theta_r.family()
        )));
    }
    Ok(theta0.family())
}

fn delta(theta0: &BaseModel, theta_r: &BaseModel) -> Vec<f64> {
    theta0.params().iter().zip(theta_r.params()).map(|(a, b)| a - b).collect()
}

/// `IG_k = Delta theta_k g_k(t)` for models linear in their parameters.
pub fn ig_linear(delta_theta: &[f64], basis: &[f64], t: f64) -> Result<Attribution> {
    if delta_theta.len() != basis.len() {
        return Err(BapcError::Config("parameter and basis lengths differ".into()));
    }
    if basis.iter().any(|g| !g.is_finite()) {
        return Err(BapcError::Numerical("non-finite basis value".into()));
    }
    let values: Vec<f64> = delta_theta.iter().zip(basis).map(|(d, g)| d * g).collect();
    let surrogate = values.iter().copied().collect::<NeumaierSum>().value();
    let names = (1..=values.len()).map(|k| format!("theta{k}")).collect();
    Ok(Attribution::build(names, values, t, surrogate, IgMethod::Linear))
}

/// `sum_k d^k / (k + offset)!` for small `|d|`.
fn exp_series(d: Complex64, offset: u32) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    for j in 1..=offset {
        term /= j as f64;
    }
    let mut acc = term;
    for k in 1..30 {
        term = term * d / (k + offset) as f64;
        acc += term;
        if term.norm() <= 1e-18 * acc.norm() {
            break;
        }
    }
    acc
}

/// `e^d - 1` without cancellation in the real part.
fn expm1_complex(d: Complex64) -> Complex64 {
    let (s, c) = d.im.sin_cos();
    let half = (0.5 * d.im).sin();
    Complex64::new(d.re.exp_m1() * c - 2.0 * half * half, d.re.exp() * s)
}

/// `E1(d) = (e^d - 1) / d` and `E2(d) = (e^d - 1 - d) / d^2`.
fn exp_kernels(d: Complex64) -> (Complex64, Complex64) {
    if d.norm() < 0.1 {
        (exp_series(d, 1), exp_series(d, 2))
    } else {
        let em1 = expm1_complex(d);
        (em1 / d, (em1 - d) / (d * d))
    }
}

/// Closed form for `f = Re(alpha exp(mu . y))` along the straight path.
/// `log_r` is `mu . y` at `theta_r` (including any fixed offset) and
/// `increments[k] = mu_k Delta y_k`. Returns `None` when the exponent
/// increment is too small for the quotient form.
fn exponential_family_ig(
    alpha0: f64,
    delta_alpha: f64,
    log_r: Complex64,
    increments: &[Complex64],
) -> Option<(f64, Vec<f64>)> {
    let d: Complex64 = increments.iter().sum();
    if d.norm() < DEGENERATE_EXPONENT {
        return None;
    }
    let (e1, e2) = exp_kernels(d);
    let base = log_r.exp();
    let ig_alpha = (base * e1 * delta_alpha).re;
    let shared = base * (e1 * alpha0 - e2 * delta_alpha);
    Some((ig_alpha, increments.iter().map(|m| (m * shared).re).collect()))
}

/// Closed form for `alpha exp(-beta t) cos(omega t + phi)`; falls back to
/// quadrature when the exponent increment `-Delta beta t + i (Delta omega t
/// + Delta phi)` is below [`DEGENERATE_EXPONENT`] in modulus.
pub fn ig_damped_sinusoid(theta0: &BaseModel, theta_r: &BaseModel, t: f64) -> Result<Attribution> {
    let family = check_pair(theta0, theta_r)?;
    if family != Family::DampedSinusoid {
        return Err(BapcError::Config(format!("expected a damped sinusoid, got {family}")));
    }
    if !t.is_finite() {
        return Err(BapcError::Domain("evaluation time must be finite".into()));
    }
    let (p0, pr) = (theta0.params(), theta_r.params());
    let mu = [Complex64::new(-t, 0.0), Complex64::new(0.0, t), Complex64::i()];
    let log_r = mu[0] * pr[1] + mu[1] * pr[2] + mu[2] * pr[3];
    let increments: Vec<Complex64> = (0..3).map(|k| mu[k] * (p0[k + 1] - pr[k + 1])).collect();
    match exponential_family_ig(p0[0], p0[0] - pr[0], log_r, &increments) {
        Some((ig_alpha, rest)) => {
            let mut values = vec![ig_alpha];
            values.extend(rest);
            let surrogate = theta0.eval(t)? - theta_r.eval(t)?;
            Ok(Attribution::build(names_of(family), values, t, surrogate, IgMethod::ExponentialClosedForm))
        }
        None => ig_quadrature(theta0, theta_r, t, DEFAULT_NODES),
    }
}

/// Closed form for the seasonal families: the polynomial part is linear and
/// `alpha cos(2 pi t / P + phi)` is exponential in `i phi`.
fn ig_seasonal(theta0: &BaseModel, theta_r: &BaseModel, t: f64) -> Result<Attribution> {
    let family = theta0.family();
    let period = family.period().expect("seasonal family");
    let (p0, pr) = (theta0.params(), theta_r.params());
    let lin = p0.len() - 2;
    let angle = TAU * t / period;
    let log_r = Complex64::new(0.0, angle + pr[lin + 1]);
    let increments = [Complex64::new(0.0, p0[lin + 1] - pr[lin + 1])];
    let Some((ig_alpha, ig_phi)) = exponential_family_ig(p0[lin], p0[lin] - pr[lin], log_r, &increments) else {
        return ig_quadrature(theta0, theta_r, t, DEFAULT_NODES);
    };
    let mut values: Vec<f64> = (0..lin).map(|k| (p0[k] - pr[k]) * t.powi(k as i32)).collect();
    values.push(ig_alpha);
    values.push(ig_phi[0]);
    let surrogate = theta0.eval(t)? - theta_r.eval(t)?;
    Ok(Attribution::build(names_of(family), values, t, surrogate, IgMethod::ExponentialClosedForm))
}

/// Path integral of the monomial `g1^a g2^b` with `g_i(h) = r_i + h d_i`:
/// `sum_{j,k} C(a,j) C(b,k) r1^(a-j) d1^j r2^(b-k) d2^k / (j + k + 1)`.
struct MonomialIntegrals {
    r1: Vec<DoubleDouble>,
    d1: Vec<DoubleDouble>,
    r2: Vec<DoubleDouble>,
    d2: Vec<DoubleDouble>,
}

impl MonomialIntegrals {
    fn new(r: (f64, f64), d: (f64, f64), max: usize) -> Self {
        MonomialIntegrals {
            r1: DoubleDouble::from(r.0).powers(max),
            d1: DoubleDouble::from(d.0).powers(max),
            r2: DoubleDouble::from(r.1).powers(max),
            d2: DoubleDouble::from(d.1).powers(max),
        }
    }

    fn gamma(&self, a: usize, b: usize) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for j in 0..=a {
            let left = binomial_dd(a, j) * self.r1[a - j] * self.d1[j];
            for k in 0..=b {
                let right = binomial_dd(b, k) * self.r2[b - k] * self.d2[k];
                acc += left * right / DoubleDouble::from((j + k + 1) as f64);
            }
        }
        acc
    }

    /// `int_0^1 d/dphi1 [phi2^e Phi(m)] dh` along the path.
    fn d_phi1(&self, m: usize, e: usize) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for k in 0..=m / 2 {
            let power = m - 2 * k;
            if power > 0 {
                acc += binomial_dd(m - k, k) * (power as f64) * self.gamma(power - 1, k + e);
            }
        }
        acc
    }

    /// `int_0^1 d/dphi2 [phi2^e Phi(m)] dh` along the path.
    fn d_phi2(&self, m: usize, e: usize) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for k in 0..=m / 2 {
            if k + e > 0 {
                acc += binomial_dd(m - k, k) * ((k + e) as f64) * self.gamma(m - 2 * k, k + e - 1);
            }
        }
        acc
    }
}

/// Closed-form integrated gradients `(IG_phi1, IG_phi2)` of the AR(2)
/// sequence with fixed initial values, for `1 <= t <= 60`.
pub fn ig_ar2(
    theta0: (f64, f64),
    theta_r: (f64, f64),
    y1: f64,
    y2: f64,
    t: i64,
) -> Result<Attribution> {
    if t < 1 {
        return Err(BapcError::Domain(format!("AR(2) index must be >= 1, got {t}")));
    }
    if t > CLOSED_FORM_MAX_T {
        return Err(BapcError::Precision { t, max: CLOSED_FORM_MAX_T });
    }
    let at = |phi: (f64, f64)| Ar2Params { y1, y2, phi1: phi.0, phi2: phi.1 };
    let surrogate = ar2_closed_form(&at(theta0), t)? - ar2_closed_form(&at(theta_r), t)?;
    let names = vec!["phi1".to_string(), "phi2".to_string()];
    if t <= 2 {
        return Ok(Attribution::build(names, vec![0.0, 0.0], t as f64, surrogate, IgMethod::Ar2ClosedForm));
    }
    let d = (theta0.0 - theta_r.0, theta0.1 - theta_r.1);
    let tu = t as usize;
    let paths = MonomialIntegrals::new(theta_r, d, tu);
    let (a, b) = (tu - 2, tu - 3);
    let ig1 = (paths.d_phi1(a, 0) * y2 + paths.d_phi1(b, 1) * y1) * d.0;
    let ig2 = (paths.d_phi2(a, 0) * y2 + paths.d_phi2(b, 1) * y1) * d.1;
    let values = vec![ig1.to_f64(), ig2.to_f64()];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BapcError::Numerical(format!("AR(2) attribution overflowed at t={t}")));
    }
    Ok(Attribution::build(names, values, t as f64, surrogate, IgMethod::Ar2ClosedForm))
}

fn quadrature_values(family: Family, a: &[f64], b: &[f64], t: f64, nodes: usize) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(nodes);
    let integrals = rule.integrate_vec(a.len(), |h, out| {
        let point = segment_point(a, b, h);
        gradient_params(family, &point, t, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(BapcError::Numerical(format!("non-finite integrand at h={h}, t={t}")));
        }
        Ok(())
    })?;
    Ok(integrals.iter().zip(a.iter().zip(b)).map(|(i, (x, y))| (y - x) * i).collect())
}

/// Gauss-Legendre evaluation of `IG_k = Delta theta_k int_0^1 df/dtheta_k dh`
/// with `nodes` points; the rule is re-run with `2 nodes` to estimate the
/// error.
pub fn ig_quadrature(theta0: &BaseModel, theta_r: &BaseModel, t: f64, nodes: usize) -> Result<Attribution> {
    let family = check_pair(theta0, theta_r)?;
    if nodes == 0 {
        return Err(BapcError::Config("quadrature needs at least one node".into()));
    }
    let (a, b) = (theta_r.params(), theta0.params());
    let values = quadrature_values(family, a, b, t, nodes)?;
    let refined = quadrature_values(family, a, b, t, 2 * nodes)?;
    let estimate = values.iter().zip(&refined).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let surrogate = eval_params(family, b, t)? - eval_params(family, a, t)?;
    let mut out = Attribution::build(names_of(family), values, t, surrogate, IgMethod::Quadrature);
    out.error_estimate = Some(estimate);
    Ok(out)
}

/// Integrated gradients at `t` using the closed form available for the
/// family, or quadrature otherwise.
pub fn integrated_gradients(theta0: &BaseModel, theta_r: &BaseModel, t: f64) -> Result<Attribution> {
    let family = check_pair(theta0, theta_r)?;
    match family {
        Family::Constant | Family::Linear => {
            let basis = theta0.gradient(t)?;
            let mut out = ig_linear(&delta(theta0, theta_r), &basis, t)?;
            out.names = names_of(family);
            Ok(out)
        }
        Family::PolySeasonal { .. } | Family::Sinusoid { .. } => ig_seasonal(theta0, theta_r, t),
        Family::DampedSinusoid => ig_damped_sinusoid(theta0, theta_r, t),
        Family::Ar2 => {
            let (p0, pr) = (theta0.params(), theta_r.params());
            let ti = t as i64;
            if p0[..2] == pr[..2] && t.fract() == 0.0 && (1..=CLOSED_FORM_MAX_T).contains(&ti) {
                let inner = ig_ar2((p0[2], p0[3]), (pr[2], pr[3]), p0[0], p0[1], ti)?;
                let values = vec![0.0, 0.0, inner.values[0], inner.values[1]];
                Ok(Attribution::build(names_of(family), values, t, inner.surrogate, IgMethod::Ar2ClosedForm))
            } else {
                // The integrand is a polynomial of degree below t in h.
                let nodes = DEFAULT_NODES.max((t.max(0.0) as usize) / 2 + 2);
                ig_quadrature(theta0, theta_r, t, nodes)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub s: i64,
    pub t: i64,
    pub values: Vec<f64>,
    pub surrogate: f64,
    pub completeness_residual: f64,
}

/// `(s, t, error)` of a cell whose attribution failed.
pub type CellFailure = (i64, i64, String);

/// Per-parameter attributions for every `(s, t)` of a sequential run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmaps {
    pub names: Vec<String>,
    /// Ordered by `s`, then `t`.
    pub cells: Vec<HeatmapCell>,
    pub failures: Vec<CellFailure>,
}

impl Heatmaps {
    /// `(s, t, IG_k)` for parameter `k`.
    pub fn matrix(&self, k: usize) -> Vec<(i64, i64, f64)> {
        self.cells.iter().map(|c| (c.s, c.t, c.values[k])).collect()
    }

    pub fn max_scaled_residual(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.completeness_residual / (1.0 + c.surrogate.abs()))
            .fold(0.0, f64::max)
    }
}

pub fn ig_heatmaps(sweep: &SbapcResult, family: Family) -> Heatmaps {
    let n = sweep.window.train_size as i64;
    let per_anchor: Vec<(Vec<HeatmapCell>, Vec<CellFailure>)> = sweep
        .anchors
        .par_iter()
        .map(|a| {
            let mut cells = Vec::new();
            let mut failures = Vec::new();
            match &a.outcome {
                Err(e) => failures.extend((a.s - n + 1..=a.s).map(|t| (a.s, t, e.clone()))),
                Ok(o) => {
                    for t in a.s - n + 1..=a.s {
                        match integrated_gradients(&o.result.theta0, &o.result.theta_r, t as f64) {
                            Ok(att) => cells.push(HeatmapCell {
                                s: a.s,
                                t,
                                values: att.values,
                                surrogate: att.surrogate,
                                completeness_residual: att.completeness_residual,
                            }),
                            Err(e) => failures.push((a.s, t, e.to_string())),
                        }
                    }
                }
            }
            (cells, failures)
        })
        .collect();
    let mut out = Heatmaps { names: names_of(family), cells: Vec::new(), failures: Vec::new() };
    for (cells, failures) in per_anchor {
        out.cells.extend(cells);
        out.failures.extend(failures);
    }
    out
}
