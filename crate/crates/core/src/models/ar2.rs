//! Deterministic AR(2) sequences: the combinatorial closed form, its
//! parameter derivatives, the equivalence with damped sinusoids, and robust
//! least-squares estimation of the coefficients.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BapcError, Result};
use crate::numerics::{binomial_dd, lstsq, DoubleDouble};
use crate::series::TimeSeries;

/// Largest `t` for which the binomial closed forms are used. Beyond it the
/// evaluation falls back to the recursion.
pub const CLOSED_FORM_MAX_T: i64 = 60;

/// Largest argument for which the double-width binomial sum is exact in its
/// coefficients.
const DD_SUM_MAX: usize = 104;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar2Params {
    pub y1: f64,
    pub y2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidParams {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub phi: f64,
}

/// Accumulation mode for the binomial sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumPrecision {
    /// f64 terms with Neumaier compensation.
    Compensated,
    /// Terms and accumulator in double-double.
    #[default]
    DoubleWidth,
}

/// `Phi(t) = sum_k C(t-k, k) phi1^(t-2k) phi2^k` in double-double.
pub(crate) fn phi_dd(t: usize, phi1: f64, phi2: f64) -> DoubleDouble {
    if t > DD_SUM_MAX {
        return phi_recursion_dd(t, phi1, phi2);
    }
    let p1 = DoubleDouble::from(phi1).powers(t);
    let p2 = DoubleDouble::from(phi2).powers(t / 2);
    (0..=t / 2)
        .map(|k| binomial_dd(t - k, k) * p1[t - 2 * k] * p2[k])
        .sum()
}

fn phi_recursion_dd(t: usize, phi1: f64, phi2: f64) -> DoubleDouble {
    // Phi(0) = 1, Phi(1) = phi1, Phi(t) = phi1 Phi(t-1) + phi2 Phi(t-2).
    let (a, b) = (DoubleDouble::from(phi1), DoubleDouble::from(phi2));
    let mut prev = DoubleDouble::ONE;
    let mut cur = a;
    if t == 0 {
        return prev;
    }
    for _ in 1..t {
        let next = a * cur + b * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn phi_compensated(t: usize, phi1: f64, phi2: f64) -> f64 {
    use crate::numerics::NeumaierSum;
    let mut acc = NeumaierSum::new();
    for k in 0..=t / 2 {
        let c = crate::numerics::binomial(t - k, k) as f64;
        acc.add(c * phi1.powi((t - 2 * k) as i32) * phi2.powi(k as i32));
    }
    acc.value()
}

/// The combinatorial sum `Phi(t, (phi1, phi2))` with `Phi(0) = 1`,
/// `Phi(1) = phi1`, `Phi(2) = phi1^2 + phi2`.
pub fn phi(t: usize, phi1: f64, phi2: f64) -> f64 {
    phi_dd(t, phi1, phi2).to_f64()
}

pub fn phi_with(t: usize, phi1: f64, phi2: f64, precision: SumPrecision) -> f64 {
    match precision {
        SumPrecision::Compensated if t <= 128 => phi_compensated(t, phi1, phi2),
        _ => phi(t, phi1, phi2),
    }
}

/// `(dPhi/dphi1, dPhi/dphi2)` at `t`, differentiating the sum termwise.
pub(crate) fn phi_partials_dd(t: usize, phi1: f64, phi2: f64) -> (DoubleDouble, DoubleDouble) {
    if t == 0 {
        return (DoubleDouble::ZERO, DoubleDouble::ZERO);
    }
    let p1 = DoubleDouble::from(phi1).powers(t);
    let p2 = DoubleDouble::from(phi2).powers(t / 2);
    let mut d1 = DoubleDouble::ZERO;
    let mut d2 = DoubleDouble::ZERO;
    for k in 0..=t / 2 {
        let c = binomial_dd(t - k, k);
        let m = t - 2 * k;
        if m > 0 {
            d1 += c * (m as f64) * p1[m - 1] * p2[k];
        }
        if k > 0 {
            d2 += c * (k as f64) * p1[m] * p2[k - 1];
        }
    }
    (d1, d2)
}

/// The coefficient functions `(Phi_1(t), Phi_2(t))` with
/// `y_t = Phi_1(t) y2 + Phi_2(t) y1`.
pub fn closed_form_coefficients(t: i64, phi1: f64, phi2: f64) -> (f64, f64) {
    match t {
        1 => (0.0, 1.0),
        2 => (1.0, 0.0),
        _ => {
            let t = t as usize;
            let c1 = phi_dd(t - 2, phi1, phi2);
            let c2 = phi_dd(t - 3, phi1, phi2) * phi2;
            (c1.to_f64(), c2.to_f64())
        }
    }
}

/// Closed-form value of the AR(2) sequence at `t >= 1`.
pub fn ar2_closed_form(p: &Ar2Params, t: i64) -> Result<f64> {
    if t < 1 {
        return Err(BapcError::Domain(format!("AR(2) index must be >= 1, got {t}")));
    }
    Ok(match t {
        1 => p.y1,
        2 => p.y2,
        _ => {
            let tu = t as usize;
            let c1 = phi_dd(tu - 2, p.phi1, p.phi2);
            let c2 = phi_dd(tu - 3, p.phi1, p.phi2) * p.phi2;
            (c1 * p.y2 + c2 * p.y1).to_f64()
        }
    })
}

/// Unrolls the recursion up to `t` and returns `y_t`.
pub fn ar2_recursion(p: &Ar2Params, t: i64) -> Result<f64> {
    if t < 1 {
        return Err(BapcError::Domain(format!("AR(2) index must be >= 1, got {t}")));
    }
    let (mut prev, mut cur) = (p.y1, p.y2);
    if t == 1 {
        return Ok(prev);
    }
    for _ in 2..t {
        let next = p.phi1 * cur + p.phi2 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Value at `t`: closed form up to [`CLOSED_FORM_MAX_T`], recursion beyond.
pub fn ar2_value(p: &Ar2Params, t: i64) -> Result<f64> {
    if t <= CLOSED_FORM_MAX_T {
        ar2_closed_form(p, t)
    } else {
        ar2_recursion(p, t)
    }
}

/// Gradient `(df/dy1, df/dy2, df/dphi1, df/dphi2)` of the sequence value at `t`.
pub fn ar2_gradient(p: &Ar2Params, t: i64) -> Result<[f64; 4]> {
    if t < 1 {
        return Err(BapcError::Domain(format!("AR(2) index must be >= 1, got {t}")));
    }
    match t {
        1 => return Ok([1.0, 0.0, 0.0, 0.0]),
        2 => return Ok([0.0, 1.0, 0.0, 0.0]),
        _ => {}
    }
    if t > CLOSED_FORM_MAX_T {
        return Ok(ar2_gradient_recursion(p, t));
    }
    let tu = t as usize;
    let phi2 = DoubleDouble::from(p.phi2);
    let a = phi_dd(tu - 2, p.phi1, p.phi2);
    let b = phi_dd(tu - 3, p.phi1, p.phi2);
    let (a1, a2) = phi_partials_dd(tu - 2, p.phi1, p.phi2);
    let (b1, b2) = phi_partials_dd(tu - 3, p.phi1, p.phi2);
    let d_y1 = (phi2 * b).to_f64();
    let d_y2 = a.to_f64();
    let d_phi1 = (a1 * p.y2 + phi2 * b1 * p.y1).to_f64();
    let d_phi2 = (a2 * p.y2 + (b + phi2 * b2) * p.y1).to_f64();
    Ok([d_y1, d_y2, d_phi1, d_phi2])
}

/// Forward-mode differentiation of the recursion.
pub(crate) fn ar2_gradient_recursion(p: &Ar2Params, t: i64) -> [f64; 4] {
    // State per quantity: (value at t-1, value at t).
    let mut y = (p.y1, p.y2);
    let mut dy1 = (1.0, 0.0);
    let mut dy2 = (0.0, 1.0);
    let mut dp1 = (0.0, 0.0);
    let mut dp2 = (0.0, 0.0);
    if t == 1 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    for _ in 2..t {
        let next_y = p.phi1 * y.1 + p.phi2 * y.0;
        let next_dy1 = p.phi1 * dy1.1 + p.phi2 * dy1.0;
        let next_dy2 = p.phi1 * dy2.1 + p.phi2 * dy2.0;
        let next_dp1 = y.1 + p.phi1 * dp1.1 + p.phi2 * dp1.0;
        let next_dp2 = y.0 + p.phi1 * dp2.1 + p.phi2 * dp2.0;
        y = (y.1, next_y);
        dy1 = (dy1.1, next_dy1);
        dy2 = (dy2.1, next_dy2);
        dp1 = (dp1.1, next_dp1);
        dp2 = (dp2.1, next_dp2);
    }
    [dy1.1, dy2.1, dp1.1, dp2.1]
}

/// Damped sinusoid `alpha e^{-beta (t-1)} cos(omega (t-1) + phi)` as an AR(2)
/// sequence.
pub fn sin_to_ar2(s: &SinusoidParams) -> Result<Ar2Params> {
    if !(s.alpha > 0.0) || !(s.omega > 0.0) {
        return Err(BapcError::Domain(format!(
            "conversion needs alpha > 0 and omega > 0 (alpha={}, omega={})",
            s.alpha, s.omega
        )));
    }
    let decay = (-s.beta).exp();
    Ok(Ar2Params {
        y1: s.alpha * s.phi.cos(),
        y2: s.alpha * decay * (s.omega + s.phi).cos(),
        phi1: 2.0 * decay * s.omega.cos(),
        phi2: -decay * decay,
    })
}

/// Inverse of [`sin_to_ar2`]. The phase is chosen so that both
/// `alpha cos(phi) = y1` and `alpha e^{-beta} cos(omega + phi) = y2` hold, with
/// `alpha > 0` and `phi` in `[0, 2 pi)`.
pub fn ar2_to_sin(p: &Ar2Params) -> Result<SinusoidParams> {
    if !(p.phi2 < 0.0) {
        return Err(BapcError::Domain(format!(
            "phi2 must be negative for an oscillating sequence, got {}",
            p.phi2
        )));
    }
    if p.y1 == 0.0 && p.y2 == 0.0 {
        return Err(BapcError::Degenerate("initial values y1 = y2 = 0".into()));
    }
    let beta = -0.5 * (-p.phi2).ln();
    let c = 0.5 * p.phi1 * beta.exp();
    if !(-1.0..=1.0).contains(&c) {
        return Err(BapcError::Domain(format!(
            "arccos argument {c} outside [-1, 1]; roots are real"
        )));
    }
    let omega = c.acos();
    let decay = (-beta).exp();
    let sin_omega = omega.sin();
    if sin_omega == 0.0 {
        return Err(BapcError::Degenerate(format!(
            "frequency {omega} has no oscillating component"
        )));
    }
    // alpha sin(phi) follows from expanding cos(omega + phi).
    let alpha_sin = (p.y1 * decay * omega.cos() - p.y2) / (decay * sin_omega);
    let alpha = p.y1.hypot(alpha_sin);
    let phi = alpha_sin.atan2(p.y1).rem_euclid(TAU);
    Ok(SinusoidParams {
        alpha,
        beta,
        omega,
        phi: if phi >= TAU { 0.0 } else { phi },
    })
}

/// Result of a robust AR(2) coefficient fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustAr2Fit {
    pub params: Ar2Params,
    /// Row indices `t` (target index) dropped as outliers.
    pub removed: Vec<i64>,
    pub rounds: usize,
    pub converged: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median absolute deviation about the median.
pub fn mad(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

/// Relative floor on the outlier threshold; exact fits have a MAD at the
/// rounding level and must not shed rows.
const ROBUST_FLOOR_REL: f64 = 1e-10;

/// Least squares of `y_t` on `(y_{t-1}, y_{t-2})` with iterative removal of
/// rows whose absolute residual exceeds `k` times the MAD of the retained
/// residuals. `y1, y2` are the observed first two values.
pub fn fit_ar2_robust_params(
    series: &TimeSeries,
    k: f64,
    max_rounds: usize,
    robust: bool,
) -> Result<RobustAr2Fit> {
    let n = series.len();
    if n < 5 {
        return Err(BapcError::InsufficientData(format!(
            "robust AR(2) needs at least 5 values, got {n}"
        )));
    }
    let v = series.values();
    let rows = n - 2;
    let x = DMatrix::from_fn(rows, 2, |i, j| v[i + 1 - j]);
    let y = DVector::from_iterator(rows, (2..n).map(|i| v[i]));
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = ROBUST_FLOOR_REL * scale.max(f64::MIN_POSITIVE);

    let solve = |keep: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..rows).filter(|&i| keep[i]).collect();
        if idx.len() < 2 {
            return Err(BapcError::Degenerate(format!(
                "only {} AR(2) rows left after outlier removal",
                idx.len()
            )));
        }
        let xs = DMatrix::from_fn(idx.len(), 2, |i, j| x[(idx[i], j)]);
        let ys = DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]));
        Ok(lstsq(&xs, &ys)?)
    };

    let mut keep = vec![true; rows];
    let mut coef = solve(&keep)?;
    let mut rounds = 0;
    let mut converged = !robust;
    if robust {
        while rounds < max_rounds {
            rounds += 1;
            let resid: Vec<f64> = (0..rows)
                .map(|i| y[i] - x[(i, 0)] * coef[0] - x[(i, 1)] * coef[1])
                .collect();
            let kept: Vec<f64> = (0..rows).filter(|&i| keep[i]).map(|i| resid[i]).collect();
            let threshold = (k * mad(&kept)).max(floor);
            let next: Vec<bool> = resid.iter().map(|r| r.abs() <= threshold).collect();
            if next == keep {
                converged = true;
                break;
            }
            keep = next;
            coef = solve(&keep)?;
        }
    }
    let removed = (0..rows)
        .filter(|&i| !keep[i])
        .map(|i| series.start_index() + i as i64 + 2)
        .collect();
    Ok(RobustAr2Fit {
        params: Ar2Params {
            y1: v[0],
            y2: v[1],
            phi1: coef[0],
            phi2: coef[1],
        },
        removed,
        rounds,
        converged,
    })
}
