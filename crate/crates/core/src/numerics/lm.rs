//! Levenberg–Marquardt for small dense problems with analytic Jacobians.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `sum r_i(p)^2`. `model` returns the residual vector and the
/// Jacobian `d r_i / d p_j` at `p`. Convergence is declared when the relative
/// parameter step falls below `tolerance` or the gradient vanishes.
pub fn levenberg_marquardt<F>(
    init: &[f64],
    max_iterations: usize,
    tolerance: f64,
    mut model: F,
) -> LmReport
where
    F: FnMut(&[f64]) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = DVector::from_column_slice(init);
    let (mut r, mut jac) = model(p.as_slice());
    let mut sse = r.norm_squared();
    let mut mu = {
        let jtj = jac.transpose() * &jac;
        1e-3 * (0..jtj.nrows()).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-12)
    };
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() <= 1e-15 * (1.0 + sse) {
            converged = true;
            break;
        }
        let mut a = jtj.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                mu *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let candidate = &p + &step;
        if !candidate.iter().all(|v| v.is_finite()) {
            mu *= nu;
            nu *= 2.0;
            continue;
        }
        let (r_new, jac_new) = model(candidate.as_slice());
        let sse_new = r_new.norm_squared();
        let predicted = -(step.dot(&g) * 2.0 + (&jac * &step).norm_squared());
        let rho = if predicted > 0.0 {
            (sse - sse_new) / predicted
        } else {
            -1.0
        };
        if sse_new.is_finite() && sse_new <= sse && rho > 0.0 {
            let rel = step.norm() / (p.norm() + 1e-12);
            p = candidate;
            r = r_new;
            jac = jac_new;
            sse = sse_new;
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if rel < tolerance {
                converged = true;
                break;
            }
        } else {
            mu *= nu;
            nu *= 2.0;
            if mu > 1e30 {
                // No descent direction left at this damping: a stationary point.
                converged = true;
                break;
            }
        }
    }

    LmReport {
        params: p.iter().copied().collect(),
        sse,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let ts: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let report = levenberg_marquardt(&[1.0, 0.1], 200, 1e-14, |p| {
            let r = DVector::from_iterator(ts.len(), ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y));
            let j = DMatrix::from_fn(ts.len(), 2, |i, k| {
                let e = (-p[1] * ts[i]).exp();
                if k == 0 {
                    e
                } else {
                    -p[0] * ts[i] * e
                }
            });
            (r, j)
        });
        assert!(report.converged);
        assert!((report.params[0] - 3.0).abs() < 1e-9);
        assert!((report.params[1] - 0.7).abs() < 1e-9);
    }
}
