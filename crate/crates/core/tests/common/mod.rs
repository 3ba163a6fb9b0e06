//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Grid on which oracle inputs are quantized so exact arithmetic stays small.
pub const QUANT_BITS: u32 = 40;

/// The exact value `num * 2^-exp`.
#[derive(Debug, Clone)]
pub struct Dyadic {
    pub num: BigInt,
    pub exp: u32,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { num: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: BigInt::from(1), exp: 0 }
    }

    fn aligned(&self, exp: u32) -> BigInt {
        &self.num << (exp - self.exp)
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        let exp = self.exp.max(o.exp);
        Dyadic { num: self.aligned(exp) + o.aligned(exp), exp }
    }

    pub fn mul(&self, o: &Dyadic) -> Dyadic {
        Dyadic { num: &self.num * &o.num, exp: self.exp + o.exp }
    }

    /// Nearest f64 up to a couple of ulps.
    pub fn to_f64(&self) -> f64 {
        if self.num.is_zero() {
            return 0.0;
        }
        let bits = self.num.abs().bits() as i64;
        let shift = (bits - 64).max(0);
        let mantissa = (&self.num >> shift as usize).to_f64().unwrap();
        let mut e = shift - self.exp as i64;
        let mut v = mantissa;
        while e > 0 {
            let s = e.min(512);
            v *= 2f64.powi(s as i32);
            e -= s;
        }
        while e < 0 {
            let s = (-e).min(512);
            v *= 2f64.powi(-(s as i32));
            e += s;
        }
        v
    }
}

/// Rounds `x` to the quantization grid; the result is exactly representable
/// both as f64 and as a [`Dyadic`].
pub fn quantize(x: f64) -> (f64, Dyadic) {
    let scale = 2f64.powi(QUANT_BITS as i32);
    let n = (x * scale).round();
    (n / scale, Dyadic { num: BigInt::from(n as i64), exp: QUANT_BITS })
}

/// `Phi(t)` from the exact power of the companion matrix `[[phi1, phi2], [1, 0]]`.
pub fn phi_matrix_power(phi1: &Dyadic, phi2: &Dyadic, t: usize) -> f64 {
    type M = [[Dyadic; 2]; 2];
    fn mul(a: &M, b: &M) -> M {
        let e = |i: usize, j: usize| a[i][0].mul(&b[0][j]).add(&a[i][1].mul(&b[1][j]));
        [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
    }
    let mut result: M = [[Dyadic::one(), Dyadic::zero()], [Dyadic::zero(), Dyadic::one()]];
    let mut base: M = [[phi1.clone(), phi2.clone()], [Dyadic::one(), Dyadic::zero()]];
    let mut k = t;
    while k > 0 {
        if k & 1 == 1 {
            result = mul(&result, &base);
        }
        base = mul(&base, &base);
        k >>= 1;
    }
    result[0][0].to_f64()
}

/// `y_t` of `y_t = phi1 y_{t-1} + phi2 y_{t-2}` by exact recursion.
pub fn ar2_exact(y1: &Dyadic, y2: &Dyadic, phi1: &Dyadic, phi2: &Dyadic, t: usize) -> f64 {
    match t {
        1 => y1.to_f64(),
        2 => y2.to_f64(),
        _ => {
            let (mut a, mut b) = (y1.clone(), y2.clone());
            for _ in 3..=t {
                let c = phi1.mul(&b).add(&phi2.mul(&a));
                a = b;
                b = c;
            }
            b.to_f64()
        }
    }
}

/// Least-squares line `a + b t` from the normal equations.
pub fn ols_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let st: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let stt: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sty: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let b = (n * sty - st * sy) / (n * stt - st * st);
    ((sy - b * st) / n, b)
}

/// BAPC by hand for a line base and a 1-NN correction. The 1-NN model
/// reproduces its training residuals, so the corrected samples equal the
/// initial fit. Returns `((a0, b0), (a_r, b_r))` for `y` indexed from 1.
pub fn line_bapc_oracle(y: &[f64], r: usize) -> ((f64, f64), (f64, f64)) {
    let pts: Vec<(f64, f64)> = y.iter().enumerate().map(|(i, v)| (i as f64 + 1.0, *v)).collect();
    let (a0, b0) = ols_line(&pts);
    let split = y.len() - r;
    let modified: Vec<(f64, f64)> =
        pts.iter().enumerate().map(|(i, &(t, v))| (t, if i >= split { a0 + b0 * t } else { v })).collect();
    ((a0, b0), ols_line(&modified))
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Prints and returns the one-line verdict of an acceptance check.
pub fn verdict(id: &str, pass: bool, detail: &str) -> bool {
    println!("acceptance {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
