//! Gauss–Legendre quadrature on the unit interval.

use std::f64::consts::PI;

use super::sum::NeumaierSum;

/// Nodes and weights of an `n`-point Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Evaluates `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        if n == 1 {
            return GaussLegendre {
                nodes: vec![0.5],
                weights: vec![1.0],
            };
        }
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi's initial guess, refined by Newton.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map [-1, 1] -> [0, 1].
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = NeumaierSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }

    /// Integrates a vector-valued integrand of dimension `dim`. The closure
    /// fills its output slice and may fail; the first error aborts.
    pub fn integrate_vec<E, F>(&self, dim: usize, mut f: F) -> Result<Vec<f64>, E>
    where
        F: FnMut(f64, &mut [f64]) -> Result<(), E>,
    {
        let mut acc = vec![NeumaierSum::new(); dim];
        let mut buf = vec![0.0; dim];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            f(x, &mut buf)?;
            for (a, v) in acc.iter_mut().zip(&buf) {
                a.add(w * v);
            }
        }
        Ok(acc.iter().map(NeumaierSum::value).collect())
    }
}
