//! Black-box residual predictors used to correct the base model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BapcError, Result};
use crate::series::{build_lag_matrix, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionKind {
    /// 1-nearest-neighbour regression on the time index.
    Nn1,
    /// Feed-forward network on lagged residuals.
    Arnet,
}

impl CorrectionKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "nn1" | "1nn" | "knn" => Ok(CorrectionKind::Nn1),
            "arnet" | "net" => Ok(CorrectionKind::Arnet),
            other => Err(BapcError::Config(format!("unknown correction model `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorrectionKind::Nn1 => "nn1",
            CorrectionKind::Arnet => "arnet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArNetOptions {
    pub order: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ArNetOptions {
    fn default() -> Self {
        ArNetOptions { order: 12, hidden: vec![16], epochs: 500, learning_rate: 0.01, seed: 0 }
    }
}

/// Which correction model to fit and how; serialised into run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSpec {
    pub kind: CorrectionKind,
    #[serde(default)]
    pub arnet: ArNetOptions,
}

impl CorrectionSpec {
    pub fn nn1() -> Self {
        CorrectionSpec { kind: CorrectionKind::Nn1, arnet: ArNetOptions::default() }
    }

    pub fn arnet(options: ArNetOptions) -> Self {
        CorrectionSpec { kind: CorrectionKind::Arnet, arnet: options }
    }
}

/// A model mapping the `order` most recent values (most recent first) to a
/// prediction of the next one.
pub trait LagRegressor {
    fn order(&self) -> usize;
    fn predict_lags(&self, lags: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighbor {
    /// `(t, residual)` sorted by `t`.
    points: Vec<(i64, f64)>,
}

impl NearestNeighbor {
    pub fn from_pairs(mut points: Vec<(i64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(BapcError::InsufficientData("1-NN needs at least one point".into()));
        }
        points.sort_by_key(|p| p.0);
        Ok(NearestNeighbor { points })
    }

    /// Stored value at the nearest index; ties go to the earlier index.
    pub fn predict(&self, t: i64) -> f64 {
        let i = self.points.partition_point(|p| p.0 < t);
        if i == self.points.len() {
            return self.points[i - 1].1;
        }
        if i == 0 || self.points[i].0 == t {
            return self.points[i].1;
        }
        let (left, right) = (self.points[i - 1], self.points[i]);
        if t - left.0 <= right.0 - t {
            left.1
        } else {
            right.1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    fn random(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let bias = (0..outputs).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        Layer { inputs, outputs, weights, bias }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Standardised multilayer perceptron with tanh hidden units and a linear
/// output, trained by full-batch gradient descent on the mean squared error.
#[derive(Debug, Clone, PartialEq)]
pub struct ArNet {
    options: ArNetOptions,
    mean: f64,
    scale: f64,
    /// Empty when the training residuals are constant.
    layers: Vec<Layer>,
}

impl ArNet {
    pub fn fit(residuals: &TimeSeries, options: &ArNetOptions) -> Result<Self> {
        let p = options.order;
        if p == 0 || options.hidden.contains(&0) {
            return Err(BapcError::Config("network order and widths must be positive".into()));
        }
        if !(options.learning_rate > 0.0) {
            return Err(BapcError::Config("learning rate must be positive".into()));
        }
        if residuals.len() <= p {
            return Err(BapcError::InsufficientData(format!(
                "network of order {p} needs more than {p} residuals, got {}",
                residuals.len()
            )));
        }
        let values = residuals.values();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = var.sqrt();
        let tiny = 1e-12 * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(scale > tiny) {
            return Ok(ArNet { options: options.clone(), mean, scale: 1.0, layers: Vec::new() });
        }

        let lagged = build_lag_matrix(residuals, p)?;
        let xs: Vec<Vec<f64>> = lagged
            .rows
            .iter()
            .map(|r| r.lags.iter().map(|v| (v - mean) / scale).collect())
            .collect();
        let ys: Vec<f64> = lagged.rows.iter().map(|r| (r.target - mean) / scale).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut widths = vec![p];
        widths.extend(&options.hidden);
        widths.push(1);
        let mut layers: Vec<Layer> = widths
            .windows(2)
            .map(|w| Layer::random(w[0], w[1], &mut rng))
            .collect();

        let rows = xs.len() as f64;
        let depth = layers.len();
        let mut activations: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        for _ in 0..options.epochs {
            for g in grads.iter_mut() {
                g.0.iter_mut().for_each(|v| *v = 0.0);
                g.1.iter_mut().for_each(|v| *v = 0.0);
            }
            for (x, &y) in xs.iter().zip(&ys) {
                activations[0].clone_from(x);
                for (l, layer) in layers.iter().enumerate() {
                    let (head, tail) = activations.split_at_mut(l + 1);
                    layer.forward(&head[l], &mut tail[0]);
                    if l + 1 < depth {
                        tail[0].iter_mut().for_each(|v| *v = v.tanh());
                    }
                }
                // d(0.5 (out - y)^2) / d out
                let mut delta = vec![activations[depth][0] - y];
                for l in (0..depth).rev() {
                    let layer = &layers[l];
                    let input = &activations[l];
                    let (gw, gb) = &mut grads[l];
                    for o in 0..layer.outputs {
                        gb[o] += delta[o];
                        for i in 0..layer.inputs {
                            gw[o * layer.inputs + i] += delta[o] * input[i];
                        }
                    }
                    if l > 0 {
                        let mut prev = vec![0.0; layer.inputs];
                        for (i, pv) in prev.iter_mut().enumerate() {
                            let back: f64 = (0..layer.outputs)
                                .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                                .sum();
                            // Hidden activations are tanh outputs.
                            *pv = back * (1.0 - input[i] * input[i]);
                        }
                        delta = prev;
                    }
                }
            }
            let step = options.learning_rate / rows;
            for (layer, (gw, gb)) in layers.iter_mut().zip(&grads) {
                layer.weights.iter_mut().zip(gw).for_each(|(w, g)| *w -= step * g);
                layer.bias.iter_mut().zip(gb).for_each(|(b, g)| *b -= step * g);
            }
        }
        if layers.iter().any(|l| l.weights.iter().chain(&l.bias).any(|v| !v.is_finite())) {
            return Err(BapcError::Numerical("network training diverged".into()));
        }
        Ok(ArNet { options: options.clone(), mean, scale, layers })
    }

    pub fn options(&self) -> &ArNetOptions {
        &self.options
    }
}

impl LagRegressor for ArNet {
    fn order(&self) -> usize {
        self.options.order
    }

    fn predict_lags(&self, lags: &[f64]) -> f64 {
        if self.layers.is_empty() {
            return self.mean;
        }
        let mut x: Vec<f64> = lags.iter().map(|v| (v - self.mean) / self.scale).collect();
        let mut out = Vec::new();
        let depth = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&x, &mut out);
            if l + 1 < depth {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut x, &mut out);
        }
        self.mean + self.scale * x[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectionModel {
    NearestNeighbor(NearestNeighbor),
    Arnet(ArNet),
}

/// Fits a correction model to base-model residuals.
pub fn fit_correction(spec: &CorrectionSpec, residuals: &TimeSeries) -> Result<CorrectionModel> {
    match spec.kind {
        CorrectionKind::Nn1 => Ok(CorrectionModel::NearestNeighbor(NearestNeighbor::from_pairs(
            residuals.iter().collect(),
        )?)),
        CorrectionKind::Arnet => Ok(CorrectionModel::Arnet(ArNet::fit(residuals, &spec.arnet)?)),
    }
}

impl CorrectionModel {
    /// Predicted residual at `t`. The network reads its inputs
    /// `(e_{t-1}, ..., e_{t-p})` from `history`.
    pub fn predict(&self, t: i64, history: &TimeSeries) -> Result<f64> {
        match self {
            CorrectionModel::NearestNeighbor(m) => Ok(m.predict(t)),
            CorrectionModel::Arnet(net) => {
                let p = net.order();
                let lags = (1..=p as i64)
                    .map(|k| history.get(t - k))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or(BapcError::MissingLags { t, order: p })?;
                Ok(net.predict_lags(&lags))
            }
        }
    }

    pub fn kind(&self) -> CorrectionKind {
        match self {
            CorrectionModel::NearestNeighbor(_) => CorrectionKind::Nn1,
            CorrectionModel::Arnet(_) => CorrectionKind::Arnet,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbor_ties_go_left() {
        let m = NearestNeighbor::from_pairs(vec![(1, 2.0), (3, 4.0)]).unwrap();
        assert_eq!(m.predict(2), 2.0);
        assert_eq!(m.predict(3), 4.0);
        assert_eq!(m.predict(-5), 2.0);
        assert_eq!(m.predict(9), 4.0);
    }

    #[test]
    fn nearest_neighbor_reproduces_training_data() {
        let r = TimeSeries::with_start(vec![0.3, -1.0, 2.5, 7.0], 5).unwrap();
        let m = fit_correction(&CorrectionSpec::nn1(), &r).unwrap();
        for (t, v) in r.iter() {
            assert_eq!(m.predict(t, &r).unwrap(), v);
        }
    }

    fn sawtooth(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.4).collect()).unwrap()
    }

    #[test]
    fn network_is_deterministic() {
        let r = sawtooth(60);
        let spec = CorrectionSpec::arnet(ArNetOptions { seed: 9, ..ArNetOptions::default() });
        let a = fit_correction(&spec, &r).unwrap();
        let b = fit_correction(&spec, &r).unwrap();
        for t in 13..=60 {
            assert_eq!(a.predict(t, &r).unwrap().to_bits(), b.predict(t, &r).unwrap().to_bits());
        }
        let other = fit_correction(&CorrectionSpec::arnet(ArNetOptions::default()), &r).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn network_on_zero_residuals_predicts_zero() {
        let r = TimeSeries::new(vec![0.0; 40]).unwrap();
        let m = fit_correction(&CorrectionSpec::arnet(ArNetOptions::default()), &r).unwrap();
        for t in 13..=40 {
            assert!(m.predict(t, &r).unwrap().abs() < 1e-3);
        }
    }

    #[test]
    fn network_learns_a_linear_decay() {
        // e_t = 0.5 e_{t-1}, restarted periodically so the data stay informative.
        let mut v = Vec::new();
        for i in 0..120 {
            v.push(if i % 8 == 0 { 1.0 - (i % 3) as f64 } else { 0.5 * v[i - 1] });
        }
        let r = TimeSeries::new(v).unwrap();
        let opts = ArNetOptions { order: 1, hidden: vec![8], epochs: 4000, learning_rate: 0.05, seed: 3 };
        let m = fit_correction(&CorrectionSpec::arnet(opts), &r).unwrap();
        for t in 2..=120 {
            if (t - 1) % 8 == 0 {
                continue;
            }
            let lag = r.get(t - 1).unwrap();
            let got = m.predict(t, &r).unwrap();
            assert!((got - 0.5 * lag).abs() < 5e-2, "t={t}: {got} vs {}", 0.5 * lag);
        }
    }

    #[test]
    fn network_reports_missing_lags() {
        let r = sawtooth(30);
        let m = fit_correction(&CorrectionSpec::arnet(ArNetOptions::default()), &r).unwrap();
        assert!(matches!(m.predict(5, &r), Err(BapcError::MissingLags { t: 5, order: 12 })));
    }

    #[test]
    fn network_needs_more_rows_than_order() {
        let r = sawtooth(12);
        assert!(matches!(
            fit_correction(&CorrectionSpec::arnet(ArNetOptions::default()), &r),
            Err(BapcError::InsufficientData(_))
        ));
    }
}
