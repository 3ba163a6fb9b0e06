//! Segment-perturbation LIME for autoregressive correction models.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correction::{CorrectionModel, LagRegressor};
use crate::error::{BapcError, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeOptions {
    pub segment_size: usize,
    pub samples: usize,
    pub ridge: f64,
    pub seed: u64,
    /// Value substituted for masked lags; `None` uses the residual mean.
    pub placeholder: Option<f64>,
}

impl Default for LimeOptions {
    fn default() -> Self {
        LimeOptions { segment_size: 3, samples: 1000, ridge: 1e-3, seed: 0, placeholder: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub t: i64,
    /// One coefficient per lag, most recent lag first.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub samples: usize,
    pub segment_size: usize,
    pub ridge: f64,
    pub placeholder: f64,
    pub seed: u64,
}

/// Explains `model` at index `t` by masking contiguous lag segments at
/// random and regressing the predictions on the per-segment lag sums.
pub fn lime_explain<M: LagRegressor + ?Sized>(
    model: &M,
    residuals: &TimeSeries,
    t: i64,
    options: &LimeOptions,
) -> Result<LimeExplanation> {
    let p = model.order();
    if options.segment_size == 0 {
        return Err(BapcError::Config("segment size must be positive".into()));
    }
    if !(options.ridge >= 0.0) {
        return Err(BapcError::Config("ridge penalty must be non-negative".into()));
    }
    let lags = (1..=p as i64)
        .map(|k| residuals.get(t - k))
        .collect::<Option<Vec<f64>>>()
        .ok_or(BapcError::MissingLags { t, order: p })?;
    let segments: Vec<std::ops::Range<usize>> = (0..p)
        .step_by(options.segment_size)
        .map(|a| a..(a + options.segment_size).min(p))
        .collect();
    let m = segments.len();
    let k = options.samples;
    if k < m + 1 {
        return Err(BapcError::InsufficientData(format!(
            "{k} perturbation samples cannot identify {m} segment coefficients and an intercept"
        )));
    }
    let placeholder = options
        .placeholder
        .unwrap_or_else(|| residuals.values().iter().sum::<f64>() / residuals.len() as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut features = DMatrix::zeros(k, m);
    let mut targets = DVector::zeros(k);
    let mut perturbed = lags.clone();
    for row in 0..k {
        for (j, seg) in segments.iter().enumerate() {
            let masked = rng.gen_bool(0.5);
            let mut total = 0.0;
            for i in seg.clone() {
                perturbed[i] = if masked { placeholder } else { lags[i] };
                total += perturbed[i];
            }
            features[(row, j)] = total;
        }
        targets[row] = model.predict_lags(&perturbed);
    }

    let means = features.row_mean();
    let target_mean = targets.mean();
    let centered = DMatrix::from_fn(k, m, |i, j| features[(i, j)] - means[j]);
    let centered_y = targets.add_scalar(-target_mean);
    let mut gram = centered.transpose() * &centered;
    for j in 0..m {
        gram[(j, j)] += options.ridge;
    }
    let rhs = centered.transpose() * centered_y;
    let beta = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| BapcError::Numerical("singular LIME design; use a positive ridge penalty".into()))?;
    let intercept = target_mean - (0..m).map(|j| means[j] * beta[j]).sum::<f64>();

    let mut coefficients = vec![0.0; p];
    for (j, seg) in segments.iter().enumerate() {
        for i in seg.clone() {
            coefficients[i] = beta[j];
        }
    }
    Ok(LimeExplanation {
        t,
        coefficients,
        intercept,
        samples: k,
        segment_size: options.segment_size,
        ridge: options.ridge,
        placeholder,
        seed: options.seed,
    })
}

/// [`lime_explain`] for a fitted correction model; only autoregressive
/// models have lag inputs to explain.
pub fn lime_explain_correction(
    model: &CorrectionModel,
    residuals: &TimeSeries,
    t: i64,
    options: &LimeOptions,
) -> Result<LimeExplanation> {
    match model {
        CorrectionModel::Arnet(net) => lime_explain(net, residuals, t, options),
        CorrectionModel::NearestNeighbor(_) => Err(BapcError::Config(
            "LIME needs an autoregressive correction model".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(Vec<f64>);

    impl LagRegressor for Linear {
        fn order(&self) -> usize {
            self.0.len()
        }
        fn predict_lags(&self, lags: &[f64]) -> f64 {
            self.0.iter().zip(lags).map(|(w, x)| w * x).sum()
        }
    }

    fn history(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|i| ((i * 5) % 7) as f64 - 2.5 + 0.1 * i as f64).collect()).unwrap()
    }

    #[test]
    fn recovers_linear_weights() {
        let w = vec![0.6, -0.3, 0.2, 0.05];
        let opts = LimeOptions { segment_size: 1, samples: 500, ridge: 1e-6, seed: 4, placeholder: None };
        let e = lime_explain(&Linear(w.clone()), &history(30), 20, &opts).unwrap();
        for (c, w) in e.coefficients.iter().zip(&w) {
            assert!((c - w).abs() < 1e-2, "{c} vs {w}");
        }
    }

    #[test]
    fn zero_history_gives_zero_coefficients() {
        let zeros = TimeSeries::new(vec![0.0; 20]).unwrap();
        let opts = LimeOptions { placeholder: Some(0.0), ..LimeOptions::default() };
        let e = lime_explain(&Linear(vec![1.0; 6]), &zeros, 15, &opts).unwrap();
        assert!(e.coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn single_segment_shares_one_coefficient() {
        let opts = LimeOptions { segment_size: 5, samples: 50, ..LimeOptions::default() };
        let e = lime_explain(&Linear(vec![0.5, 0.1, -0.2, 0.3, 0.0]), &history(30), 25, &opts).unwrap();
        assert!(e.coefficients.iter().all(|c| *c == e.coefficients[0]));
    }

    #[test]
    fn last_segment_may_be_short() {
        let opts = LimeOptions { segment_size: 3, samples: 200, ..LimeOptions::default() };
        let e = lime_explain(&Linear(vec![0.1; 7]), &history(30), 25, &opts).unwrap();
        assert_eq!(e.coefficients.len(), 7);
        assert_eq!(e.coefficients[3], e.coefficients[5]);
    }

    #[test]
    fn deterministic_given_seed() {
        let opts = LimeOptions::default();
        let a = lime_explain(&Linear(vec![0.3, 0.2, 0.1]), &history(20), 10, &opts).unwrap();
        let b = lime_explain(&Linear(vec![0.3, 0.2, 0.1]), &history(20), 10, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples() {
        let opts = LimeOptions { segment_size: 1, samples: 3, ..LimeOptions::default() };
        assert!(matches!(
            lime_explain(&Linear(vec![0.1; 3]), &history(20), 10, &opts),
            Err(BapcError::InsufficientData(_))
        ));
    }

    #[test]
    fn missing_lags() {
        assert!(matches!(
            lime_explain(&Linear(vec![0.1; 3]), &history(20), 2, &LimeOptions::default()),
            Err(BapcError::MissingLags { .. })
        ));
    }
}
