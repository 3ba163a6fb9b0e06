//! Interpretable parametric base models `f_theta(t)`.

pub mod ar2;
mod fit;

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BapcError, Result};

pub use ar2::{
    ar2_closed_form, ar2_recursion, ar2_to_sin, closed_form_coefficients, phi, phi_with,
    sin_to_ar2, Ar2Params, SinusoidParams, SumPrecision, CLOSED_FORM_MAX_T,
};
pub use fit::{fit, fit_ar2_robust, fit_with_warm_starts, FitConfig, FitOutcome};

/// Default seasonal period (monthly data).
pub const DEFAULT_PERIOD: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `a`
    Constant,
    /// `a + b t`
    Linear,
    /// `a + b t + c t^2 + alpha cos(2 pi t / period + phi)`
    PolySeasonal { period: f64 },
    /// `alpha cos(2 pi t / period + phi)` with a fixed frequency.
    Sinusoid { period: f64 },
    /// `alpha exp(-beta t) cos(omega t + phi)`
    DampedSinusoid,
    /// `y_t = phi1 y_{t-1} + phi2 y_{t-2}` started from `(y1, y2)`.
    Ar2,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Linear => "linear",
            Family::PolySeasonal { .. } => "polyseasonal",
            Family::Sinusoid { .. } => "sinusoid",
            Family::DampedSinusoid => "damped-sinusoid",
            Family::Ar2 => "ar2",
        }
    }

    /// Parses a family name; `period` applies to the seasonal families.
    pub fn parse(name: &str, period: Option<f64>) -> Result<Family> {
        let period = period.unwrap_or(DEFAULT_PERIOD);
        if !(period.is_finite() && period > 0.0) {
            return Err(BapcError::Config(format!("period must be positive, got {period}")));
        }
        Ok(match name.to_ascii_lowercase().as_str() {
            "constant" => Family::Constant,
            "linear" => Family::Linear,
            "polyseasonal" | "poly-seasonal" => Family::PolySeasonal { period },
            "sinusoid" => Family::Sinusoid { period },
            "damped-sinusoid" | "dampedsinusoid" | "damped_sinusoid" => Family::DampedSinusoid,
            "ar2" | "ar2-robust" => Family::Ar2,
            other => return Err(BapcError::Config(format!("unknown base family `{other}`"))),
        })
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            Family::PolySeasonal { period } | Family::Sinusoid { period } => Some(period),
            _ => None,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Constant => &["a"],
            Family::Linear => &["a", "b"],
            Family::PolySeasonal { .. } => &["a", "b", "c", "alpha", "phi"],
            Family::Sinusoid { .. } => &["alpha", "phi"],
            Family::DampedSinusoid => &["alpha", "beta", "omega", "phi"],
            Family::Ar2 => &["y1", "y2", "phi1", "phi2"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    /// `f_theta(t) = theta . g(t)` with `g` independent of `theta`.
    pub fn is_linear(&self) -> bool {
        matches!(self, Family::Constant | Family::Linear)
    }

    /// Index of a phase parameter defined modulo 2 pi.
    pub fn phase_index(&self) -> Option<usize> {
        match self {
            Family::PolySeasonal { .. } => Some(4),
            Family::Sinusoid { .. } => Some(1),
            Family::DampedSinusoid => Some(3),
            _ => None,
        }
    }

    fn check_len(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(BapcError::Config(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.n_params(),
                params.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn integer_index(t: f64) -> Result<i64> {
    if t.fract() != 0.0 || !t.is_finite() || t < 1.0 {
        return Err(BapcError::Domain(format!("AR(2) needs a positive integer index, got {t}")));
    }
    Ok(t as i64)
}

fn ar2_of(p: &[f64]) -> Ar2Params {
    Ar2Params { y1: p[0], y2: p[1], phi1: p[2], phi2: p[3] }
}

/// Evaluates `f_theta(t)` for a raw parameter slice.
pub fn eval_params(family: Family, p: &[f64], t: f64) -> Result<f64> {
    family.check_len(p)?;
    Ok(match family {
        Family::Constant => p[0],
        Family::Linear => p[0] + p[1] * t,
        Family::PolySeasonal { period } => {
            p[0] + p[1] * t + p[2] * t * t + p[3] * (TAU * t / period + p[4]).cos()
        }
        Family::Sinusoid { period } => p[0] * (TAU * t / period + p[1]).cos(),
        Family::DampedSinusoid => p[0] * (-p[1] * t).exp() * (p[2] * t + p[3]).cos(),
        Family::Ar2 => ar2::ar2_value(&ar2_of(p), integer_index(t)?)?,
    })
}

/// Writes `d f_theta(t) / d theta_k` into `out`.
pub fn gradient_params(family: Family, p: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    family.check_len(p)?;
    family.check_len(out)?;
    match family {
        Family::Constant => out[0] = 1.0,
        Family::Linear => out.copy_from_slice(&[1.0, t]),
        Family::PolySeasonal { period } => {
            let arg = TAU * t / period + p[4];
            out.copy_from_slice(&[1.0, t, t * t, arg.cos(), -p[3] * arg.sin()]);
        }
        Family::Sinusoid { period } => {
            let arg = TAU * t / period + p[1];
            out.copy_from_slice(&[arg.cos(), -p[0] * arg.sin()]);
        }
        Family::DampedSinusoid => {
            let decay = (-p[1] * t).exp();
            let (s, c) = (p[2] * t + p[3]).sin_cos();
            let f = p[0] * decay * c;
            let ds = -p[0] * decay * s;
            out.copy_from_slice(&[decay * c, -t * f, t * ds, ds]);
        }
        Family::Ar2 => out.copy_from_slice(&ar2::ar2_gradient(&ar2_of(p), integer_index(t)?)?),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    family: Family,
    params: Vec<f64>,
}

impl BaseModel {
    pub fn new(family: Family, params: Vec<f64>) -> Result<Self> {
        family.check_len(&params)?;
        if let Some(bad) = params.iter().find(|v| !v.is_finite()) {
            return Err(BapcError::Numerical(format!("non-finite parameter {bad}")));
        }
        Ok(BaseModel { family, params })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        let i = self.family.param_names().iter().position(|n| *n == name)?;
        Some(self.params[i])
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.family.param_names().iter().copied().zip(self.params.iter().copied())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        eval_params(self.family, &self.params, t)
    }

    pub fn gradient(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.params.len()];
        gradient_params(self.family, &self.params, t, &mut out)?;
        Ok(out)
    }

    /// For AR(2) models, the parameters as a struct.
    pub fn as_ar2(&self) -> Option<Ar2Params> {
        (self.family == Family::Ar2).then(|| ar2_of(&self.params))
    }

    /// For damped sinusoids, the parameters as a struct.
    pub fn as_sinusoid(&self) -> Option<SinusoidParams> {
        (self.family == Family::DampedSinusoid).then(|| SinusoidParams {
            alpha: self.params[0],
            beta: self.params[1],
            omega: self.params[2],
            phi: self.params[3],
        })
    }
}

impl Serialize for BaseModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Params<'a>(&'a BaseModel);
        impl Serialize for Params<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.params.len()))?;
                for (name, value) in self.0.named_params() {
                    map.serialize_entry(name, &value)?;
                }
                map.end()
            }
        }
        let has_period = self.family.period().is_some();
        let mut map = serializer.serialize_map(Some(2 + has_period as usize))?;
        map.serialize_entry("family", self.family.name())?;
        map.serialize_entry("params", &Params(self))?;
        if let Some(period) = self.family.period() {
            map.serialize_entry("period", &period)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for BaseModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            family: String,
            params: HashMap<String, f64>,
            #[serde(default)]
            period: Option<f64>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let family = Family::parse(&repr.family, repr.period).map_err(D::Error::custom)?;
        let names = family.param_names();
        if repr.params.len() != names.len() {
            return Err(D::Error::custom(format!(
                "{} expects parameters {:?}",
                family.name(),
                names
            )));
        }
        let params = names
            .iter()
            .map(|n| {
                repr.params
                    .get(*n)
                    .copied()
                    .ok_or_else(|| D::Error::custom(format!("missing parameter `{n}`")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        BaseModel::new(family, params).map_err(D::Error::custom)
    }
}
