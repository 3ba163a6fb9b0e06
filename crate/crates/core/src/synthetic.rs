//! Closed-form samplers for forced oscillator and free-particle initial
//! value problems with a change point, and a discrete check of their
//! dynamics.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{BapcError, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Level shift: `u0 + F H(t - t*)`.
    Step,
    /// Slope change: `u0 + v0 t + F (t - t*) H(t - t*)`.
    Ramp,
    /// Oscillator kicked at `t*`: amplitude and phase change.
    Sinacp,
    /// Oscillator whose frequency switches from `omega` to `nu` at `t*`.
    Sinfcp,
}

impl SyntheticKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "step" => Ok(SyntheticKind::Step),
            "ramp" => Ok(SyntheticKind::Ramp),
            "sinacp" => Ok(SyntheticKind::Sinacp),
            "sinfcp" => Ok(SyntheticKind::Sinfcp),
            other => Err(BapcError::Config(format!("unknown synthetic kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Step => "step",
            SyntheticKind::Ramp => "ramp",
            SyntheticKind::Sinacp => "sinacp",
            SyntheticKind::Sinfcp => "sinfcp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub u0: f64,
    pub v0: f64,
    /// Impulse strength `F`.
    pub force: f64,
    pub t_star: f64,
    pub omega: f64,
    pub nu: f64,
    pub n: usize,
    /// First sample affected by the change. The sampling grid is shifted so
    /// that the change lands here.
    pub change_index: i64,
    /// Sample `y_t = u(t - 1)` with the unshifted `t*` instead.
    pub raw_grid: bool,
}

impl SyntheticSpec {
    pub fn defaults(kind: SyntheticKind) -> Self {
        let base = SyntheticSpec {
            kind,
            u0: 0.0,
            v0: 0.0,
            force: 0.0,
            t_star: 48.5,
            omega: 1.0,
            nu: 1.0,
            n: 96,
            change_index: 49,
            raw_grid: false,
        };
        match kind {
            SyntheticKind::Step => SyntheticSpec { u0: -1.0, force: 2.0, ..base },
            SyntheticKind::Ramp => SyntheticSpec { u0: 23.5, v0: -1.0, force: 2.0, ..base },
            SyntheticKind::Sinacp => {
                let omega = TAU / 24.0;
                SyntheticSpec {
                    u0: 1.0,
                    force: -omega,
                    t_star: 55.0,
                    omega,
                    nu: omega,
                    change_index: 55,
                    ..base
                }
            }
            SyntheticKind::Sinfcp => {
                let omega = TAU / 40.0;
                SyntheticSpec {
                    u0: 1.0,
                    t_star: 81.0,
                    omega,
                    nu: 2.0 * omega,
                    n: 160,
                    change_index: 81,
                    ..base
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(BapcError::Config("synthetic series length must be positive".into()));
        }
        let finite = [self.u0, self.v0, self.force, self.t_star, self.omega, self.nu];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(BapcError::Config("synthetic parameters must be finite".into()));
        }
        if matches!(self.kind, SyntheticKind::Sinacp | SyntheticKind::Sinfcp)
            && !(self.omega > 0.0 && self.nu > 0.0)
        {
            return Err(BapcError::Config("frequencies must be positive".into()));
        }
        Ok(())
    }

    /// The change time on the `u(t - 1)` grid actually sampled.
    pub fn effective_t_star(&self) -> f64 {
        if self.raw_grid {
            return self.t_star;
        }
        // First t with t - 1 >= t* under the raw convention.
        let raw_first = (self.t_star + 1.0).ceil();
        self.t_star + (self.change_index as f64 - raw_first)
    }

    /// First index whose sample sees the change.
    pub fn first_changed_index(&self) -> i64 {
        (self.effective_t_star() + 1.0).ceil() as i64
    }

    /// The continuous-time solution `u(tau)`.
    pub fn solution(&self, tau: f64) -> f64 {
        let ts = self.effective_t_star();
        let after = tau >= ts;
        let h = if after { 1.0 } else { 0.0 };
        match self.kind {
            SyntheticKind::Step => self.u0 + self.force * h,
            SyntheticKind::Ramp => self.u0 + self.v0 * tau + self.force * (tau - ts) * h,
            SyntheticKind::Sinacp => {
                let w = self.omega;
                self.u0 * (w * tau).cos()
                    + self.v0 / w * (w * tau).sin()
                    + self.force / w * (w * (tau - ts)).sin() * h
            }
            SyntheticKind::Sinfcp => {
                if after {
                    self.u0 * (self.nu * tau + (self.omega - self.nu) * ts).cos()
                } else {
                    self.u0 * (self.omega * tau).cos()
                }
            }
        }
    }
}

/// Samples `y_t = u(t - 1)` for `t = 1..=n`.
pub fn generate(spec: &SyntheticSpec) -> Result<TimeSeries> {
    spec.validate()?;
    TimeSeries::new((1..=spec.n).map(|t| spec.solution(t as f64 - 1.0)).collect())
}

/// Largest violation, scaled by `max |y|`, of the AR(2) recursion
/// `y_t = 2 cos(w) y_{t-1} - y_{t-2}` on the pre- and post-change segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsCheck {
    pub pre: f64,
    pub post: f64,
}

impl DynamicsCheck {
    pub fn max(&self) -> f64 {
        self.pre.max(self.post)
    }
}

pub fn verify_dynamics(series: &TimeSeries, spec: &SyntheticSpec) -> Result<DynamicsCheck> {
    let post_freq = match spec.kind {
        SyntheticKind::Sinacp => spec.omega,
        SyntheticKind::Sinfcp => spec.nu,
        other => {
            return Err(BapcError::Config(format!(
                "dynamics check applies to oscillator data only, not {}",
                other.name()
            )))
        }
    };
    let change = spec.first_changed_index();
    let scale = series.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let violation = |t: i64, w: f64| -> f64 {
        let (a, b, c) = (series.get(t).unwrap(), series.get(t - 1).unwrap(), series.get(t - 2).unwrap());
        (a - 2.0 * w.cos() * b + c).abs() / scale
    };
    let start = series.start_index() + 2;
    let pre = (start..change.min(series.end_index() + 1))
        .map(|t| violation(t, spec.omega))
        .fold(0.0, f64::max);
    let post = ((change + 2).max(start)..=series.end_index())
        .map(|t| violation(t, post_freq))
        .fold(0.0, f64::max);
    Ok(DynamicsCheck { pre, post })
}
