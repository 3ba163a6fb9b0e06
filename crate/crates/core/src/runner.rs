//! Experiment orchestration shared by the command-line tool and manifest
//! replay. A [`RunConfig`] is fully resolved (every default filled in) and is
//! written next to the artifacts as `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{ig_heatmaps, ig_quadrature, integrated_gradients, Attribution, Heatmaps};
use crate::correction::{fit_correction, CorrectionSpec};
use crate::engine::{bapc, sbapc, window_scan, BapcConfig, BapcResult, SbapcResult};
use crate::error::{BapcError, Result};
use crate::io::{self, matrix_csv, series_csv, write_json, CsvText};
use crate::lime::{lime_explain_correction, LimeOptions};
use crate::models::{ar2_to_sin, fit, BaseModel, Family, FitConfig};
use crate::series::{read_series_csv_path, TimeSeries, WindowConfig};
use crate::synthetic::{generate, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Dataset {
    Synthetic { spec: SyntheticSpec },
    Csv { path: PathBuf },
    AirPassengers {
        /// External copy; the bundled data are used when absent.
        #[serde(default)]
        path: Option<PathBuf>,
    },
}

impl Dataset {
    pub fn load(&self) -> Result<TimeSeries> {
        match self {
            Dataset::Synthetic { spec } => generate(spec),
            Dataset::Csv { path } => read_series_csv_path(path),
            Dataset::AirPassengers { path: Some(p) } => io::load_air_passengers_path(p),
            Dataset::AirPassengers { path: None } => Ok(io::air_passengers()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

impl BaseSpec {
    pub fn family(&self) -> Result<Family> {
        Family::parse(&self.family, self.period)
    }

    /// Canonical spelling with the period filled in for seasonal families.
    pub fn resolved(&self) -> Result<BaseSpec> {
        let f = self.family()?;
        Ok(BaseSpec { family: f.name().to_string(), period: f.period() })
    }
}

/// Dataset, models and window shared by the BAPC-based commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub dataset: Dataset,
    pub base: BaseSpec,
    pub correction: CorrectionSpec,
    pub fit: FitConfig,
    /// Training window; the whole series when absent.
    pub n: Option<usize>,
    pub r: usize,
}

impl Experiment {
    fn bapc_config(&self, series_len: usize) -> Result<BapcConfig> {
        let n = self.n.unwrap_or(series_len);
        if n > series_len {
            return Err(BapcError::Config(format!("n={n} exceeds the series length {series_len}")));
        }
        Ok(BapcConfig {
            family: self.base.family()?,
            correction: self.correction.clone(),
            window: WindowConfig::new(n, self.r)?,
            fit: self.fit.clone(),
        })
    }

    /// The training window ending at `anchor` (default: the last index).
    fn window(&self, series: &TimeSeries, anchor: Option<i64>) -> Result<(TimeSeries, BapcConfig, i64)> {
        let config = self.bapc_config(series.len())?;
        let s = anchor.unwrap_or(series.end_index());
        let n = config.window.train_size as i64;
        Ok((series.slice(s - n + 1, s)?, config, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Generate {
        spec: SyntheticSpec,
        /// Output file name inside the output directory.
        file: String,
    },
    Fit {
        dataset: Dataset,
        base: BaseSpec,
        fit: FitConfig,
    },
    Bapc {
        experiment: Experiment,
        anchor: Option<i64>,
        /// Attribution time; no attribution when absent.
        ig_t: Option<i64>,
    },
    Sbapc {
        experiment: Experiment,
        heatmaps: bool,
    },
    WindowScan {
        experiment: Experiment,
        t_eval: Option<i64>,
    },
    Ig {
        experiment: Experiment,
        anchor: Option<i64>,
        t: i64,
        /// Force quadrature with this many nodes.
        nodes: Option<usize>,
    },
    Lime {
        experiment: Experiment,
        anchor: Option<i64>,
        t: i64,
        lime: LimeOptions,
    },
    AirpassengersDemo {
        experiment: Experiment,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    pub fn new(seed: u64, out_dir: PathBuf, command: Command) -> Self {
        RunConfig { version: env!("CARGO_PKG_VERSION").to_string(), seed, out_dir, command }
    }

    /// Copies the run seed into every seeded component.
    pub fn with_seed_propagated(mut self) -> Self {
        let seed = self.seed;
        match &mut self.command {
            Command::Generate { .. } => {}
            Command::Fit { fit, .. } => fit.seed = seed,
            Command::Bapc { experiment, .. }
            | Command::Sbapc { experiment, .. }
            | Command::WindowScan { experiment, .. }
            | Command::Ig { experiment, .. }
            | Command::AirpassengersDemo { experiment } => seed_experiment(experiment, seed),
            Command::Lime { experiment, lime, .. } => {
                seed_experiment(experiment, seed);
                lime.seed = seed;
            }
        }
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn seed_experiment(e: &mut Experiment, seed: u64) {
    e.fit.seed = seed;
    e.correction.arnet.seed = seed;
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub files: Vec<String>,
    /// Per-anchor or per-r failures that did not abort the run.
    pub warnings: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    summary: RunSummary,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, csv: &CsvText) -> Result<()> {
        csv.write(&self.dir.join(name))?;
        self.summary.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.summary.files.push(name.to_string());
        Ok(())
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    model: &'a BaseModel,
    sse: f64,
    converged: bool,
    removed_indices: &'a [i64],
}

#[derive(Serialize)]
struct BapcReport<'a> {
    family: &'static str,
    param_names: &'static [&'static str],
    anchor: i64,
    window: WindowConfig,
    theta0: &'a BaseModel,
    theta_r: &'a BaseModel,
    delta_theta: &'a [f64],
    /// Robust AR(2) rows removed when refitting on the corrected data.
    removed_indices: &'a [i64],
    removed_indices_step1: &'a [i64],
    converged: bool,
    correction: &'a CorrectionSpec,
    fit_seed: u64,
}

impl<'a> BapcReport<'a> {
    fn new(result: &'a BapcResult, anchor: i64, correction: &'a CorrectionSpec, fit: &FitConfig) -> Self {
        let family = result.family();
        BapcReport {
            family: family.name(),
            param_names: family.param_names(),
            anchor,
            window: result.window,
            theta0: &result.theta0,
            theta_r: &result.theta_r,
            delta_theta: &result.delta_theta,
            removed_indices: &result.removed_step3,
            removed_indices_step1: &result.removed_step1,
            converged: result.converged,
            correction,
            fit_seed: fit.seed,
        }
    }
}

#[derive(Serialize)]
struct AnchorReport<'a> {
    s: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<&'a BaseModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_r: Option<&'a BaseModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_theta: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct AttributionReport {
    attribution: Attribution,
    /// For AR(2) models: the same change expressed on the equivalent damped
    /// sinusoid, evaluated at `t - 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    sinusoid: Option<Attribution>,
}

/// The anchor whose window has the largest `|Delta f^s(t)|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakAnchor {
    pub s: i64,
    pub label: Option<String>,
    pub t: i64,
    pub max_abs: f64,
}

pub fn peak_anchor(sweep: &SbapcResult, series: &TimeSeries) -> Option<PeakAnchor> {
    let mut best: Option<PeakAnchor> = None;
    for (s, t, v) in sweep.surrogate_matrix() {
        if best.as_ref().is_none_or(|b| v.abs() > b.max_abs) {
            best = Some(PeakAnchor { s, label: series.label(s).map(str::to_string), t, max_abs: v.abs() });
        }
    }
    best
}

/// The damped-sinusoid view of an AR(2) explanation: the AR value at `t`
/// equals the sinusoid at `t - 1`.
pub fn ar2_sinusoid_attribution(result: &BapcResult, t: i64) -> Result<Attribution> {
    let to_model = |m: &BaseModel| -> Result<BaseModel> {
        let s = ar2_to_sin(&m.as_ar2().ok_or_else(|| BapcError::Config("not an AR(2) model".into()))?)?;
        BaseModel::new(Family::DampedSinusoid, vec![s.alpha, s.beta, s.omega, s.phi])
    };
    let m0 = to_model(&result.theta0)?;
    let mr = to_model(&result.theta_r)?;
    // Compare phases on the same branch.
    let mut pr = mr.params().to_vec();
    let d = (pr[3] - m0.params()[3]).rem_euclid(std::f64::consts::TAU);
    pr[3] = m0.params()[3] + if d > std::f64::consts::PI { d - std::f64::consts::TAU } else { d };
    let mr = BaseModel::new(Family::DampedSinusoid, pr)?;
    integrated_gradients(&m0, &mr, (t - 1) as f64)
}

fn write_heatmaps(w: &mut Writer<'_>, maps: &Heatmaps) -> Result<()> {
    for (k, name) in maps.names.iter().enumerate() {
        w.csv(&format!("ig_{name}.csv"), &matrix_csv("ig", &maps.matrix(k)))?;
    }
    let residuals: Vec<(i64, i64, f64)> =
        maps.cells.iter().map(|c| (c.s, c.t, c.completeness_residual)).collect();
    w.csv("completeness.csv", &matrix_csv("residual", &residuals))?;
    for (s, t, e) in &maps.failures {
        w.summary.warnings.push(format!("attribution failed at s={s}, t={t}: {e}"));
    }
    Ok(())
}

fn write_sweep(w: &mut Writer<'_>, sweep: &SbapcResult) -> Result<()> {
    w.csv("surrogate_matrix.csv", &matrix_csv("delta_f", &sweep.surrogate_matrix()))?;
    let anchors: Vec<AnchorReport<'_>> = sweep
        .anchors
        .iter()
        .map(|a| match &a.outcome {
            Ok(o) => AnchorReport {
                s: a.s,
                theta0: Some(&o.result.theta0),
                theta_r: Some(&o.result.theta_r),
                delta_theta: Some(&o.result.delta_theta),
                error: None,
            },
            Err(e) => AnchorReport { s: a.s, theta0: None, theta_r: None, delta_theta: None, error: Some(e) },
        })
        .collect();
    w.json("sbapc_result.json", &serde_json::json!({ "window": sweep.window, "anchors": anchors }))?;
    for (s, e) in sweep.failures() {
        w.summary.warnings.push(format!("anchor s={s} failed: {e}"));
    }
    Ok(())
}

/// Executes a command and writes its artifacts plus `manifest.json`.
/// Artifacts written before a failure are kept.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    std::fs::create_dir_all(&config.out_dir)?;
    let mut w = Writer { dir: &config.out_dir, summary: RunSummary::default() };
    w.json("manifest.json", config)?;
    match &config.command {
        Command::Generate { spec, file } => {
            let series = generate(spec)?;
            w.csv(file, &series_csv(&series))?;
        }
        Command::Fit { dataset, base, fit: fit_config } => {
            let series = dataset.load()?;
            let out = fit(base.family()?, &series, fit_config)?;
            w.json(
                "fit_result.json",
                &FitReport { model: &out.model, sse: out.sse, converged: out.converged, removed_indices: &out.removed },
            )?;
        }
        Command::Bapc { experiment, anchor, ig_t } => {
            let series = experiment.dataset.load()?;
            let (window, cfg, s) = experiment.window(&series, *anchor)?;
            let result = bapc(&window, &cfg)?;
            w.json("bapc_result.json", &BapcReport::new(&result, s, &cfg.correction, &cfg.fit))?;
            let mut surrogate = CsvText::new(&["t", "delta_f"]);
            for t in window.indices() {
                surrogate.index_value_row(&[t], result.surrogate(t as f64)?);
            }
            w.csv("surrogate.csv", &surrogate)?;
            w.csv("modified_series.csv", &series_csv(&result.modified))?;
            if let Some(t) = ig_t {
                write_attribution(&mut w, &result, *t, None)?;
            }
        }
        Command::Ig { experiment, anchor, t, nodes } => {
            let series = experiment.dataset.load()?;
            let (window, cfg, s) = experiment.window(&series, *anchor)?;
            let result = bapc(&window, &cfg)?;
            w.json("bapc_result.json", &BapcReport::new(&result, s, &cfg.correction, &cfg.fit))?;
            write_attribution(&mut w, &result, *t, *nodes)?;
        }
        Command::Sbapc { experiment, heatmaps } => {
            let series = experiment.dataset.load()?;
            let cfg = experiment.bapc_config(series.len())?;
            let sweep = sbapc(&series, &cfg)?;
            write_sweep(&mut w, &sweep)?;
            if *heatmaps {
                write_heatmaps(&mut w, &ig_heatmaps(&sweep, cfg.family))?;
            }
        }
        Command::WindowScan { experiment, t_eval } => {
            let series = experiment.dataset.load()?;
            let cfg = experiment.bapc_config(series.len())?;
            let t_eval = t_eval.unwrap_or(series.end_index());
            let scan = window_scan(&series, &cfg, t_eval)?;
            let mut csv = CsvText::new(&["r", "delta_f"]);
            for e in &scan.entries {
                match e.value {
                    Some(v) => csv.index_value_row(&[e.r as i64], v),
                    None => csv.row(&[e.r.to_string(), String::new()]),
                }
                if let Some(err) = &e.error {
                    w.summary.warnings.push(format!("r={} failed: {err}", e.r));
                }
            }
            w.csv("window_scan.csv", &csv)?;
            w.json("window_scan.json", &scan)?;
        }
        Command::Lime { experiment, anchor, t, lime } => {
            let series = experiment.dataset.load()?;
            let (window, cfg, _) = experiment.window(&series, *anchor)?;
            let base = fit(cfg.family, &window, &cfg.fit)?;
            let residuals = window.with_values(
                window
                    .iter()
                    .map(|(t, y)| Ok(y - base.model.eval(t as f64)?))
                    .collect::<Result<Vec<f64>>>()?,
            )?;
            let model = fit_correction(&cfg.correction, &residuals)?;
            let explanation = lime_explain_correction(&model, &residuals, *t, lime)?;
            w.csv("lime.csv", &io::lime_csv(&explanation.coefficients))?;
            w.json("lime.json", &explanation)?;
        }
        Command::AirpassengersDemo { experiment } => {
            let series = experiment.dataset.load()?;
            let cfg = experiment.bapc_config(series.len())?;
            let sweep = sbapc(&series, &cfg)?;
            write_sweep(&mut w, &sweep)?;
            write_heatmaps(&mut w, &ig_heatmaps(&sweep, cfg.family))?;
            w.json("peak_anchor.json", &peak_anchor(&sweep, &series))?;
        }
    }
    Ok(w.summary)
}

fn write_attribution(w: &mut Writer<'_>, result: &BapcResult, t: i64, nodes: Option<usize>) -> Result<()> {
    let attribution = match nodes {
        Some(nodes) => ig_quadrature(&result.theta0, &result.theta_r, t as f64, nodes)?,
        None => integrated_gradients(&result.theta0, &result.theta_r, t as f64)?,
    };
    let sinusoid = match result.family() {
        Family::Ar2 => match ar2_sinusoid_attribution(result, t) {
            Ok(a) => Some(a),
            Err(e) => {
                w.summary.warnings.push(format!("no sinusoid view of the AR(2) change: {e}"));
                None
            }
        },
        _ => None,
    };
    w.json("attribution.json", &AttributionReport { attribution, sinusoid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SyntheticKind;

    fn step_experiment(r: usize) -> Experiment {
        Experiment {
            dataset: Dataset::Synthetic { spec: SyntheticSpec::defaults(SyntheticKind::Step) },
            base: BaseSpec { family: "constant".into(), period: None },
            correction: CorrectionSpec::nn1(),
            fit: FitConfig::default(),
            n: Some(96),
            r,
        }
    }

    #[test]
    fn manifest_roundtrip() {
        let cfg = RunConfig::new(7, "out".into(), Command::Bapc { experiment: step_experiment(48), anchor: None, ig_t: Some(96) })
            .with_seed_propagated();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        match back.command {
            Command::Bapc { experiment, .. } => assert_eq!(experiment.correction.arnet.seed, 7),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bapc_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::new(0, dir.path().into(), Command::Bapc { experiment: step_experiment(48), anchor: None, ig_t: Some(96) });
        let summary = run(&cfg).unwrap();
        assert!(summary.files.contains(&"bapc_result.json".to_string()));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("bapc_result.json")).unwrap()).unwrap();
        assert!((v["delta_theta"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("attribution.json").exists());
    }

    #[test]
    fn oversized_window_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = step_experiment(10);
        e.n = Some(500);
        let cfg = RunConfig::new(0, dir.path().into(), Command::Sbapc { experiment: e, heatmaps: false });
        assert!(run(&cfg).unwrap_err().is_config());
    }
}
