use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bapc_core::correction::{ArNetOptions, CorrectionKind, CorrectionSpec};
use bapc_core::lime::LimeOptions;
use bapc_core::models::FitConfig;
use bapc_core::runner::{run, BaseSpec, Command, Dataset, Experiment, RunConfig};
use bapc_core::synthetic::{SyntheticKind, SyntheticSpec};
use bapc_core::{BapcError, Result};

#[derive(Parser, Debug)]
#[command(name = "bapc", version, about = "Explain time-series corrections through base-model parameter changes")]
struct Cli {
    /// Seed for every stochastic component [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving artifacts [default: out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Replay a manifest.json written by an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Sample a synthetic series.
    Generate(GenerateArgs),
    /// Fit a base model.
    Fit {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        base: BaseArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Run BAPC on one training window.
    Bapc {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Last index of the training window [default: series end].
        #[arg(long)]
        anchor: Option<i64>,
        /// Also attribute the surrogate correction at this index.
        #[arg(long)]
        ig_t: Option<i64>,
    },
    /// Run BAPC on every sliding window.
    Sbapc {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Skip the per-parameter attribution heatmaps.
        #[arg(long)]
        no_heatmaps: bool,
    },
    /// Scan the correction window size r = 0..n.
    WindowScan {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Evaluation index [default: series end].
        #[arg(long)]
        t_eval: Option<i64>,
    },
    /// Integrated gradients of the surrogate correction at one index.
    Ig {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        anchor: Option<i64>,
        #[arg(long)]
        t: i64,
        /// Use Gauss-Legendre quadrature with this many nodes.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Segment-perturbation LIME of the autoregressive correction model.
    Lime {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        anchor: Option<i64>,
        #[arg(long)]
        t: i64,
        /// Autoregressive order of the correction network.
        #[arg(long, default_value_t = 12)]
        p: usize,
        #[arg(long, default_value_t = 3)]
        segment_size: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        ridge: f64,
        /// Masked-lag value [default: residual mean].
        #[arg(long)]
        placeholder: Option<f64>,
    },
    /// Sequential run with heatmaps on the airline passenger data.
    AirpassengersDemo {
        /// External copy of the data (`month,passengers`).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value = "polyseasonal")]
        base: String,
        #[arg(long)]
        period: Option<f64>,
        #[command(flatten)]
        correction: CorrectionArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 48)]
        n: usize,
        #[arg(long, default_value_t = 12)]
        r: usize,
    },
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    change_index: Option<i64>,
    #[arg(long)]
    t_star: Option<f64>,
    #[arg(long)]
    u0: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    force: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Sample u(t - 1) on the unshifted grid.
    #[arg(long)]
    raw_grid: bool,
    /// Output file, relative to the output directory.
    #[arg(long, default_value = "data.csv")]
    out: String,
}

impl GenerateArgs {
    fn spec(&self) -> Result<SyntheticSpec> {
        let mut spec = SyntheticSpec::defaults(SyntheticKind::parse(&self.kind)?);
        if let Some(v) = self.n {
            spec.n = v;
        }
        if let Some(v) = self.change_index {
            spec.change_index = v;
        }
        if let Some(v) = self.t_star {
            spec.t_star = v;
        }
        if let Some(v) = self.u0 {
            spec.u0 = v;
        }
        if let Some(v) = self.v0 {
            spec.v0 = v;
        }
        if let Some(v) = self.force {
            spec.force = v;
        }
        if let Some(v) = self.omega {
            spec.omega = v;
        }
        if let Some(v) = self.nu {
            spec.nu = v;
        }
        spec.raw_grid = self.raw_grid;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// step, ramp, sinacp, sinfcp or airpassengers.
    #[arg(long, default_value = "step")]
    dataset: String,
    /// Read the series from a CSV file instead (`t,value`, `label,value` or one column).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Length of a synthetic dataset.
    #[arg(long)]
    length: Option<usize>,
    /// First changed sample of a synthetic dataset.
    #[arg(long)]
    change_index: Option<i64>,
    #[arg(long)]
    raw_grid: bool,
}

impl DatasetArgs {
    fn dataset(&self) -> Result<Dataset> {
        let name = self.dataset.to_ascii_lowercase();
        if name == "airpassengers" {
            return Ok(Dataset::AirPassengers { path: self.csv.clone() });
        }
        if let Some(path) = &self.csv {
            return Ok(Dataset::Csv { path: path.clone() });
        }
        let mut spec = SyntheticSpec::defaults(SyntheticKind::parse(&name)?);
        if let Some(n) = self.length {
            spec.n = n;
        }
        if let Some(c) = self.change_index {
            spec.change_index = c;
        }
        spec.raw_grid = self.raw_grid;
        spec.validate()?;
        Ok(Dataset::Synthetic { spec })
    }
}

#[derive(Args, Debug)]
struct BaseArgs {
    /// constant, linear, polyseasonal, sinusoid, damped-sinusoid, ar2 or ar2-robust.
    #[arg(long, default_value = "constant")]
    base: String,
    /// Period of the seasonal families [default: 12].
    #[arg(long)]
    period: Option<f64>,
}

impl BaseArgs {
    fn spec(&self) -> Result<BaseSpec> {
        BaseSpec { family: self.base.clone(), period: self.period }.resolved()
    }
}

#[derive(Args, Debug)]
struct CorrectionArgs {
    /// nn1 or arnet [default: nn1, arnet for the passenger demo].
    #[arg(long)]
    correction: Option<String>,
    /// Autoregressive order of the network.
    #[arg(long, default_value_t = 12)]
    order: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "16", value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
}

impl CorrectionArgs {
    fn spec(&self, default: CorrectionKind) -> Result<CorrectionSpec> {
        let kind = match &self.correction {
            Some(name) => CorrectionKind::parse(name)?,
            None => default,
        };
        Ok(CorrectionSpec {
            kind,
            arnet: ArNetOptions {
                order: self.order,
                hidden: self.hidden.clone(),
                epochs: self.epochs,
                learning_rate: self.lr,
                seed: 0,
            },
        })
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    /// Frequency starts for the damped sinusoid, comma separated.
    #[arg(long, value_delimiter = ',')]
    frequency_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3.0)]
    robust_k: f64,
    /// Plain least squares for AR(2) coefficients.
    #[arg(long)]
    no_robust: bool,
}

impl FitArgs {
    fn config(&self) -> Result<FitConfig> {
        let cfg = FitConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            frequency_grid: self.frequency_grid.clone(),
            robust: !self.no_robust,
            robust_k: self.robust_k,
            ..FitConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    base: BaseArgs,
    #[command(flatten)]
    correction: CorrectionArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Training window size [default: series length].
    #[arg(long)]
    n: Option<usize>,
    /// Correction window size.
    #[arg(long, default_value_t = 0)]
    r: usize,
}

impl ExperimentArgs {
    fn experiment(&self) -> Result<Experiment> {
        Ok(Experiment {
            dataset: self.data.dataset()?,
            base: self.base.spec()?,
            correction: self.correction.spec(CorrectionKind::Nn1)?,
            fit: self.fit.config()?,
            n: self.n,
            r: self.r,
        })
    }
}

fn command(sub: &Sub) -> Result<Command> {
    Ok(match sub {
        Sub::Generate(args) => Command::Generate { spec: args.spec()?, file: args.out.clone() },
        Sub::Fit { data, base, fit } => Command::Fit { dataset: data.dataset()?, base: base.spec()?, fit: fit.config()? },
        Sub::Bapc { exp, anchor, ig_t } => Command::Bapc { experiment: exp.experiment()?, anchor: *anchor, ig_t: *ig_t },
        Sub::Sbapc { exp, no_heatmaps } => Command::Sbapc { experiment: exp.experiment()?, heatmaps: !no_heatmaps },
        Sub::WindowScan { exp, t_eval } => Command::WindowScan { experiment: exp.experiment()?, t_eval: *t_eval },
        Sub::Ig { exp, anchor, t, nodes } => {
            Command::Ig { experiment: exp.experiment()?, anchor: *anchor, t: *t, nodes: *nodes }
        }
        Sub::Lime { exp, anchor, t, p, segment_size, samples, ridge, placeholder } => {
            let mut experiment = exp.experiment()?;
            experiment.correction.kind = CorrectionKind::Arnet;
            experiment.correction.arnet.order = *p;
            Command::Lime {
                experiment,
                anchor: *anchor,
                t: *t,
                lime: LimeOptions {
                    segment_size: *segment_size,
                    samples: *samples,
                    ridge: *ridge,
                    seed: 0,
                    placeholder: *placeholder,
                },
            }
        }
        Sub::AirpassengersDemo { csv, base, period, correction, fit, n, r } => {
            let correction = correction.spec(CorrectionKind::Arnet)?;
            Command::AirpassengersDemo {
                experiment: Experiment {
                    dataset: Dataset::AirPassengers { path: csv.clone() },
                    base: BaseSpec { family: base.clone(), period: *period }.resolved()?,
                    correction,
                    fit: fit.config()?,
                    n: Some(*n),
                    r: *r,
                },
            }
        }
    })
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let config = match (&cli.config, &cli.command) {
        (Some(path), _) => {
            let mut cfg = RunConfig::load(path)?;
            if let Some(dir) = &cli.out_dir {
                cfg.out_dir = dir.clone();
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
                cfg = cfg.with_seed_propagated();
            }
            cfg
        }
        (None, Some(sub)) => RunConfig::new(
            cli.seed.unwrap_or(0),
            cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            command(sub)?,
        )
        .with_seed_propagated(),
        (None, None) => return Err(BapcError::Config("a subcommand or --config is required".into())),
    };
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(&cli).and_then(|cfg| run(&cfg).map(|s| (cfg, s)));
    match outcome {
        Ok((cfg, summary)) => {
            for f in &summary.files {
                println!("{}", cfg.out_dir.join(f).display());
            }
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
