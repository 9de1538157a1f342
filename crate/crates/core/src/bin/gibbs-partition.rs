use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gibbs_partition::chains::StepMeter;
use gibbs_partition::models::Model;
use gibbs_partition::oracle::{Enumeration, DEFAULT_CAP, SPECTRAL_CAP};
use gibbs_partition::pipelines::{self, BoundsProvider, BoundsSource, Method, PipelineConfig, TpaSampling};
use gibbs_partition::{report, sweep};

#[derive(Parser)]
#[command(name = "gibbs-partition", version, about = "Partition-function estimation for Gibbs distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Z(β_max) with one of the pipelines.
    Estimate(EstimateArgs),
    /// Enumerate a small model: Z, ln Z, E[H] and Glauber spectral data.
    Exact {
        #[arg(long)]
        model: PathBuf,
        /// Inverse temperatures; repeat or separate with commas.
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a TPA(k, d) cooling schedule from 0 to β_max.
    Schedule(ScheduleArgs),
    /// Run an experiment file; exits with 2 if any cell failed.
    Sweep {
        spec: PathBuf,
        /// Overrides the worker count in the file.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write plot scripts for a sweep's results file.
    Plots {
        results: PathBuf,
        /// Defaults to the directory holding the results.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    beta_max: f64,
    #[arg(long, env = "GIBBS_PARTITION_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// `oracle` or `manual:Λ,T,π_min`.
    #[arg(long, default_value = "oracle")]
    bounds: BoundsSource,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "super")]
    method: Method,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.1)]
    ratio: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the adaptive estimator's iteration log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    common: Common,
    /// Draw TPA samples exactly from the enumerated distribution.
    #[arg(long)]
    exact_sampler: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn model_label(path: &std::path::Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn config(common: &Common, method: Method, eps: f64, delta: f64) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(method, common.beta_max, eps, delta, common.seed);
    cfg.k = common.k;
    cfg.d = common.d;
    cfg
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Estimate(args) => {
            let model = Model::load(&args.common.model)?;
            let mut cfg = config(&args.common, args.method, args.eps, args.delta);
            cfg.ratio = args.ratio;
            let rep = pipelines::estimate(&model, &cfg, args.common.bounds)?;
            report::write_estimates(output(&args.out)?, &model_label(&args.common.model), std::slice::from_ref(&rep))?;
            if let Some(path) = &args.log {
                report::write_iterations(output(&Some(path.clone()))?, &rep.runs)?;
            }
        }
        Command::Exact { model, beta, out } => {
            let model = Model::load(&model)?;
            let en = Enumeration::new(&model, DEFAULT_CAP)?;
            let rows = beta
                .iter()
                .map(|&b| {
                    let spectral = if en.state_count() as u64 <= SPECTRAL_CAP { Some(en.spectral(b)?) } else { None };
                    Ok((en.exact_partition(b), spectral))
                })
                .collect::<gibbs_partition::Result<Vec<_>>>()?;
            report::write_exact(output(&out)?, &rows)?;
        }
        Command::Schedule(args) => {
            let model = Model::load(&args.common.model)?;
            let mut cfg = config(&args.common, Method::Super, 0.5, 0.5);
            if args.exact_sampler {
                cfg.tpa_sampling = TpaSampling::Exact;
            }
            cfg.validate()?;
            let bounds = BoundsProvider::new(&model, args.common.bounds)?;
            let (schedule, _) = pipelines::pipeline_schedule(&model, &cfg, &bounds, &StepMeter::new())?;
            report::write_schedule(output(&args.out)?, &schedule)?;
        }
        Command::Sweep { spec, workers } => {
            let mut spec = sweep::ExperimentSpec::load(&spec)?;
            if let Some(w) = workers {
                spec.workers = w;
            }
            let result = sweep::run_sweep(&spec)?;
            eprintln!(
                "{} rows ({} resumed), {} failed; results in {}",
                result.rows.len(),
                result.resumed,
                result.failures(),
                result.results_path.display()
            );
            if result.failures() > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Plots { results, out_dir } => {
            let rows = sweep::read_results(&results)?;
            let dir = out_dir.unwrap_or_else(|| results.parent().map(PathBuf::from).unwrap_or_default());
            for p in sweep::emit_plots(&sweep::methods_in(&rows), &dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
