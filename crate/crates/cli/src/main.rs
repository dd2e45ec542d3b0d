use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridcast::domain::{window_slice, CarbonIntensitySeries, HourStamp, JobMode, JobSpec, SeriesKind};
use gridcast::harness::{
    emit_results, replay_workload, run_spatial_experiment, run_temporal_experiment, ExperimentOutput, HarnessError,
    RegionData,
};
use gridcast::ingest::{load_emission_factors, load_intensity_csv, load_swf, IngestError, RunConfig};
use gridcast::metrics::report;
use gridcast::pipeline::{extend_exogenous, forecast_carbon, forecast_with_models, CarbonForecast, PipelineError};
use gridcast::sarimax::SarimaxModel;
use gridcast::scheduler::{optimality_ratio, schedule, SchedulingProblem};
use gridcast::synthetic::{write_dataset, RegionProfile};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "gridcast",
    version,
    about = "Carbon-intensity forecasting and carbon-aware job scheduling"
)]
struct Cli {
    #[command(flatten)]
    overrides: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

/// Run configuration: `--config` loads a key = value file, the other flags
/// override individual keys.
#[derive(Debug, Args)]
struct ConfigFlags {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    regions: Option<String>,
    #[arg(long, global = true)]
    data_dir: Option<String>,
    #[arg(long, global = true)]
    emission_factors_path: Option<String>,
    #[arg(long, global = true)]
    train_days: Option<String>,
    #[arg(long, global = true)]
    horizon_h: Option<String>,
    #[arg(long, global = true)]
    job_lengths_h: Option<String>,
    #[arg(long, global = true)]
    slacks_h: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    output_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Temporal,
    Spatial,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forecast one region's carbon intensity and write it as CSV.
    Forecast {
        #[arg(long)]
        region: String,
        /// Issue time; defaults to the end of the data.
        #[arg(long)]
        at: Option<HourStamp>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        save_model: Option<PathBuf>,
        /// Forecast from saved per-source models instead of refitting.
        #[arg(long, conflicts_with = "save_model")]
        load_model: Option<PathBuf>,
    },
    /// Schedule a single job on a forecast CSV and print the result as JSON.
    Schedule {
        #[arg(long, value_parser = parse_mode)]
        mode: JobMode,
        #[arg(long)]
        length_h: u32,
        #[arg(long)]
        slack_h: u32,
        #[arg(long)]
        arrival: HourStamp,
        #[arg(long)]
        forecast_csv: PathBuf,
        #[arg(long)]
        actual_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        power_kw: f64,
    },
    /// Run the temporal and/or spatial sweep described by the configuration.
    Simulate {
        #[arg(long, value_enum, default_value_t = Experiment::Both)]
        experiment: Experiment,
    },
    /// Replay a Standard Workload Format trace.
    Replay {
        #[arg(long)]
        swf: PathBuf,
    },
    /// Compare an actual and a forecast intensity CSV over their common hours.
    Metrics {
        #[arg(long)]
        actual: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
    },
    /// Write a seeded synthetic two-region dataset and a run configuration.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 365)]
        days: usize,
        #[arg(long, default_value = "2023-01-01T00:00:00Z")]
        start: HourStamp,
    },
}

fn parse_mode(s: &str) -> Result<JobMode, String> {
    s.parse().map_err(|e: gridcast::DomainError| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Run(String),
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Config(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => Failure::Config(m),
            HarnessError::Ingest(i) => i.into(),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

fn build_config(flags: &ConfigFlags) -> Result<RunConfig, Failure> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let pairs = [
        ("regions", &flags.regions),
        ("data_dir", &flags.data_dir),
        ("emission_factors_path", &flags.emission_factors_path),
        ("train_days", &flags.train_days),
        ("horizon_h", &flags.horizon_h),
        ("job_lengths_h", &flags.job_lengths_h),
        ("slacks_h", &flags.slacks_h),
        ("seed", &flags.seed),
        ("output_dir", &flags.output_dir),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Run(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn forecast_csv(f: &CarbonForecast) -> String {
    let mut s = String::from("timestamp,forecast_g_per_kwh");
    for src in f.per_source.sources() {
        let _ = write!(s, ",{src}_mwh");
    }
    s.push('\n');
    for i in 0..f.values.len() {
        let _ = write!(s, "{},{}", f.values.start().plus_hours(i as i64), f.values.values()[i]);
        for v in f.per_source.generation().row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

const ISSUED_PREFIX: &str = "# issued_at = ";

fn cmd_forecast(
    cfg: &RunConfig,
    region: &str,
    at: Option<HourStamp>,
    output: Option<&Path>,
    save_model: Option<&Path>,
    load_model: Option<&Path>,
) -> Result<(), Failure> {
    let factors = load_emission_factors(&cfg.emission_factors_path)?;
    let data = RegionData::load(cfg, region, &factors)?;
    let horizon = cfg.horizon_h as usize;
    let train_h = cfg.train_hours();

    let saved = match load_model {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
            let issued = text
                .lines()
                .find_map(|l| l.strip_prefix(ISSUED_PREFIX))
                .map(|s| s.trim().parse::<HourStamp>())
                .transpose()
                .map_err(run_err)?;
            Some((SarimaxModel::parse_text(&text).map_err(run_err)?, issued))
        }
        None => None,
    };
    let at = at
        .or_else(|| saved.as_ref().and_then(|(_, issued)| *issued))
        .unwrap_or_else(|| data.mix.end());
    let train_start = at.plus_hours(-(train_h as i64));
    let ahead = data.ahead_from(at, horizon)?;

    let forecast = match saved {
        Some((models, _)) => {
            let train = data.exog.slice(train_start, train_h).map_err(run_err)?;
            let future = extend_exogenous(&train, horizon, ahead.as_ref()).map_err(run_err)?;
            forecast_with_models(region, at, &models, &factors, horizon, &future).map_err(run_err)?
        }
        None => {
            let history = data.mix.slice(train_start, train_h).map_err(run_err)?;
            forecast_carbon(&history, &data.exog, &factors, horizon, ahead.as_ref())
                .map_err(|e: PipelineError| run_err(e))?
        }
    };
    if let Some(path) = save_model {
        let mut text = format!("# region = {region}\n{ISSUED_PREFIX}{at}\n");
        for (source, model) in &forecast.models {
            text.push_str(&model.to_text(source));
        }
        fs::write(path, text).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    }
    write_output(output, &forecast_csv(&forecast))
}

#[allow(clippy::too_many_arguments)]
fn cmd_schedule(
    mode: JobMode,
    length_h: u32,
    slack_h: u32,
    arrival: HourStamp,
    forecast_csv: &Path,
    actual_csv: Option<&Path>,
    power_kw: f64,
) -> Result<(), Failure> {
    let job = JobSpec::with_power("cli", length_h, slack_h, arrival, mode, power_kw)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let forecast = load_intensity_csv(forecast_csv, SeriesKind::Forecast)?;
    let actual = actual_csv
        .map(|p| load_intensity_csv(p, SeriesKind::Actual))
        .transpose()?;
    let problem = SchedulingProblem::new(job, &forecast, actual.as_ref()).map_err(run_err)?;
    let s = schedule(&problem).map_err(run_err)?;
    let rho = match (s.realized_g, problem.oracle()) {
        (Some(realized), Some(oracle)) => {
            let best = schedule(&oracle).map_err(run_err)?.realized_g.expect("actual attached");
            optimality_ratio(realized, best).ok()
        }
        _ => None,
    };
    let mut record = json!({
        "mode": mode.to_string(),
        "predicted_g": s.predicted_g,
    });
    match mode {
        JobMode::Continuous => record["start"] = json!(s.start().to_string()),
        JobMode::Interruptible => {
            record["hours"] = json!(s.hours().iter().map(ToString::to_string).collect::<Vec<_>>())
        }
    }
    if let Some(r) = s.realized_g {
        record["realized_g"] = json!(r);
    }
    if let Some(r) = rho {
        record["rho"] = json!(r);
    }
    println!("{}", serde_json::to_string_pretty(&record).expect("json"));
    Ok(())
}

fn finish_experiment(cfg: &RunConfig, out: &ExperimentOutput) -> Result<bool, Failure> {
    emit_results(out, &cfg.output_dir)?;
    for f in &out.failed_regions {
        eprintln!("region {} failed: {}", f.region, f.error);
    }
    eprintln!(
        "wrote {} rows to {} ({} submissions evaluated, {} dropped)",
        out.results.len(),
        cfg.output_dir.join("results.csv").display(),
        out.accounting.evaluated,
        out.accounting.dropped_span + out.accounting.dropped_fit
    );
    Ok(out.failed_regions.is_empty())
}

fn cmd_simulate(cfg: &RunConfig, experiment: Experiment) -> Result<bool, Failure> {
    let mut out = ExperimentOutput::default();
    if matches!(experiment, Experiment::Temporal | Experiment::Both) {
        out.merge(run_temporal_experiment(cfg)?);
    }
    let spatial = match experiment {
        Experiment::Spatial => true,
        Experiment::Both => cfg.regions.len() >= 2,
        Experiment::Temporal => false,
    };
    if spatial {
        let s = run_spatial_experiment(cfg)?;
        // Load failures are already listed by the temporal run.
        let failed = if matches!(experiment, Experiment::Both) {
            Vec::new()
        } else {
            s.failed_regions.clone()
        };
        out.merge(ExperimentOutput {
            failed_regions: failed,
            ..s
        });
    }
    finish_experiment(cfg, &out)
}

fn cmd_metrics(actual: &Path, forecast: &Path) -> Result<(), Failure> {
    let a = load_intensity_csv(actual, SeriesKind::Actual)?;
    let f = load_intensity_csv(forecast, SeriesKind::Forecast)?;
    let from = a.start().max(f.start());
    let to = a.end().min(f.end());
    if to <= from {
        return Err(Failure::Run("actual and forecast share no hours".into()));
    }
    let len = to.hours_since(from) as usize;
    let window = |s: &CarbonIntensitySeries| window_slice(s, from, len).map_err(run_err);
    let r = report(window(&a)?.values(), window(&f)?.values()).map_err(run_err)?;
    println!("{}", serde_json::to_string_pretty(&r).expect("json"));
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, out: &Path, days: usize, start: HourStamp) -> Result<(), Failure> {
    let profiles = [RegionProfile::sunny("sunny"), RegionProfile::windy("windy")];
    let mut run = write_dataset(out, &profiles, start, days * 24, cfg.seed).map_err(run_err)?;
    run.horizon_h = 72;
    run.job_lengths_h = vec![1, 6, 12, 24];
    run.slacks_h = vec![24, 48];
    let path = out.join("run.cfg");
    fs::write(&path, run.to_text()).map_err(run_err)?;
    eprintln!("wrote synthetic data and {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let cfg = build_config(&cli.overrides)?;
    match cli.command {
        Command::Forecast {
            region,
            at,
            output,
            save_model,
            load_model,
        } => cmd_forecast(
            &cfg,
            &region,
            at,
            output.as_deref(),
            save_model.as_deref(),
            load_model.as_deref(),
        )
        .map(|_| true),
        Command::Schedule {
            mode,
            length_h,
            slack_h,
            arrival,
            forecast_csv,
            actual_csv,
            power_kw,
        } => cmd_schedule(
            mode,
            length_h,
            slack_h,
            arrival,
            &forecast_csv,
            actual_csv.as_deref(),
            power_kw,
        )
        .map(|_| true),
        Command::Simulate { experiment } => cmd_simulate(&cfg, experiment),
        Command::Replay { swf } => {
            let trace = load_swf(&swf)?;
            let out = replay_workload(&cfg, &trace)?;
            finish_experiment(&cfg, &out)
        }
        Command::Metrics { actual, forecast } => cmd_metrics(&actual, &forecast).map(|_| true),
        Command::Synth { out, days, start } => cmd_synth(&cfg, &out, days, start).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
