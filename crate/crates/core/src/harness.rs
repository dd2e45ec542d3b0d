//! Experiment driver: replays regional data under each scheduling policy and
//! writes the result tables.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    CarbonIntensitySeries, EmissionFactorTable, EnergyMixSeries, ExogenousFrame, HourStamp, JobMode, JobSpec, Matrix,
    Schedule,
};
use crate::ingest::{
    load_emission_factors, load_energy_csv, load_exogenous_csv, IngestError, RunConfig, WorkloadTrace,
};
use crate::metrics::{additional_emissions_pct, coefficient_of_variation, concordance, mape};
use crate::pipeline::{aggregate_intensity, forecast_carbon, persistence_forecast, PipelineError};
use crate::scheduler::{
    optimality_ratio, run_heuristic, schedule, schedule_spatial, HeuristicEvent, RefitForecast, SchedulingProblem,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Oracle,
    Persistence,
    Sarimax,
    Heuristic,
    /// Run at arrival; only reported by workload replay.
    Noop,
}

impl Policy {
    pub const FORECASTING: [Policy; 4] = [Policy::Oracle, Policy::Persistence, Policy::Sarimax, Policy::Heuristic];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Oracle => "oracle",
            Policy::Persistence => "persistence",
            Policy::Sarimax => "sarimax",
            Policy::Heuristic => "heuristic",
            Policy::Noop => "noop",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultMode {
    Continuous,
    Interruptible,
    Spatial,
}

impl ResultMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultMode::Continuous => "continuous",
            ResultMode::Interruptible => "interruptible",
            ResultMode::Spatial => "spatial",
        }
    }
}

impl From<JobMode> for ResultMode {
    fn from(m: JobMode) -> Self {
        match m {
            JobMode::Continuous => ResultMode::Continuous,
            JobMode::Interruptible => ResultMode::Interruptible,
        }
    }
}

/// One row of `results.csv`. Replay rows aggregate jobs of varying size and
/// leave `length_h` and `slack_h` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub region: String,
    pub policy: Policy,
    pub mode: ResultMode,
    pub length_h: Option<u32>,
    pub slack_h: Option<u32>,
    pub submissions: usize,
    pub mean_additional_pct: f64,
    pub mean_rho: f64,
    pub mape_pct: Option<f64>,
    pub concordance_pct: Option<f64>,
    pub cv: f64,
    pub mean_realized_g: f64,
    pub savings_pct: Option<f64>,
}

/// Safety tally over every heuristic-scheduled job.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicAudit {
    pub jobs: usize,
    pub adoptions: usize,
    pub fit_failures: usize,
    /// Jobs finishing after their original arrival + length + slack.
    pub deadline_violations: usize,
    /// Adopted updates whose predicted emissions were not lower.
    pub emission_increases: usize,
}

impl HeuristicAudit {
    fn record(&mut self, job: &JobSpec, schedule: &Schedule, events: &[HeuristicEvent]) {
        self.jobs += 1;
        if schedule.completion() > job.deadline() || schedule.start() < job.arrival {
            self.deadline_violations += 1;
        }
        for e in events {
            match e {
                HeuristicEvent::Adopted {
                    old_predicted_g,
                    new_predicted_g,
                    ..
                } => {
                    self.adoptions += 1;
                    if !(new_predicted_g < old_predicted_g) {
                        self.emission_increases += 1;
                    }
                }
                HeuristicEvent::FitFailed { .. } => self.fit_failures += 1,
                HeuristicEvent::Kept { .. } => {}
            }
        }
    }

    fn merge(&mut self, other: &HeuristicAudit) {
        self.jobs += other.jobs;
        self.adoptions += other.adoptions;
        self.fit_failures += other.fit_failures;
        self.deadline_violations += other.deadline_violations;
        self.emission_increases += other.emission_increases;
    }
}

/// Submission bookkeeping: `candidates = evaluated + dropped_span + dropped_fit`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounting {
    pub candidates: usize,
    pub evaluated: usize,
    /// Window runs past the end of the data or beyond the forecast horizon.
    pub dropped_span: usize,
    /// The forecast at arrival could not be produced.
    pub dropped_fit: usize,
}

impl Accounting {
    fn merge(&mut self, other: &Accounting) {
        self.candidates += other.candidates;
        self.evaluated += other.evaluated;
        self.dropped_span += other.dropped_span;
        self.dropped_fit += other.dropped_fit;
    }

    pub fn reconciles(&self) -> bool {
        self.candidates == self.evaluated + self.dropped_span + self.dropped_fit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRegion {
    pub region: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<ExperimentResult>,
    pub failed_regions: Vec<FailedRegion>,
    pub audit: HeuristicAudit,
    pub accounting: Accounting,
}

impl ExperimentOutput {
    pub fn merge(&mut self, other: ExperimentOutput) {
        self.results.extend(other.results);
        self.failed_regions.extend(other.failed_regions);
        self.audit.merge(&other.audit);
        self.accounting.merge(&other.accounting);
    }

    fn sort(&mut self) {
        self.results.sort_by(|a, b| {
            (&a.region, a.mode, a.length_h, a.slack_h, a.policy)
                .cmp(&(&b.region, b.mode, b.length_h, b.slack_h, b.policy))
        });
        self.failed_regions.sort_by(|a, b| a.region.cmp(&b.region));
    }
}

/// A region's full data set with derived series.
#[derive(Debug, Clone)]
pub struct RegionData {
    pub name: String,
    pub mix: EnergyMixSeries,
    pub exog: ExogenousFrame,
    /// Covariates known ahead of time (demand forecast standing in for
    /// measured demand), when the data has them.
    pub exog_ahead: Option<ExogenousFrame>,
    pub actual: CarbonIntensitySeries,
    pub cv: f64,
}

impl RegionData {
    pub fn new(
        name: &str,
        mix: EnergyMixSeries,
        exog: ExogenousFrame,
        factors: &EmissionFactorTable,
    ) -> Result<Self, HarnessError> {
        let actual = aggregate_intensity(&mix, factors)?;
        let cv = coefficient_of_variation(actual.values()).unwrap_or(0.0);
        let exog_ahead = ahead_covariates(&exog)?;
        Ok(RegionData {
            name: name.to_string(),
            mix,
            exog,
            exog_ahead,
            actual,
            cv,
        })
    }

    /// Ahead-of-time covariates for up to `horizon_h` hours from `t`.
    pub fn ahead_from(&self, t: HourStamp, horizon_h: usize) -> Result<Option<ExogenousFrame>, HarnessError> {
        let Some(ahead) = &self.exog_ahead else {
            return Ok(None);
        };
        let avail = usize::try_from(ahead.end().hours_since(t)).unwrap_or(0).min(horizon_h);
        if t < ahead.start() || avail == 0 {
            return Ok(None);
        }
        Ok(Some(ahead.slice(t, avail).map_err(PipelineError::from)?))
    }

    pub fn load(cfg: &RunConfig, region: &str, factors: &EmissionFactorTable) -> Result<Self, HarnessError> {
        let [energy, weather, demand] = cfg.region_files(region);
        let mix = load_energy_csv(&energy)?;
        let exog = load_exogenous_csv(&weather, &demand)?;
        RegionData::new(region, mix, exog, factors)
    }
}

/// Columns known ahead of time. Only the demand forecast qualifies; it also
/// stands in for measured demand. Weather is forecast from its history.
fn ahead_covariates(exog: &ExogenousFrame) -> Result<Option<ExogenousFrame>, HarnessError> {
    let (Some(_), Some(predicted)) = (
        exog.column_index("demand_mwh"),
        exog.column_index("demand_forecast_mwh"),
    ) else {
        return Ok(None);
    };
    let forecast = exog.column(predicted);
    let values = Matrix::from_columns(&[forecast.clone(), forecast], exog.len()).map_err(PipelineError::from)?;
    let names = vec!["demand_mwh".to_string(), "demand_forecast_mwh".to_string()];
    Ok(Some(
        ExogenousFrame::new(exog.start(), names, values).map_err(PipelineError::from)?,
    ))
}

/// Lazily fitted forecasts for one region, one per issue hour.
struct Forecaster<'a> {
    data: &'a RegionData,
    factors: &'a EmissionFactorTable,
    train_h: usize,
    horizon_h: usize,
    cache: BTreeMap<HourStamp, Result<Arc<RefitForecast>, String>>,
}

impl<'a> Forecaster<'a> {
    fn new(data: &'a RegionData, factors: &'a EmissionFactorTable, cfg: &RunConfig) -> Self {
        Forecaster {
            data,
            factors,
            train_h: cfg.train_hours(),
            horizon_h: cfg.horizon_h as usize,
            cache: BTreeMap::new(),
        }
    }

    fn at(&mut self, t: HourStamp) -> Result<Arc<RefitForecast>, String> {
        if let Some(hit) = self.cache.get(&t) {
            return hit.clone();
        }
        let result = self.fit(t).map(Arc::new).map_err(|e| e.to_string());
        if let Err(e) = &result {
            debug!("{}: forecast at {t} failed: {e}", self.data.name);
        }
        self.cache.insert(t, result.clone());
        result
    }

    fn fit(&self, t: HourStamp) -> Result<RefitForecast, HarnessError> {
        let from = t.plus_hours(-(self.train_h as i64));
        let history = self.data.mix.slice(from, self.train_h).map_err(PipelineError::from)?;
        let future = self.data.ahead_from(t, self.horizon_h)?;
        Ok(forecast_carbon(&history, &self.data.exog, self.factors, self.horizon_h, future.as_ref())?.into())
    }

    /// Drops cached forecasts issued before `t`; they are never needed again.
    fn evict_before(&mut self, t: HourStamp) {
        self.cache = self.cache.split_off(&t);
    }
}

#[derive(Debug, Default)]
struct Cell {
    n: usize,
    sum_rho: f64,
    sum_additional: f64,
    sum_realized: f64,
    sum_noop: f64,
    actual: Vec<f64>,
    predicted: Vec<f64>,
}

impl Cell {
    fn add(&mut self, realized: f64, oracle: f64) {
        self.n += 1;
        self.sum_realized += realized;
        match (
            optimality_ratio(realized, oracle),
            additional_emissions_pct(realized, oracle),
        ) {
            (Ok(rho), Ok(add)) => {
                self.sum_rho += rho;
                self.sum_additional += add;
            }
            // Zero oracle emissions: every schedule is optimal.
            _ => self.sum_rho += 1.0,
        }
    }

    fn add_pairs(
        &mut self,
        actual: &CarbonIntensitySeries,
        forecast: &CarbonIntensitySeries,
        from: HourStamp,
        to: HourStamp,
    ) {
        let mut t = from.max(forecast.start());
        while t < to {
            if let (Some(a), Some(f)) = (actual.value_at(t), forecast.value_at(t)) {
                self.actual.push(a);
                self.predicted.push(f);
            }
            t = t.plus_hours(1);
        }
    }

    fn result(&self, key: &RowKey, policy: Policy, cv: f64) -> ExperimentResult {
        let n = self.n.max(1) as f64;
        let (mape_pct, concordance_pct) = if policy == Policy::Oracle {
            (Some(0.0), Some(100.0))
        } else {
            (
                mape(&self.actual, &self.predicted).ok(),
                concordance(&self.actual, &self.predicted).ok(),
            )
        };
        ExperimentResult {
            region: key.region.clone(),
            policy,
            mode: key.mode,
            length_h: key.length_h,
            slack_h: key.slack_h,
            submissions: self.n,
            mean_additional_pct: if self.n == 0 { 0.0 } else { self.sum_additional / n },
            mean_rho: if self.n == 0 { 1.0 } else { self.sum_rho / n },
            mape_pct,
            concordance_pct,
            cv,
            mean_realized_g: if self.n == 0 { 0.0 } else { self.sum_realized / n },
            savings_pct: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RowKey {
    region: String,
    mode: ResultMode,
    length_h: Option<u32>,
    slack_h: Option<u32>,
}

type Cells = BTreeMap<(RowKey, Policy), Cell>;

fn check_config(cfg: &RunConfig) -> Result<(), HarnessError> {
    cfg.validate()?;
    if cfg.regions.is_empty() {
        return Err(HarnessError::Config("no regions configured".into()));
    }
    let max_w = cfg.job_lengths_h.iter().max().copied().unwrap_or(0) + cfg.slacks_h.iter().max().copied().unwrap_or(0);
    if max_w > cfg.horizon_h {
        return Err(HarnessError::Config(format!(
            "horizon_h = {} is shorter than the largest job window ({max_w}h); raise horizon_h or shrink job_lengths_h/slacks_h",
            cfg.horizon_h
        )));
    }
    Ok(())
}

fn load_all(cfg: &RunConfig) -> Result<(EmissionFactorTable, Vec<RegionData>, Vec<FailedRegion>), HarnessError> {
    let factors = load_emission_factors(&cfg.emission_factors_path)?;
    let loaded: Vec<(String, Result<RegionData, HarnessError>)> = cfg
        .regions
        .par_iter()
        .map(|r| (r.clone(), RegionData::load(cfg, r, &factors)))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (region, res) in loaded {
        match res {
            Ok(d) => ok.push(d),
            Err(e) => {
                warn!("region {region} failed to load: {e}");
                failed.push(FailedRegion {
                    region,
                    error: e.to_string(),
                })
            }
        }
    }
    Ok((factors, ok, failed))
}

/// Daily submission hours: midnight of each day from the first hour that has
/// a full training window.
fn submission_days(data: &RegionData, train_h: usize) -> Vec<HourStamp> {
    let mut t = data.mix.start().plus_hours(train_h as i64);
    while t.hour_of_day() != 0 {
        t = t.plus_hours(1);
    }
    let mut out = Vec::new();
    while t < data.mix.end() {
        out.push(t);
        t = t.plus_hours(24);
    }
    out
}

fn job_for(id: String, length: u32, slack: u32, arrival: HourStamp, mode: JobMode) -> JobSpec {
    JobSpec::new(id, length, slack, arrival, mode).expect("lengths validated by config")
}

/// Realized emissions of each forecasting policy for one job in one region.
struct Evaluation {
    oracle: f64,
    realized: [(Policy, f64); 4],
}

fn evaluate_job(
    data: &RegionData,
    forecaster: &mut Forecaster<'_>,
    job: &JobSpec,
    arrival_forecast: &RefitForecast,
    cells: &mut Cells,
    key: &RowKey,
    audit: &mut HeuristicAudit,
) -> Result<Evaluation, String> {
    let actual = &data.actual;
    let deadline = job.deadline();
    let problem =
        |f: &CarbonIntensitySeries| SchedulingProblem::new(job.clone(), f, Some(actual)).and_then(|p| schedule(&p));
    let oracle = problem(actual)
        .map_err(|e| e.to_string())?
        .realized_g
        .expect("actual attached");
    let persistence = persistence_forecast(
        &crate::domain::window_slice(actual, job.arrival.plus_hours(-24), 24).map_err(|e| e.to_string())?,
        job.window_h(),
    )
    .map_err(|e| e.to_string())?;
    let pers = problem(&persistence)
        .map_err(|e| e.to_string())?
        .realized_g
        .expect("actual attached");
    let sar = problem(&arrival_forecast.forecast)
        .map_err(|e| e.to_string())?
        .realized_g
        .expect("actual attached");
    let state = run_heuristic(job.clone(), arrival_forecast.forecast.clone(), actual, |now| {
        forecaster.at(now).map(|r| (*r).clone())
    })
    .map_err(|e| e.to_string())?;
    audit.record(job, &state.schedule, &state.events);
    let heur = state.schedule.realized_g.ok_or("heuristic schedule outside actuals")?;

    let entries = [
        (Policy::Oracle, oracle, None),
        (Policy::Persistence, pers, Some(&persistence)),
        (Policy::Sarimax, sar, Some(&arrival_forecast.forecast)),
        (Policy::Heuristic, heur, Some(&state.forecast)),
    ];
    for (policy, realized, forecast) in entries {
        let cell = cells.entry((key.clone(), policy)).or_default();
        cell.add(realized, oracle);
        if let Some(f) = forecast {
            cell.add_pairs(actual, f, job.arrival, deadline);
        }
    }
    Ok(Evaluation {
        oracle,
        realized: [
            (Policy::Oracle, oracle),
            (Policy::Persistence, pers),
            (Policy::Sarimax, sar),
            (Policy::Heuristic, heur),
        ],
    })
}

fn finish_cells(cells: &Cells, cv: impl Fn(&str) -> f64) -> Vec<ExperimentResult> {
    cells
        .iter()
        .map(|((key, policy), cell)| cell.result(key, *policy, cv(&key.region)))
        .collect()
}

fn temporal_region(data: &RegionData, factors: &EmissionFactorTable, cfg: &RunConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let mut forecaster = Forecaster::new(data, factors, cfg);
    let mut cells = Cells::new();
    for day in submission_days(data, cfg.train_hours()) {
        forecaster.evict_before(day);
        for mode in [JobMode::Continuous, JobMode::Interruptible] {
            for &length in &cfg.job_lengths_h {
                for &slack in &cfg.slacks_h {
                    out.accounting.candidates += 1;
                    let job = job_for(format!("{}-{day}", data.name), length, slack, day, mode);
                    if job.deadline() > data.mix.end() {
                        out.accounting.dropped_span += 1;
                        continue;
                    }
                    let Ok(initial) = forecaster.at(day) else {
                        out.accounting.dropped_fit += 1;
                        continue;
                    };
                    let key = RowKey {
                        region: data.name.clone(),
                        mode: mode.into(),
                        length_h: Some(length),
                        slack_h: Some(slack),
                    };
                    match evaluate_job(data, &mut forecaster, &job, &initial, &mut cells, &key, &mut out.audit) {
                        Ok(_) => out.accounting.evaluated += 1,
                        Err(e) => {
                            debug!("{}: job at {day} dropped: {e}", data.name);
                            out.accounting.dropped_fit += 1;
                        }
                    }
                }
            }
        }
    }
    out.results = finish_cells(&cells, |_| data.cv);
    out
}

/// Schedules daily submissions in each region under every policy and mode.
pub fn run_temporal_experiment(cfg: &RunConfig) -> Result<ExperimentOutput, HarnessError> {
    check_config(cfg)?;
    let (factors, regions, failed) = load_all(cfg)?;
    Ok(temporal_on(&regions, &factors, cfg, failed))
}

/// Temporal experiment over already-loaded regions.
pub fn temporal_on(
    regions: &[RegionData],
    factors: &EmissionFactorTable,
    cfg: &RunConfig,
    failed: Vec<FailedRegion>,
) -> ExperimentOutput {
    let parts: Vec<ExperimentOutput> = regions.par_iter().map(|d| temporal_region(d, factors, cfg)).collect();
    let mut out = ExperimentOutput {
        failed_regions: failed,
        ..Default::default()
    };
    for p in parts {
        out.merge(p);
    }
    out.sort();
    out
}

/// Each submission migrates to the region with the lowest predicted
/// emissions (continuous jobs). The heuristic refines the schedule inside
/// the region chosen from the arrival forecasts.
pub fn run_spatial_experiment(cfg: &RunConfig) -> Result<ExperimentOutput, HarnessError> {
    check_config(cfg)?;
    let (factors, regions, failed) = load_all(cfg)?;
    if regions.len() < 2 {
        return Err(HarnessError::Config(format!(
            "spatial experiment needs at least 2 loaded regions, have {}",
            regions.len()
        )));
    }
    Ok(spatial_on(&regions, &factors, cfg, failed))
}

pub fn spatial_on(
    regions: &[RegionData],
    factors: &EmissionFactorTable,
    cfg: &RunConfig,
    failed: Vec<FailedRegion>,
) -> ExperimentOutput {
    let mut out = ExperimentOutput {
        failed_regions: failed,
        ..Default::default()
    };
    let label = regions.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join("+");
    let mean_cv = regions.iter().map(|r| r.cv).sum::<f64>() / regions.len().max(1) as f64;
    let mut forecasters: Vec<Forecaster<'_>> = regions.iter().map(|d| Forecaster::new(d, factors, cfg)).collect();
    let mut cells = Cells::new();
    let start = regions.iter().map(|r| r.mix.start()).max().expect("regions non-empty");
    let end = regions.iter().map(|r| r.mix.end()).min().expect("regions non-empty");
    let days = submission_days(&regions[0], cfg.train_hours())
        .into_iter()
        .filter(|d| d.plus_hours(-(cfg.train_hours() as i64)) >= start && *d < end);
    for day in days {
        for f in &mut forecasters {
            f.evict_before(day);
        }
        for &length in &cfg.job_lengths_h {
            for &slack in &cfg.slacks_h {
                out.accounting.candidates += 1;
                let job = job_for(format!("spatial-{day}"), length, slack, day, JobMode::Continuous);
                if job.deadline() > end {
                    out.accounting.dropped_span += 1;
                    continue;
                }
                let key = RowKey {
                    region: label.clone(),
                    mode: ResultMode::Spatial,
                    length_h: Some(length),
                    slack_h: Some(slack),
                };
                match spatial_job(regions, &mut forecasters, &job, &mut cells, &key, &mut out.audit) {
                    Ok(()) => out.accounting.evaluated += 1,
                    Err(e) => {
                        debug!("spatial job at {day} dropped: {e}");
                        out.accounting.dropped_fit += 1;
                    }
                }
            }
        }
    }
    out.results = finish_cells(&cells, |_| mean_cv);
    out.sort();
    out
}

fn spatial_job(
    regions: &[RegionData],
    forecasters: &mut [Forecaster<'_>],
    job: &JobSpec,
    cells: &mut Cells,
    key: &RowKey,
    audit: &mut HeuristicAudit,
) -> Result<(), String> {
    let err = |e: crate::scheduler::SchedulerError| e.to_string();
    let mut arrival_forecasts = Vec::with_capacity(regions.len());
    for f in forecasters.iter_mut() {
        arrival_forecasts.push(f.at(job.arrival)?);
    }
    let index: BTreeMap<&str, usize> = regions.iter().enumerate().map(|(i, r)| (r.name.as_str(), i)).collect();
    let pick =
        |forecast_of: &dyn Fn(usize) -> Result<CarbonIntensitySeries, String>| -> Result<(usize, Schedule), String> {
            let mut problems = BTreeMap::new();
            for (i, r) in regions.iter().enumerate() {
                problems.insert(
                    r.name.clone(),
                    SchedulingProblem::new(job.clone(), &forecast_of(i)?, Some(&r.actual)).map_err(err)?,
                );
            }
            let (region, s) = schedule_spatial(&problems).map_err(err)?;
            Ok((index[region.as_str()], s))
        };
    let (_, oracle_s) = pick(&|i| Ok(regions[i].actual.clone()))?;
    let oracle = oracle_s.realized_g.expect("actual attached");
    let persistence_of = |i: usize| -> Result<CarbonIntensitySeries, String> {
        let a = &regions[i].actual;
        let hist = crate::domain::window_slice(a, job.arrival.plus_hours(-24), 24).map_err(|e| e.to_string())?;
        persistence_forecast(&hist, job.window_h()).map_err(|e| e.to_string())
    };
    let persistence: Vec<CarbonIntensitySeries> = (0..regions.len()).map(persistence_of).collect::<Result<_, _>>()?;
    let (pi, ps) = pick(&|i| Ok(persistence[i].clone()))?;
    let (si, ss) = pick(&|i| Ok(arrival_forecasts[i].forecast.clone()))?;

    let chosen = &regions[si];
    let state = run_heuristic(
        job.clone(),
        arrival_forecasts[si].forecast.clone(),
        &chosen.actual,
        |now| forecasters[si].at(now).map(|r| (*r).clone()),
    )
    .map_err(err)?;
    audit.record(job, &state.schedule, &state.events);
    let heur = state.schedule.realized_g.ok_or("heuristic schedule outside actuals")?;

    let deadline = job.deadline();
    let entries = [
        (Policy::Oracle, oracle, None),
        (
            Policy::Persistence,
            ps.realized_g.expect("actual attached"),
            Some((pi, &persistence[pi])),
        ),
        (
            Policy::Sarimax,
            ss.realized_g.expect("actual attached"),
            Some((si, &arrival_forecasts[si].forecast)),
        ),
        (Policy::Heuristic, heur, Some((si, &state.forecast))),
    ];
    for (policy, realized, forecast) in entries {
        let cell = cells.entry((key.clone(), policy)).or_default();
        cell.add(realized, oracle);
        if let Some((i, f)) = forecast {
            cell.add_pairs(&regions[i].actual, f, job.arrival, deadline);
        }
    }
    Ok(())
}

/// Replays trace jobs (continuous, slack = recorded wait) in every region.
/// Arrivals are the trace submit offsets wrapped onto the usable data span.
pub fn replay_workload(cfg: &RunConfig, trace: &WorkloadTrace) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    if cfg.regions.is_empty() {
        return Err(HarnessError::Config("no regions configured".into()));
    }
    if trace.jobs.is_empty() {
        return Err(HarnessError::Config("workload trace has no jobs".into()));
    }
    let (factors, regions, failed) = load_all(cfg)?;
    Ok(replay_on(&regions, &factors, cfg, trace, failed))
}

pub fn replay_on(
    regions: &[RegionData],
    factors: &EmissionFactorTable,
    cfg: &RunConfig,
    trace: &WorkloadTrace,
    failed: Vec<FailedRegion>,
) -> ExperimentOutput {
    let parts: Vec<ExperimentOutput> = regions
        .par_iter()
        .map(|d| replay_region(d, factors, cfg, trace))
        .collect();
    let mut out = ExperimentOutput {
        failed_regions: failed,
        ..Default::default()
    };
    for p in parts {
        out.merge(p);
    }
    out.sort();
    out
}

fn replay_region(
    data: &RegionData,
    factors: &EmissionFactorTable,
    cfg: &RunConfig,
    trace: &WorkloadTrace,
) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let train_h = cfg.train_hours();
    let first = data.mix.start().plus_hours(train_h as i64);
    let span = data.mix.end().hours_since(first);
    let mut jobs: Vec<(HourStamp, &crate::ingest::TraceJob)> = Vec::with_capacity(trace.jobs.len());
    for j in &trace.jobs {
        out.accounting.candidates += 1;
        if span <= 0 {
            out.accounting.dropped_span += 1;
            continue;
        }
        jobs.push((first.plus_hours((j.submit_h % span as u64) as i64), j));
    }
    jobs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));

    let mut forecaster = Forecaster::new(data, factors, cfg);
    let mut cells = Cells::new();
    let key = RowKey {
        region: data.name.clone(),
        mode: ResultMode::Continuous,
        length_h: None,
        slack_h: None,
    };
    let mut noop = Cell::default();
    for (arrival, tj) in jobs {
        forecaster.evict_before(arrival);
        let (length, slack) = (tj.runtime_h, tj.wait_h);
        let job = job_for(format!("trace-{}", tj.id), length, slack, arrival, JobMode::Continuous);
        if job.deadline() > data.mix.end() || job.window_h() > cfg.horizon_h as usize {
            out.accounting.dropped_span += 1;
            continue;
        }
        let Ok(initial) = forecaster.at(arrival) else {
            out.accounting.dropped_fit += 1;
            continue;
        };
        match evaluate_job(data, &mut forecaster, &job, &initial, &mut cells, &key, &mut out.audit) {
            Ok(ev) => {
                out.accounting.evaluated += 1;
                let run_now: f64 = (0..length as i64)
                    .map(|k| data.actual.value_at(arrival.plus_hours(k)).expect("window inside data"))
                    .sum::<f64>()
                    * job.power_kw;
                noop.add(run_now, ev.oracle);
                for (policy, _) in ev.realized {
                    cells.get_mut(&(key.clone(), policy)).expect("cell recorded").sum_noop += run_now;
                }
                noop.sum_noop += run_now;
            }
            Err(e) => {
                debug!("{}: trace job {} dropped: {e}", data.name, tj.id);
                out.accounting.dropped_fit += 1;
            }
        }
    }
    cells.insert((key.clone(), Policy::Noop), noop);
    out.results = cells
        .iter()
        .map(|((k, policy), cell)| {
            let mut r = cell.result(k, *policy, data.cv);
            if *policy == Policy::Noop {
                r.mape_pct = None;
                r.concordance_pct = None;
            }
            r.savings_pct = (cell.sum_noop > 0.0).then(|| 100.0 * (cell.sum_noop - cell.sum_realized) / cell.sum_noop);
            r
        })
        .collect();
    out
}

const RESULTS_HEADER: [&str; 13] = [
    "region",
    "policy",
    "mode",
    "length_h",
    "slack_h",
    "submissions",
    "mean_additional_pct",
    "mean_rho",
    "mape_pct",
    "concordance_pct",
    "cv",
    "mean_realized_g",
    "savings_pct",
];

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

#[derive(Debug, Serialize)]
struct PolicySummary {
    rows: usize,
    submissions: usize,
    mean_additional_pct: Option<f64>,
    mean_rho: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    policies: BTreeMap<String, PolicySummary>,
    failed_regions: &'a [FailedRegion],
    heuristic_audit: &'a HeuristicAudit,
    accounting: &'a Accounting,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| s / n as f64)
}

/// Writes `results.csv`, `summary.json` and `plotdata/` under `output_dir`.
pub fn emit_results(output: &ExperimentOutput, output_dir: &Path) -> Result<(), HarnessError> {
    let plot_dir = output_dir.join("plotdata");
    fs::create_dir_all(&plot_dir).map_err(io_err(&plot_dir))?;

    let path = output_dir.join("results.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in &output.results {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(&path))?;

    let mut policies: BTreeMap<String, Vec<&ExperimentResult>> = BTreeMap::new();
    for r in &output.results {
        policies
            .entry(format!("{}/{}", r.policy, r.mode.as_str()))
            .or_default()
            .push(r);
    }
    let summary = Summary {
        policies: policies
            .into_iter()
            .map(|(k, rows)| {
                let s = PolicySummary {
                    rows: rows.len(),
                    submissions: rows.iter().map(|r| r.submissions).sum(),
                    mean_additional_pct: mean(rows.iter().map(|r| r.mean_additional_pct)),
                    mean_rho: mean(rows.iter().map(|r| r.mean_rho)),
                };
                (k, s)
            })
            .collect(),
        failed_regions: &output.failed_regions,
        heuristic_audit: &output.audit,
        accounting: &output.accounting,
    };
    let path = output_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;

    // Mean additional emissions per (policy, slack), one file per mode.
    let mut per_slack: BTreeMap<ResultMode, BTreeMap<(Policy, u32), Vec<f64>>> = BTreeMap::new();
    for r in &output.results {
        if let Some(slack) = r.slack_h {
            per_slack
                .entry(r.mode)
                .or_default()
                .entry((r.policy, slack))
                .or_default()
                .push(r.mean_additional_pct);
        }
    }
    for (mode, groups) in per_slack {
        let path = plot_dir.join(format!("per_slack_{}.csv", mode.as_str()));
        let mut w = csv_writer(&path)?;
        w.write_record(["policy", "slack_h", "mean_additional_pct"])?;
        for ((policy, slack), v) in groups {
            let m = mean(v.into_iter()).unwrap_or(0.0);
            w.write_record([policy.as_str().to_string(), slack.to_string(), m.to_string()])?;
        }
        w.flush().map_err(io_err(&path))?;
    }

    let mut scatter: BTreeMap<(&str, Policy), (f64, Vec<f64>)> = BTreeMap::new();
    for r in &output.results {
        scatter
            .entry((&r.region, r.policy))
            .or_insert((r.cv, Vec::new()))
            .1
            .push(r.mean_additional_pct);
    }
    let path = plot_dir.join("cv_scatter.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["region", "policy", "cv", "mean_additional_pct"])?;
    for ((region, policy), (cv, v)) in scatter {
        let m = mean(v.into_iter()).unwrap_or(0.0);
        w.write_record([
            region.to_string(),
            policy.as_str().to_string(),
            cv.to_string(),
            m.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

/// Reads back a `results.csv` written by [`emit_results`].
pub fn read_results(path: &Path) -> Result<Vec<ExperimentResult>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().collect::<Result<_, _>>().map_err(HarnessError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{calendar_features, CALENDAR_COLUMNS};

    fn start() -> HourStamp {
        HourStamp::from_ymdh(2023, 1, 1, 0).unwrap()
    }

    fn factors() -> EmissionFactorTable {
        EmissionFactorTable::new(
            [("coal".to_string(), 900.0), ("solar".to_string(), 40.0)]
                .into_iter()
                .collect(),
        )
        .unwrap()
    }

    fn region(name: &str, hours: usize, solar: impl Fn(usize) -> f64) -> RegionData {
        let rows: Vec<Vec<f64>> = (0..hours).map(|t| vec![100.0, solar(t)]).collect();
        let mix = EnergyMixSeries::new(
            name,
            start(),
            vec!["coal".into(), "solar".into()],
            Matrix::from_rows(&rows, 2).unwrap(),
        )
        .unwrap();
        let cal: Vec<Vec<f64>> = (0..hours)
            .map(|t| calendar_features(start().plus_hours(t as i64)).to_vec())
            .collect();
        let exog = ExogenousFrame::new(
            start(),
            CALENDAR_COLUMNS.iter().map(|s| s.to_string()).collect(),
            Matrix::from_rows(&cal, 4).unwrap(),
        )
        .unwrap();
        RegionData::new(name, mix, exog, &factors()).unwrap()
    }

    fn cfg() -> RunConfig {
        RunConfig {
            regions: vec!["a".into()],
            train_days: 3,
            horizon_h: 24,
            job_lengths_h: vec![2],
            slacks_h: vec![6],
            ..RunConfig::default()
        }
    }

    #[test]
    fn constant_region_has_no_additional_emissions() {
        let d = region("a", 24 * 6, |_| 0.0);
        let out = temporal_on(&[d], &factors(), &cfg(), Vec::new());
        assert!(!out.results.is_empty());
        for r in &out.results {
            assert_eq!(r.mean_additional_pct, 0.0, "{r:?}");
            assert_eq!(r.mean_rho, 1.0);
        }
        assert!(out.accounting.reconciles());
    }

    #[test]
    fn periodic_region_oracle_rows_exact() {
        let d = region("a", 24 * 8, |t| if (10..15).contains(&(t % 24)) { 300.0 } else { 0.0 });
        let out = temporal_on(&[d], &factors(), &cfg(), Vec::new());
        for r in out.results.iter().filter(|r| r.policy == Policy::Oracle) {
            assert_eq!(r.mean_rho, 1.0);
            assert_eq!(r.mean_additional_pct, 0.0);
        }
        for r in &out.results {
            assert!(r.mean_rho >= 1.0 - 1e-12, "{r:?}");
        }
        assert_eq!(out.audit.deadline_violations, 0);
        assert_eq!(out.audit.emission_increases, 0);
        assert!(out.accounting.reconciles());
        assert!(out.accounting.evaluated > 0);
    }

    #[test]
    fn spatial_migrates_to_cleaner_region() {
        let dirty = region("a", 24 * 6, |_| 0.0);
        let clean = region("b", 24 * 6, |_| 400.0);
        let out = spatial_on(&[dirty, clean], &factors(), &cfg(), Vec::new());
        let oracle = out.results.iter().find(|r| r.policy == Policy::Oracle).unwrap();
        let sar = out.results.iter().find(|r| r.policy == Policy::Sarimax).unwrap();
        assert_eq!(oracle.region, "a+b");
        assert_eq!(sar.mean_additional_pct, 0.0);
    }

    #[test]
    fn replay_with_zero_wait_has_no_savings() {
        let d = region("a", 24 * 6, |t| (t % 24) as f64 * 10.0);
        let trace = WorkloadTrace {
            jobs: (0..5)
                .map(|i| crate::ingest::TraceJob {
                    id: i,
                    submit_h: i * 7,
                    runtime_h: 2,
                    wait_h: 0,
                })
                .collect(),
            dropped: 0,
        };
        let out = replay_on(&[d], &factors(), &cfg(), &trace, Vec::new());
        assert!(out.accounting.reconciles());
        assert_eq!(out.accounting.candidates, 5);
        for r in &out.results {
            assert_eq!(r.savings_pct, Some(0.0), "{r:?}");
        }
    }

    #[test]
    fn config_rejects_horizon_shorter_than_window() {
        let c = RunConfig { horizon_h: 6, ..cfg() };
        assert!(matches!(check_config(&c), Err(HarnessError::Config(_))));
    }

    #[test]
    fn emit_empty_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        emit_results(&ExperimentOutput::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text, RESULTS_HEADER.join(",") + "\n");
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(json["policies"].as_object().unwrap().is_empty());

        let row = ExperimentResult {
            region: "a".into(),
            policy: Policy::Sarimax,
            mode: ResultMode::Interruptible,
            length_h: Some(6),
            slack_h: Some(24),
            submissions: 3,
            mean_additional_pct: 1.25,
            mean_rho: 1.0125,
            mape_pct: Some(7.5),
            concordance_pct: None,
            cv: 0.3,
            mean_realized_g: 1234.5,
            savings_pct: None,
        };
        let out = ExperimentOutput {
            results: vec![row.clone()],
            ..Default::default()
        };
        emit_results(&out, dir.path()).unwrap();
        assert_eq!(read_results(&dir.path().join("results.csv")).unwrap(), vec![row]);
    }
}
