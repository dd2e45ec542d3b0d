//! File ingestion: hourly energy/weather/demand CSVs, Standard Workload
//! Format traces, emission-factor tables and the run configuration.
//!
//! Every loader has a `parse_*` twin that works on in-memory text; the
//! path-based functions only add file reading on top.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{
    calendar_features, CarbonIntensitySeries, DomainError, EmissionFactorTable, EnergyMixSeries, ExogenousFrame,
    HourStamp, Matrix, SeriesKind, CALENDAR_COLUMNS,
};

/// Longest run of missing hours that is filled by linear interpolation.
pub const MAX_INTERPOLATED_GAP_H: i64 = 3;

pub const WEATHER_COLUMNS: [&str; 4] = ["temperature_c", "wind_speed_ms", "solar_irradiance_wm2", "humidity_pct"];
pub const DEMAND_COLUMNS: [&str; 2] = ["demand_mwh", "demand_forecast_mwh"];
pub const FACTOR_HEADER: [&str; 2] = ["source", "factor_g_per_kwh"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("gap of {missing} missing hours after {after} exceeds the {MAX_INTERPOLATED_GAP_H}h interpolation limit")]
    Gap { after: HourStamp, missing: i64 },
    #[error("line {line}: timestamp {timestamp} does not follow the previous row")]
    NonMonotonic { line: u64, timestamp: HourStamp },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("weather and demand files share no hours")]
    EmptyJoin,
    #[error("emission factor for {source_name:?} is negative ({factor})")]
    NegativeFactor { source_name: String, factor: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Region id for a data file: its basename without extension.
pub fn region_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn csv_err(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { .. } => IngestError::Schema(format!("line {line}: wrong number of fields")),
        _ => IngestError::Parse {
            line,
            message: e.to_string(),
        },
    }
}

fn parse_number(field: &str, line: u64, column: &str) -> Result<f64, IngestError> {
    let v: f64 = field.parse().map_err(|_| IngestError::Parse {
        line,
        message: format!("column {column}: {field:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::Parse {
            line,
            message: format!("column {column}: non-finite value"),
        });
    }
    Ok(v)
}

/// An hourly table after gap filling: contiguous rows from `start`.
struct HourlyTable {
    columns: Vec<String>,
    start: HourStamp,
    values: Matrix,
}

/// Parses `timestamp,<col>...` rows, rejecting non-ascending timestamps and
/// interpolating short gaps.
fn parse_hourly_table(text: &str, expected: Option<&[&str]>) -> Result<HourlyTable, IngestError> {
    let mut rdr = csv_reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() || header.get(0) != Some("timestamp") {
        return Err(IngestError::Schema("first column must be `timestamp`".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if columns.is_empty() {
        return Err(IngestError::Schema("no value columns".into()));
    }
    if let Some(exp) = expected {
        if columns.len() != exp.len() || columns.iter().zip(exp).any(|(a, b)| a != b) {
            return Err(IngestError::Schema(format!(
                "expected columns timestamp,{}; found timestamp,{}",
                exp.join(","),
                columns.join(",")
            )));
        }
    }
    let ncol = columns.len();

    let mut start: Option<HourStamp> = None;
    let mut last: Option<(HourStamp, Vec<f64>)> = None;
    let mut data: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let ts: HourStamp = rec[0].parse().map_err(|e: DomainError| IngestError::Parse {
            line,
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(ncol);
        for (j, field) in rec.iter().skip(1).enumerate() {
            row.push(parse_number(field, line, &columns[j])?);
        }
        if let Some((prev_ts, prev_row)) = &last {
            let step = ts.hours_since(*prev_ts);
            if step <= 0 {
                return Err(IngestError::NonMonotonic { line, timestamp: ts });
            }
            let missing = step - 1;
            if missing > MAX_INTERPOLATED_GAP_H {
                return Err(IngestError::Gap {
                    after: *prev_ts,
                    missing,
                });
            }
            for k in 1..step {
                let w = k as f64 / step as f64;
                data.extend(prev_row.iter().zip(&row).map(|(a, b)| a + (b - a) * w));
                rows += 1;
            }
        } else {
            start = Some(ts);
        }
        data.extend_from_slice(&row);
        rows += 1;
        last = Some((ts, row));
    }
    let start = start.ok_or_else(|| IngestError::Schema("no data rows".into()))?;
    let values = Matrix::from_rows(&data.chunks(ncol).map(<[f64]>::to_vec).collect::<Vec<_>>(), ncol)?;
    debug_assert_eq!(values.rows(), rows);
    Ok(HourlyTable { columns, start, values })
}

/// Parses an energy-mix CSV (`timestamp,<source>_mwh,...`).
pub fn parse_energy_csv(region: &str, text: &str) -> Result<EnergyMixSeries, IngestError> {
    let table = parse_hourly_table(text, None)?;
    let mut sources = Vec::with_capacity(table.columns.len());
    for c in &table.columns {
        match c.strip_suffix("_mwh") {
            Some(s) if !s.is_empty() => sources.push(s.to_string()),
            _ => {
                return Err(IngestError::Schema(format!(
                    "energy column {c:?} must be named <source>_mwh"
                )))
            }
        }
    }
    if let Some(v) = table.values.values().iter().find(|v| **v < 0.0) {
        return Err(IngestError::Schema(format!("negative generation value {v}")));
    }
    EnergyMixSeries::new(region, table.start, sources, table.values).map_err(|e| match e {
        DomainError::InvalidSeries(m) => IngestError::Schema(m),
        other => other.into(),
    })
}

pub fn load_energy_csv(path: &Path) -> Result<EnergyMixSeries, IngestError> {
    parse_energy_csv(&region_from_path(path), &read(path)?)
}

/// Joins weather and demand tables on their common hours and appends the
/// calendar encodings.
pub fn parse_exogenous_csv(weather: &str, demand: &str) -> Result<ExogenousFrame, IngestError> {
    let w = parse_hourly_table(weather, Some(&WEATHER_COLUMNS))?;
    let d = parse_hourly_table(demand, Some(&DEMAND_COLUMNS))?;
    let w_end = w.start.plus_hours(w.values.rows() as i64);
    let d_end = d.start.plus_hours(d.values.rows() as i64);
    let start = w.start.max(d.start);
    let end = w_end.min(d_end);
    if end <= start {
        return Err(IngestError::EmptyJoin);
    }
    let len = end.hours_since(start) as usize;
    let w_off = start.hours_since(w.start) as usize;
    let d_off = start.hours_since(d.start) as usize;

    let mut columns: Vec<String> = WEATHER_COLUMNS.iter().map(|s| s.to_string()).collect();
    columns.extend(DEMAND_COLUMNS.iter().map(|s| s.to_string()));
    columns.extend(CALENDAR_COLUMNS.iter().map(|s| s.to_string()));
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let mut row = Vec::with_capacity(columns.len());
        row.extend_from_slice(w.values.row(w_off + i));
        row.extend_from_slice(d.values.row(d_off + i));
        row.extend_from_slice(&calendar_features(start.plus_hours(i as i64)));
        rows.push(row);
    }
    let cols = columns.len();
    Ok(ExogenousFrame::new(start, columns, Matrix::from_rows(&rows, cols)?)?)
}

pub fn load_exogenous_csv(path_weather: &Path, path_demand: &Path) -> Result<ExogenousFrame, IngestError> {
    parse_exogenous_csv(&read(path_weather)?, &read(path_demand)?)
}

/// Reads an hourly intensity CSV whose first value column holds g CO2eq/kWh.
/// Additional columns (such as per-source forecasts) are ignored.
pub fn parse_intensity_csv(region: &str, text: &str, kind: SeriesKind) -> Result<CarbonIntensitySeries, IngestError> {
    let table = parse_hourly_table(text, None)?;
    let values = table.values.column(0);
    CarbonIntensitySeries::new(region, table.start, values, kind).map_err(|e| match e {
        DomainError::InvalidSeries(m) => IngestError::Schema(m),
        other => other.into(),
    })
}

pub fn load_intensity_csv(path: &Path, kind: SeriesKind) -> Result<CarbonIntensitySeries, IngestError> {
    parse_intensity_csv(&region_from_path(path), &read(path)?, kind)
}

/// Parses a two-column `source,factor_g_per_kwh` table.
pub fn parse_emission_factors(text: &str) -> Result<EmissionFactorTable, IngestError> {
    let mut rdr = csv_reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != 2 || header.get(0) != Some(FACTOR_HEADER[0]) || header.get(1) != Some(FACTOR_HEADER[1]) {
        return Err(IngestError::Schema(format!(
            "emission factor header must be `{}`",
            FACTOR_HEADER.join(",")
        )));
    }
    let mut factors = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let source = rec[0].to_string();
        if source.is_empty() {
            return Err(IngestError::Schema(format!("line {line}: empty source name")));
        }
        let factor = parse_number(&rec[1], line, FACTOR_HEADER[1])?;
        if factor < 0.0 {
            return Err(IngestError::NegativeFactor {
                source_name: source,
                factor,
            });
        }
        if factors.insert(source.clone(), factor).is_some() {
            return Err(IngestError::Schema(format!("line {line}: duplicate source {source:?}")));
        }
    }
    if factors.is_empty() {
        return Err(IngestError::Schema("no emission factors".into()));
    }
    Ok(EmissionFactorTable::new(factors)?)
}

pub fn load_emission_factors(path: &Path) -> Result<EmissionFactorTable, IngestError> {
    parse_emission_factors(&read(path)?)
}

/// One job record from a workload trace, in whole hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceJob {
    pub id: u64,
    /// Submit time relative to the start of the trace.
    pub submit_h: u64,
    pub runtime_h: u32,
    pub wait_h: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorkloadTrace {
    pub jobs: Vec<TraceJob>,
    /// Records dropped for non-positive runtime or cancelled status.
    pub dropped: usize,
}

/// SWF status code for jobs cancelled before they ran.
const SWF_STATUS_CANCELLED: i64 = 5;

fn ceil_hours(seconds: f64) -> u64 {
    (seconds / 3600.0).ceil() as u64
}

/// Parses a Standard Workload Format trace. Fields used: 1 job id, 2 submit
/// time, 3 wait time, 4 run time (seconds) and, when present, 11 status.
pub fn parse_swf(text: &str) -> Result<WorkloadTrace, IngestError> {
    let mut trace = WorkloadTrace::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(IngestError::Parse {
                line: line_no,
                message: format!("expected at least 4 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize, name: &str| -> Result<f64, IngestError> { parse_number(fields[i], line_no, name) };
        let id = num(0, "job id")?;
        let submit = num(1, "submit time")?;
        let wait = num(2, "wait time")?;
        let runtime = num(3, "run time")?;
        if id < 0.0 || submit < 0.0 {
            return Err(IngestError::Parse {
                line: line_no,
                message: "job id and submit time must be non-negative".into(),
            });
        }
        let cancelled = fields
            .get(10)
            .and_then(|s| s.parse::<f64>().ok())
            .is_some_and(|s| s as i64 == SWF_STATUS_CANCELLED);
        if runtime <= 0.0 || cancelled {
            trace.dropped += 1;
            continue;
        }
        let runtime_h = ceil_hours(runtime);
        let wait_h = if wait > 0.0 { ceil_hours(wait) } else { 0 };
        trace.jobs.push(TraceJob {
            id: id as u64,
            submit_h: ceil_hours(submit),
            runtime_h: runtime_h.min(u32::MAX as u64) as u32,
            wait_h: wait_h.min(u32::MAX as u64) as u32,
        });
    }
    Ok(trace)
}

pub fn load_swf(path: &Path) -> Result<WorkloadTrace, IngestError> {
    parse_swf(&read(path)?)
}

/// Experiment configuration. Loaded from a flat `key = value` file whose keys
/// are exactly the field names; lists are comma separated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub regions: Vec<String>,
    pub data_dir: PathBuf,
    pub emission_factors_path: PathBuf,
    pub train_days: u32,
    pub horizon_h: u32,
    pub job_lengths_h: Vec<u32>,
    pub slacks_h: Vec<u32>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

pub const MAX_HORIZON_H: u32 = 168;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            regions: Vec::new(),
            data_dir: PathBuf::from("data"),
            emission_factors_path: PathBuf::from("data/emission_factors.csv"),
            train_days: 7,
            horizon_h: 24,
            job_lengths_h: vec![1, 6, 12, 24, 48, 96, 168],
            slacks_h: vec![12, 24, 48, 96, 168],
            seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, IngestError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| IngestError::Config(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, IngestError> {
    value
        .trim()
        .parse()
        .map_err(|_| IngestError::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Sets one field from its textual value. Used by both the file parser
    /// and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), IngestError> {
        match key {
            "regions" => self.regions = parse_list(key, value)?,
            "data_dir" => self.data_dir = PathBuf::from(value.trim()),
            "emission_factors_path" => self.emission_factors_path = PathBuf::from(value.trim()),
            "train_days" => self.train_days = parse_scalar(key, value)?,
            "horizon_h" => self.horizon_h = parse_scalar(key, value)?,
            "job_lengths_h" => self.job_lengths_h = parse_list(key, value)?,
            "slacks_h" => self.slacks_h = parse_list(key, value)?,
            "seed" => self.seed = parse_scalar(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            other => return Err(IngestError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig, IngestError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| IngestError::Config(format!("line {}: expected key = value", idx + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, IngestError> {
        let text = read(path)?;
        let mut cfg = RunConfig::parse(&text)?;
        // Relative paths in the file are relative to the file itself.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.data_dir, &mut cfg.emission_factors_path, &mut cfg.output_dir] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.train_days < 2 {
            return Err(IngestError::Config("train_days must be at least 2".into()));
        }
        if self.horizon_h == 0 || self.horizon_h > MAX_HORIZON_H {
            return Err(IngestError::Config(format!("horizon_h must be in 1..={MAX_HORIZON_H}")));
        }
        if self.job_lengths_h.contains(&0) {
            return Err(IngestError::Config("job lengths must be at least 1 hour".into()));
        }
        Ok(())
    }

    /// Renders the configuration in the file format read by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        format!(
            "regions = {}\ndata_dir = {}\nemission_factors_path = {}\ntrain_days = {}\nhorizon_h = {}\njob_lengths_h = {}\nslacks_h = {}\nseed = {}\noutput_dir = {}\n",
            self.regions.join(","),
            self.data_dir.display(),
            self.emission_factors_path.display(),
            self.train_days,
            self.horizon_h,
            join(&self.job_lengths_h),
            join(&self.slacks_h),
            self.seed,
            self.output_dir.display(),
        )
    }

    pub fn train_hours(&self) -> usize {
        self.train_days as usize * 24
    }

    /// Paths of the energy, weather and demand files for `region`.
    pub fn region_files(&self, region: &str) -> [PathBuf; 3] {
        let file = format!("{region}.csv");
        [
            self.data_dir.join("energy").join(&file),
            self.data_dir.join("weather").join(&file),
            self.data_dir.join("demand").join(&file),
        ]
    }
}
