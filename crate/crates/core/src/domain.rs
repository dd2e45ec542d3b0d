//! Value types shared by every other module.
//!
//! Everything here is immutable once constructed. Constructors check the
//! invariants each type carries so downstream code can rely on them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("requested span [{from}, +{len}h) is not covered by series starting {start} with {available} hours")]
    OutOfRange {
        start: HourStamp,
        available: usize,
        from: HourStamp,
        len: usize,
    },
    #[error("invalid timestamp {0:?}: expected YYYY-MM-DDTHH:00:00Z")]
    BadTimestamp(String),
    #[error("timestamp {0:?} is not aligned to the hour")]
    SubHourly(String),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid job: {0}")]
    InvalidJob(String),
    #[error("invalid schedule for job {job}: {reason}")]
    InvalidSchedule { job: String, reason: String },
}

/// A UTC instant truncated to the hour, stored as whole hours since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourStamp(i64);

impl HourStamp {
    pub const fn from_epoch_hours(hours: i64) -> Self {
        HourStamp(hours)
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Result<Self, DomainError> {
        if dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
            return Err(DomainError::SubHourly(dt.to_rfc3339()));
        }
        Ok(HourStamp(dt.timestamp().div_euclid(3600)))
    }

    pub fn from_ymdh(year: i32, month: u32, day: u32, hour: u32) -> Result<Self, DomainError> {
        let dt = Utc
            .with_ymd_and_hms(year, month, day, hour, 0, 0)
            .single()
            .ok_or_else(|| DomainError::BadTimestamp(format!("{year}-{month}-{day} {hour}h")))?;
        Self::from_datetime(dt)
    }

    pub const fn epoch_hours(self) -> i64 {
        self.0
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0 * 3600, 0).expect("hour stamp within chrono range")
    }

    pub const fn plus_hours(self, hours: i64) -> Self {
        HourStamp(self.0 + hours)
    }

    /// Signed number of hours from `earlier` to `self`.
    pub const fn hours_since(self, earlier: HourStamp) -> i64 {
        self.0 - earlier.0
    }

    /// Hour of day in 0..24 (UTC).
    pub fn hour_of_day(self) -> u32 {
        self.0.rem_euclid(24) as u32
    }

    /// Day of week in 0..7, Monday = 0.
    pub fn day_of_week(self) -> u32 {
        self.to_datetime().weekday().num_days_from_monday()
    }
}

impl fmt::Display for HourStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format("%Y-%m-%dT%H:00:00Z"))
    }
}

impl FromStr for HourStamp {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ")
            .map_err(|_| DomainError::BadTimestamp(s.to_string()))?;
        if naive.minute() != 0 || naive.second() != 0 {
            return Err(DomainError::SubHourly(s.to_string()));
        }
        HourStamp::from_datetime(Utc.from_utc_datetime(&naive))
    }
}

/// Row-major matrix with a fixed column count. Zero-column matrices still
/// carry a row count.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self, DomainError> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(DomainError::InvalidSeries(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>], rows: usize) -> Result<Self, DomainError> {
        let cols = columns.len();
        let mut m = Matrix::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(DomainError::InvalidSeries(format!(
                    "column {j} has {} values, expected {rows}",
                    c.len()
                )));
            }
            for (i, v) in c.iter().enumerate() {
                m.data[i * cols + j] = *v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn slice_rows(&self, from: usize, len: usize) -> Matrix {
        Matrix {
            rows: len,
            cols: self.cols,
            data: self.data[from * self.cols..(from + len) * self.cols].to_vec(),
        }
    }

    pub fn append_rows(&mut self, other: &Matrix) {
        assert_eq!(self.cols, other.cols, "column count mismatch");
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
    }
}

fn check_unique(names: &[String], what: &str) -> Result<(), DomainError> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(DomainError::InvalidSeries(format!("duplicate {what} {n:?}")));
        }
    }
    Ok(())
}

fn span_check(start: HourStamp, available: usize, from: HourStamp, len: usize) -> Result<usize, DomainError> {
    let offset = from.hours_since(start);
    if offset < 0 || offset as usize + len > available {
        return Err(DomainError::OutOfRange {
            start,
            available,
            from,
            len,
        });
    }
    Ok(offset as usize)
}

/// Hourly generation per source for one region, in MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMixSeries {
    region: String,
    start: HourStamp,
    sources: Vec<String>,
    generation: Matrix,
}

impl EnergyMixSeries {
    pub fn new(
        region: impl Into<String>,
        start: HourStamp,
        sources: Vec<String>,
        generation: Matrix,
    ) -> Result<Self, DomainError> {
        check_unique(&sources, "source")?;
        if generation.cols() != sources.len() {
            return Err(DomainError::InvalidSeries(format!(
                "{} sources but {} generation columns",
                sources.len(),
                generation.cols()
            )));
        }
        if let Some(v) = generation.values().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(DomainError::InvalidSeries(format!(
                "generation must be finite and non-negative, found {v}"
            )));
        }
        Ok(EnergyMixSeries {
            region: region.into(),
            start,
            sources,
            generation,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn start(&self) -> HourStamp {
        self.start
    }

    pub fn end(&self) -> HourStamp {
        self.start.plus_hours(self.len() as i64)
    }

    pub fn len(&self) -> usize {
        self.generation.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn generation(&self) -> &Matrix {
        &self.generation
    }

    pub fn source_series(&self, source_idx: usize) -> Vec<f64> {
        self.generation.column(source_idx)
    }

    pub fn slice(&self, from: HourStamp, len: usize) -> Result<EnergyMixSeries, DomainError> {
        let off = span_check(self.start, self.len(), from, len)?;
        Ok(EnergyMixSeries {
            region: self.region.clone(),
            start: from,
            sources: self.sources.clone(),
            generation: self.generation.slice_rows(off, len),
        })
    }
}

/// Direct-emission factor per source, grams CO2eq per kWh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmissionFactorTable {
    factors: BTreeMap<String, f64>,
}

impl EmissionFactorTable {
    pub fn new(factors: BTreeMap<String, f64>) -> Result<Self, DomainError> {
        if let Some((s, f)) = factors.iter().find(|(_, f)| !f.is_finite() || **f < 0.0) {
            return Err(DomainError::InvalidSeries(format!(
                "emission factor for {s:?} must be finite and >= 0, got {f}"
            )));
        }
        Ok(EmissionFactorTable { factors })
    }

    pub fn get(&self, source: &str) -> Option<f64> {
        self.factors.get(source).copied()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.factors.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Names of the calendar covariates appended at ingestion.
pub const CALENDAR_COLUMNS: [&str; 4] = ["hour_sin", "hour_cos", "dow_sin", "dow_cos"];

/// Deterministic calendar encoding of an hour: hour-of-day and day-of-week as
/// sin/cos pairs over periods 24 and 7.
pub fn calendar_features(t: HourStamp) -> [f64; 4] {
    use std::f64::consts::TAU;
    let h = t.hour_of_day() as f64 / 24.0;
    let d = t.day_of_week() as f64 / 7.0;
    [(TAU * h).sin(), (TAU * h).cos(), (TAU * d).sin(), (TAU * d).cos()]
}

pub fn is_calendar_column(name: &str) -> bool {
    CALENDAR_COLUMNS.contains(&name)
}

/// Hour-aligned covariates (weather, demand, calendar encodings).
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousFrame {
    start: HourStamp,
    columns: Vec<String>,
    values: Matrix,
}

impl ExogenousFrame {
    pub fn new(start: HourStamp, columns: Vec<String>, values: Matrix) -> Result<Self, DomainError> {
        check_unique(&columns, "covariate")?;
        if values.cols() != columns.len() {
            return Err(DomainError::InvalidSeries(format!(
                "{} covariate names but {} columns",
                columns.len(),
                values.cols()
            )));
        }
        if let Some(v) = values.values().iter().find(|v| !v.is_finite()) {
            return Err(DomainError::InvalidSeries(format!("non-finite covariate value {v}")));
        }
        Ok(ExogenousFrame { start, columns, values })
    }

    /// A frame with no covariates spanning `len` hours.
    pub fn empty(start: HourStamp, len: usize) -> Self {
        ExogenousFrame {
            start,
            columns: Vec::new(),
            values: Matrix::zeros(len, 0),
        }
    }

    pub fn start(&self) -> HourStamp {
        self.start
    }

    pub fn end(&self) -> HourStamp {
        self.start.plus_hours(self.len() as i64)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn slice(&self, from: HourStamp, len: usize) -> Result<ExogenousFrame, DomainError> {
        let off = span_check(self.start, self.len(), from, len)?;
        Ok(ExogenousFrame {
            start: from,
            columns: self.columns.clone(),
            values: self.values.slice_rows(off, len),
        })
    }

    /// Appends `next`, which must start where `self` ends and share its columns.
    pub fn concat(&self, next: &ExogenousFrame) -> Result<ExogenousFrame, DomainError> {
        if next.columns != self.columns {
            return Err(DomainError::InvalidSeries("covariate columns differ".into()));
        }
        if next.start != self.end() {
            return Err(DomainError::InvalidSeries(format!(
                "frame starting {} does not continue frame ending {}",
                next.start,
                self.end()
            )));
        }
        let mut values = self.values.clone();
        values.append_rows(&next.values);
        Ok(ExogenousFrame {
            start: self.start,
            columns: self.columns.clone(),
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Actual,
    Forecast,
    Oracle,
}

/// Hourly carbon intensity in g CO2eq/kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct CarbonIntensitySeries {
    region: String,
    start: HourStamp,
    values: Vec<f64>,
    kind: SeriesKind,
}

impl CarbonIntensitySeries {
    pub fn new(
        region: impl Into<String>,
        start: HourStamp,
        values: Vec<f64>,
        kind: SeriesKind,
    ) -> Result<Self, DomainError> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(DomainError::InvalidSeries(format!(
                "carbon intensity must be finite and non-negative, found {v}"
            )));
        }
        Ok(CarbonIntensitySeries {
            region: region.into(),
            start,
            values,
            kind,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn start(&self) -> HourStamp {
        self.start
    }

    pub fn end(&self) -> HourStamp {
        self.start.plus_hours(self.values.len() as i64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn covers(&self, from: HourStamp, len: usize) -> bool {
        span_check(self.start, self.len(), from, len).is_ok()
    }

    pub fn value_at(&self, t: HourStamp) -> Option<f64> {
        let off = t.hours_since(self.start);
        if off < 0 {
            return None;
        }
        self.values.get(off as usize).copied()
    }

    /// The oracle view of an actual series: same values, tagged for evaluation use.
    pub fn as_oracle(&self) -> CarbonIntensitySeries {
        CarbonIntensitySeries {
            kind: SeriesKind::Oracle,
            ..self.clone()
        }
    }

    pub fn with_kind(mut self, kind: SeriesKind) -> CarbonIntensitySeries {
        self.kind = kind;
        self
    }
}

/// Returns the contiguous sub-series `[from, from + len)`.
pub fn window_slice(
    series: &CarbonIntensitySeries,
    from: HourStamp,
    len: usize,
) -> Result<CarbonIntensitySeries, DomainError> {
    let off = span_check(series.start, series.len(), from, len)?;
    Ok(CarbonIntensitySeries {
        region: series.region.clone(),
        start: from,
        values: series.values[off..off + len].to_vec(),
        kind: series.kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobMode {
    Continuous,
    Interruptible,
}

impl fmt::Display for JobMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobMode::Continuous => "continuous",
            JobMode::Interruptible => "interruptible",
        })
    }
}

impl FromStr for JobMode {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continuous" => Ok(JobMode::Continuous),
            "interruptible" => Ok(JobMode::Interruptible),
            other => Err(DomainError::InvalidJob(format!("unknown mode {other:?}"))),
        }
    }
}

/// A flexible load: `length_h` hours of work to finish within
/// `length_h + slack_h` hours of `arrival`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: String,
    pub length_h: u32,
    pub slack_h: u32,
    pub arrival: HourStamp,
    pub mode: JobMode,
    pub power_kw: f64,
}

impl JobSpec {
    pub fn new(
        id: impl Into<String>,
        length_h: u32,
        slack_h: u32,
        arrival: HourStamp,
        mode: JobMode,
    ) -> Result<Self, DomainError> {
        Self::with_power(id, length_h, slack_h, arrival, mode, 1.0)
    }

    pub fn with_power(
        id: impl Into<String>,
        length_h: u32,
        slack_h: u32,
        arrival: HourStamp,
        mode: JobMode,
        power_kw: f64,
    ) -> Result<Self, DomainError> {
        if length_h == 0 {
            return Err(DomainError::InvalidJob("length_h must be at least 1".into()));
        }
        if !power_kw.is_finite() || power_kw <= 0.0 {
            return Err(DomainError::InvalidJob(format!(
                "power_kw must be positive, got {power_kw}"
            )));
        }
        Ok(JobSpec {
            id: id.into(),
            length_h,
            slack_h,
            arrival,
            mode,
            power_kw,
        })
    }

    /// W = L + T.
    pub fn window_h(&self) -> usize {
        (self.length_h + self.slack_h) as usize
    }

    /// First hour at which the job must no longer be running.
    pub fn deadline(&self) -> HourStamp {
        self.arrival.plus_hours(self.window_h() as i64)
    }
}

/// Execution hours chosen for a job, with predicted and (once evaluated) realized emissions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    job: String,
    hours: Vec<HourStamp>,
    pub predicted_g: f64,
    pub realized_g: Option<f64>,
}

impl Schedule {
    /// Checks containment in the job window, cardinality, and contiguity for
    /// continuous jobs.
    pub fn new(job: &JobSpec, mut hours: Vec<HourStamp>, predicted_g: f64) -> Result<Self, DomainError> {
        let bad = |reason: String| DomainError::InvalidSchedule {
            job: job.id.clone(),
            reason,
        };
        hours.sort();
        if hours.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("duplicate hour".into()));
        }
        if hours.len() != job.length_h as usize {
            return Err(bad(format!("{} hours for a {}h job", hours.len(), job.length_h)));
        }
        if hours.first().is_some_and(|h| *h < job.arrival) || hours.last().is_some_and(|h| *h >= job.deadline()) {
            return Err(bad(format!(
                "hours outside window [{}, {})",
                job.arrival,
                job.deadline()
            )));
        }
        if job.mode == JobMode::Continuous && hours.windows(2).any(|w| w[1].hours_since(w[0]) != 1) {
            return Err(bad("continuous job hours are not contiguous".into()));
        }
        Ok(Schedule {
            job: job.id.clone(),
            hours,
            predicted_g,
            realized_g: None,
        })
    }

    pub fn job(&self) -> &str {
        &self.job
    }

    pub fn hours(&self) -> &[HourStamp] {
        &self.hours
    }

    pub fn start(&self) -> HourStamp {
        self.hours[0]
    }

    /// One past the last scheduled hour.
    pub fn completion(&self) -> HourStamp {
        self.hours[self.hours.len() - 1].plus_hours(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t0() -> HourStamp {
        HourStamp::from_ymdh(2023, 1, 1, 0).unwrap()
    }

    fn series(n: usize) -> CarbonIntensitySeries {
        let v = (0..n).map(|i| i as f64).collect();
        CarbonIntensitySeries::new("r", t0(), v, SeriesKind::Actual).unwrap()
    }

    #[test]
    fn hourstamp_round_trips_through_text() {
        let t: HourStamp = "2023-03-05T17:00:00Z".parse().unwrap();
        assert_eq!(t.to_string(), "2023-03-05T17:00:00Z");
        assert_eq!(t.hour_of_day(), 17);
        // 2023-03-05 was a Sunday.
        assert_eq!(t.day_of_week(), 6);
    }

    #[test]
    fn hourstamp_rejects_sub_hourly() {
        assert!(matches!(
            "2023-03-05T17:30:00Z".parse::<HourStamp>(),
            Err(DomainError::SubHourly(_))
        ));
        assert!(matches!(
            "2023-03-05 17:00".parse::<HourStamp>(),
            Err(DomainError::BadTimestamp(_))
        ));
    }

    #[test]
    fn window_slice_identity() {
        let s = series(48);
        assert_eq!(window_slice(&s, t0(), 48).unwrap(), s);
    }

    #[test]
    fn window_slice_second_day() {
        let s = series(48);
        let d2 = window_slice(&s, t0().plus_hours(24), 24).unwrap();
        assert_eq!(d2.start(), t0().plus_hours(24));
        assert_eq!(d2.values(), &s.values()[24..]);
        assert_eq!(d2.kind(), SeriesKind::Actual);
    }

    #[test]
    fn window_slice_out_of_range() {
        let s = series(48);
        assert!(matches!(
            window_slice(&s, t0().plus_hours(40), 24),
            Err(DomainError::OutOfRange { .. })
        ));
        assert!(window_slice(&s, t0().plus_hours(-1), 2).is_err());
    }

    #[test]
    fn calendar_phase_zero_at_midnight() {
        let f = calendar_features(t0());
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 1.0);
    }

    #[test]
    fn schedule_invariants_enforced() {
        let job = JobSpec::new("j", 2, 2, t0(), JobMode::Continuous).unwrap();
        assert!(Schedule::new(&job, vec![t0().plus_hours(1), t0().plus_hours(2)], 1.0).is_ok());
        // Last feasible start is arrival + slack.
        assert!(Schedule::new(&job, vec![t0().plus_hours(2), t0().plus_hours(3)], 1.0).is_ok());
        assert!(Schedule::new(&job, vec![t0().plus_hours(3), t0().plus_hours(4)], 1.0).is_err());
        assert!(Schedule::new(&job, vec![t0(), t0().plus_hours(2)], 1.0).is_err());
        assert!(Schedule::new(&job, vec![t0()], 1.0).is_err());

        let ij = JobSpec::new("i", 2, 2, t0(), JobMode::Interruptible).unwrap();
        assert!(Schedule::new(&ij, vec![t0(), t0().plus_hours(3)], 1.0).is_ok());
        assert!(Schedule::new(&ij, vec![t0(), t0()], 1.0).is_err());
    }

    #[test]
    fn job_rejects_zero_length() {
        assert!(JobSpec::new("j", 0, 3, t0(), JobMode::Continuous).is_err());
    }

    #[test]
    fn energy_mix_rejects_negative_generation() {
        let m = Matrix::from_rows(&[vec![1.0, -1.0]], 2).unwrap();
        assert!(EnergyMixSeries::new("r", t0(), vec!["a".into(), "b".into()], m).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 1.0]], 2).unwrap();
        assert!(EnergyMixSeries::new("r", t0(), vec!["a".into(), "a".into()], m).is_err());
    }

    proptest! {
        #[test]
        fn window_slices_concatenate(n in 1usize..100, a in 0usize..100, k in 0usize..100, m in 0usize..100) {
            let s = series(n);
            let from = t0().plus_hours(a as i64);
            let whole = window_slice(&s, from, k + m);
            let left = window_slice(&s, from, k);
            let right = window_slice(&s, from.plus_hours(k as i64), m);
            match whole {
                Ok(w) => {
                    let mut joined = left.unwrap().values().to_vec();
                    joined.extend_from_slice(right.unwrap().values());
                    prop_assert_eq!(joined, w.values().to_vec());
                }
                Err(_) => prop_assert!(left.is_err() || right.is_err()),
            }
        }
    }
}
