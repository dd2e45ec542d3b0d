//! Choosing execution hours for flexible jobs, and the online rescheduling
//! heuristic that refits the forecast while a job waits to start.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{
    window_slice, CarbonIntensitySeries, DomainError, EmissionFactorTable, EnergyMixSeries, ExogenousFrame, HourStamp,
    JobMode, JobSpec, Schedule,
};
use crate::metrics::concordance;
use crate::pipeline::{forecast_carbon, CarbonForecast, PipelineError};

/// Realized hours needed before the concordance gate is consulted.
pub const MIN_GATE_HOURS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("{series} series covers {available}h from the job arrival; the window needs {needed}h")]
    SpanTooShort {
        series: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("job {job} is {actual}, not {expected}")]
    ModeMismatch {
        job: String,
        expected: JobMode,
        actual: JobMode,
    },
    #[error("no regions to choose from")]
    EmptyRegionSet,
    #[error("oracle emissions must be positive, got {0}")]
    ZeroOracle(f64),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A job together with the forecast (and optionally the realized) intensity
/// over its window.
#[derive(Debug, Clone)]
pub struct SchedulingProblem {
    job: JobSpec,
    forecast: Vec<f64>,
    actual: Option<Vec<f64>>,
}

fn window_values(
    series: &CarbonIntensitySeries,
    job: &JobSpec,
    label: &'static str,
) -> Result<Vec<f64>, SchedulerError> {
    let need = job.window_h();
    let available = usize::try_from(series.end().hours_since(job.arrival).max(0)).unwrap_or(0);
    if series.start() > job.arrival || available < need {
        return Err(SchedulerError::SpanTooShort {
            series: label,
            needed: need,
            available: if series.start() > job.arrival { 0 } else { available },
        });
    }
    Ok(window_slice(series, job.arrival, need)?.values().to_vec())
}

impl SchedulingProblem {
    pub fn new(
        job: JobSpec,
        forecast: &CarbonIntensitySeries,
        actual: Option<&CarbonIntensitySeries>,
    ) -> Result<Self, SchedulerError> {
        let f = window_values(forecast, &job, "forecast")?;
        let a = actual.map(|s| window_values(s, &job, "actual")).transpose()?;
        Ok(SchedulingProblem {
            job,
            forecast: f,
            actual: a,
        })
    }

    /// Builds a problem directly from window values (index 0 = arrival hour).
    pub fn from_values(job: JobSpec, forecast: Vec<f64>, actual: Option<Vec<f64>>) -> Result<Self, SchedulerError> {
        let need = job.window_h();
        for (label, len) in [
            ("forecast", Some(forecast.len())),
            ("actual", actual.as_ref().map(Vec::len)),
        ] {
            if let Some(len) = len {
                if len < need {
                    return Err(SchedulerError::SpanTooShort {
                        series: label,
                        needed: need,
                        available: len,
                    });
                }
            }
        }
        let mut forecast = forecast;
        forecast.truncate(need);
        let actual = actual.map(|mut a| {
            a.truncate(need);
            a
        });
        Ok(SchedulingProblem { job, forecast, actual })
    }

    pub fn job(&self) -> &JobSpec {
        &self.job
    }

    pub fn forecast(&self) -> &[f64] {
        &self.forecast
    }

    pub fn actual(&self) -> Option<&[f64]> {
        self.actual.as_deref()
    }

    /// The same job scheduled with perfect knowledge. `None` without actuals.
    pub fn oracle(&self) -> Option<SchedulingProblem> {
        self.actual.as_ref().map(|a| SchedulingProblem {
            job: self.job.clone(),
            forecast: a.clone(),
            actual: Some(a.clone()),
        })
    }
}

/// Offset of the cheapest contiguous `length`-hour window among starts
/// `0..=slack`, and its summed value. Earliest start wins ties.
pub fn cheapest_window(values: &[f64], length: usize, slack: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for start in 0..=slack {
        // Summed directly (not by a running difference) so equal windows compare equal.
        let sum: f64 = values[start..start + length].iter().sum();
        if sum < best.1 || start == 0 {
            best = (start, sum);
        }
    }
    best
}

/// Offsets of the `count` smallest values, earliest first among equals,
/// returned in ascending order.
pub fn cheapest_hours(values: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

fn finish(p: &SchedulingProblem, offsets: &[usize]) -> Result<Schedule, SchedulerError> {
    let power = p.job.power_kw;
    let predicted: f64 = offsets.iter().map(|&i| p.forecast[i]).sum::<f64>() * power;
    let hours = offsets.iter().map(|&i| p.job.arrival.plus_hours(i as i64)).collect();
    let mut s = Schedule::new(&p.job, hours, predicted)?;
    s.realized_g = p
        .actual
        .as_ref()
        .map(|a| offsets.iter().map(|&i| a[i]).sum::<f64>() * power);
    Ok(s)
}

fn expect_mode(job: &JobSpec, expected: JobMode) -> Result<(), SchedulerError> {
    if job.mode == expected {
        Ok(())
    } else {
        Err(SchedulerError::ModeMismatch {
            job: job.id.clone(),
            expected,
            actual: job.mode,
        })
    }
}

pub fn schedule_continuous(p: &SchedulingProblem) -> Result<Schedule, SchedulerError> {
    expect_mode(&p.job, JobMode::Continuous)?;
    let length = p.job.length_h as usize;
    let (start, _) = cheapest_window(&p.forecast, length, p.job.slack_h as usize);
    let offsets: Vec<usize> = (start..start + length).collect();
    finish(p, &offsets)
}

pub fn schedule_interruptible(p: &SchedulingProblem) -> Result<Schedule, SchedulerError> {
    expect_mode(&p.job, JobMode::Interruptible)?;
    finish(p, &cheapest_hours(&p.forecast, p.job.length_h as usize))
}

/// Dispatches on the job's mode.
pub fn schedule(p: &SchedulingProblem) -> Result<Schedule, SchedulerError> {
    match p.job.mode {
        JobMode::Continuous => schedule_continuous(p),
        JobMode::Interruptible => schedule_interruptible(p),
    }
}

/// Schedules the job in every region and keeps the one with the lowest
/// predicted emissions; the lexicographically first region wins ties.
pub fn schedule_spatial(problems: &BTreeMap<String, SchedulingProblem>) -> Result<(String, Schedule), SchedulerError> {
    let mut best: Option<(String, Schedule)> = None;
    for (region, p) in problems {
        let s = schedule(p)?;
        match &best {
            Some((_, b)) if !(s.predicted_g < b.predicted_g) => {}
            _ => best = Some((region.clone(), s)),
        }
    }
    best.ok_or(SchedulerError::EmptyRegionSet)
}

pub fn optimality_ratio(realized_g: f64, oracle_g: f64) -> Result<f64, SchedulerError> {
    if !(oracle_g > 0.0) || !oracle_g.is_finite() {
        return Err(SchedulerError::ZeroOracle(oracle_g));
    }
    Ok(realized_g / oracle_g)
}

/// A refreshed forecast issued at some hour, plus the refit model's
/// in-sample one-step estimates used by the concordance gate.
#[derive(Debug, Clone)]
pub struct RefitForecast {
    pub forecast: CarbonIntensitySeries,
    pub fitted: Option<CarbonIntensitySeries>,
}

impl From<CarbonForecast> for RefitForecast {
    fn from(f: CarbonForecast) -> Self {
        RefitForecast {
            forecast: f.values,
            fitted: f.fitted,
        }
    }
}

/// Refits the pipeline on `history` (which should end at the refit hour).
pub fn refit_forecast(
    history: &EnergyMixSeries,
    exog: &ExogenousFrame,
    factors: &EmissionFactorTable,
    horizon_h: usize,
    exog_future: Option<&ExogenousFrame>,
) -> Result<RefitForecast, PipelineError> {
    forecast_carbon(history, exog, factors, horizon_h, exog_future).map(RefitForecast::from)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeuristicEvent {
    Adopted {
        at: HourStamp,
        old_start: HourStamp,
        new_start: HourStamp,
        old_predicted_g: f64,
        new_predicted_g: f64,
    },
    Kept {
        at: HourStamp,
        reason: KeepReason,
    },
    FitFailed {
        at: HourStamp,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeepReason {
    ConcordanceNotBetter { old: f64, new: f64 },
    EmissionsNotLower { old: f64, new: f64 },
    ForecastTooShort,
}

/// State of one waiting job under the rescheduling heuristic.
#[derive(Debug, Clone)]
pub struct HeuristicState {
    /// The job as submitted; its deadline never changes.
    pub job: JobSpec,
    /// Arrival as of the last adopted update.
    pub current_arrival: HourStamp,
    pub schedule: Schedule,
    /// Forecast behind the incumbent schedule, issued at `current_arrival`.
    pub forecast: CarbonIntensitySeries,
    pub events: Vec<HeuristicEvent>,
}

impl HeuristicState {
    /// Schedules the job on the forecast issued at its arrival.
    pub fn start(job: JobSpec, forecast: CarbonIntensitySeries) -> Result<Self, SchedulerError> {
        let schedule = schedule(&SchedulingProblem::new(job.clone(), &forecast, None)?)?;
        Ok(HeuristicState {
            current_arrival: job.arrival,
            job,
            schedule,
            forecast,
            events: Vec::new(),
        })
    }

    /// Whether the job can still be moved at `now`.
    pub fn open_at(&self, now: HourStamp) -> bool {
        now <= self.schedule.start()
    }

    fn remaining_job(&self, now: HourStamp) -> JobSpec {
        let remaining = self.job.deadline().hours_since(now) as u32;
        JobSpec {
            arrival: now,
            slack_h: remaining - self.job.length_h,
            ..self.job.clone()
        }
    }
}

fn concordance_over(
    actual: &CarbonIntensitySeries,
    estimate: Option<&CarbonIntensitySeries>,
    from: HourStamp,
    to: HourStamp,
) -> Option<f64> {
    let estimate = estimate?;
    let (mut a, mut e) = (Vec::new(), Vec::new());
    let mut t = from;
    while t < to {
        if let (Some(x), Some(y)) = (actual.value_at(t), estimate.value_at(t)) {
            a.push(x);
            e.push(y);
        }
        t = t.plus_hours(1);
    }
    if a.len() < MIN_GATE_HOURS {
        return None;
    }
    concordance(&a, &e).ok()
}

/// One hourly step of the heuristic at `now`, given the refit outcome.
///
/// Only actual values strictly before `now` are read. The new schedule is
/// adopted when the refit orders the realized hours better than the
/// incumbent forecast (skipped with too little history) and its predicted
/// emissions are strictly lower than the incumbent's.
pub fn heuristic_update(
    state: &HeuristicState,
    now: HourStamp,
    refit: Result<&RefitForecast, String>,
    actual: &CarbonIntensitySeries,
) -> HeuristicState {
    let mut next = state.clone();
    if !state.open_at(now) || now < state.current_arrival {
        return next;
    }
    let refit = match refit {
        Ok(r) => r,
        Err(message) => {
            next.events.push(HeuristicEvent::FitFailed { at: now, message });
            return next;
        }
    };
    let old_ci = concordance_over(actual, Some(&state.forecast), state.current_arrival, now);
    let new_ci = concordance_over(actual, refit.fitted.as_ref(), state.current_arrival, now);
    if let (Some(old), Some(new)) = (old_ci, new_ci) {
        if !(new > old) {
            next.events.push(HeuristicEvent::Kept {
                at: now,
                reason: KeepReason::ConcordanceNotBetter { old, new },
            });
            return next;
        }
    }
    let job = state.remaining_job(now);
    let candidate = match SchedulingProblem::new(job, &refit.forecast, None).and_then(|p| schedule(&p)) {
        Ok(s) => s,
        Err(_) => {
            next.events.push(HeuristicEvent::Kept {
                at: now,
                reason: KeepReason::ForecastTooShort,
            });
            return next;
        }
    };
    let old_g = state.schedule.predicted_g;
    if candidate.predicted_g < old_g {
        next.events.push(HeuristicEvent::Adopted {
            at: now,
            old_start: state.schedule.start(),
            new_start: candidate.start(),
            old_predicted_g: old_g,
            new_predicted_g: candidate.predicted_g,
        });
        next.schedule = candidate;
        next.current_arrival = now;
        next.forecast = refit.forecast.clone();
    } else {
        next.events.push(HeuristicEvent::Kept {
            at: now,
            reason: KeepReason::EmissionsNotLower {
                old: old_g,
                new: candidate.predicted_g,
            },
        });
    }
    next
}

/// Runs the heuristic hour by hour from `arrival + 1` while the job has not
/// started, then evaluates the final schedule against `actual`.
pub fn run_heuristic<F>(
    job: JobSpec,
    initial: CarbonIntensitySeries,
    actual: &CarbonIntensitySeries,
    mut refit: F,
) -> Result<HeuristicState, SchedulerError>
where
    F: FnMut(HourStamp) -> Result<RefitForecast, String>,
{
    let mut state = HeuristicState::start(job, initial)?;
    let mut now = state.job.arrival.plus_hours(1);
    while state.open_at(now) {
        let r = refit(now);
        state = heuristic_update(&state, now, r.as_ref().map_err(Clone::clone), actual);
        now = now.plus_hours(1);
    }
    let realized: Option<f64> = state
        .schedule
        .hours()
        .iter()
        .map(|&h| actual.value_at(h))
        .sum::<Option<f64>>()
        .map(|s| s * state.job.power_kw);
    state.schedule.realized_g = realized;
    Ok(state)
}
