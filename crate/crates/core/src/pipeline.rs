//! Forecasting pipeline: covariate extension, per-source SARIMAX forecasts
//! and aggregation of the forecast mix into carbon intensity.

use std::f64::consts::TAU;

use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{
    calendar_features, CarbonIntensitySeries, DomainError, EmissionFactorTable, EnergyMixSeries, ExogenousFrame,
    HourStamp, Matrix, SeriesKind,
};
use crate::linalg::ols_with_intercept;
use crate::metrics::mape;
use crate::sarimax::{SarimaxError, SarimaxModel, MAX_HORIZON_H, MIN_FIT_LEN, SEASON};

/// Hours held out when choosing a covariate forecaster.
pub const VALIDATION_H: usize = 24;
/// Fourier harmonics per seasonal period in the trend regressor.
pub const FOURIER_HARMONICS: usize = 3;
pub const FOURIER_PERIODS: [f64; 2] = [24.0, 168.0];
/// Scores closer than this are treated as ties.
const SCORE_TIE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("history of {len} hours is too short; need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("no emission factor for source {0:?}")]
    MissingFactor(String),
    #[error("total generation is zero at {0}")]
    ZeroGenerationHour(HourStamp),
    #[error("forecast horizon must be in 1..={MAX_HORIZON_H}, got {0}")]
    InvalidHorizon(usize),
    #[error("covariates do not cover the training window: {0}")]
    ExogCoverage(String),
    #[error("source {source_name}: {error}")]
    Sarimax { source_name: String, error: SarimaxError },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Generation-weighted mean emission factor per hour.
pub fn aggregate_intensity(
    mix: &EnergyMixSeries,
    factors: &EmissionFactorTable,
) -> Result<CarbonIntensitySeries, PipelineError> {
    let f: Vec<f64> = mix
        .sources()
        .iter()
        .map(|s| factors.get(s).ok_or_else(|| PipelineError::MissingFactor(s.clone())))
        .collect::<Result<_, _>>()?;
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g = mix.generation();
    let mut values = Vec::with_capacity(mix.len());
    for t in 0..mix.len() {
        let row = g.row(t);
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            return Err(PipelineError::ZeroGenerationHour(mix.start().plus_hours(t as i64)));
        }
        let ci: f64 = row.iter().zip(&f).map(|(gen, fac)| (gen / total) * fac).sum();
        values.push(ci.clamp(lo, hi));
    }
    Ok(CarbonIntensitySeries::new(
        mix.region(),
        mix.start(),
        values,
        SeriesKind::Actual,
    )?)
}

/// Repeats the last observed day cyclically for `horizon_h` hours.
pub fn persistence_forecast(
    actual: &CarbonIntensitySeries,
    horizon_h: usize,
) -> Result<CarbonIntensitySeries, PipelineError> {
    if actual.len() < SEASON {
        return Err(PipelineError::TooShort {
            len: actual.len(),
            min: SEASON,
        });
    }
    if horizon_h == 0 {
        return Err(PipelineError::InvalidHorizon(0));
    }
    let last = &actual.values()[actual.len() - SEASON..];
    let values = (0..horizon_h).map(|i| last[i % SEASON]).collect();
    Ok(CarbonIntensitySeries::new(
        actual.region(),
        actual.end(),
        values,
        SeriesKind::Forecast,
    )?)
}

/// Candidate covariate forecasters, in tie-break order (cheapest first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExogKind {
    SeasonalNaive,
    FourierTrend,
    Sarimax,
}

impl ExogKind {
    pub const ALL: [ExogKind; 3] = [ExogKind::SeasonalNaive, ExogKind::FourierTrend, ExogKind::Sarimax];
}

#[derive(Debug, Clone)]
enum ExogState {
    SeasonalNaive { last_cycle: Vec<f64> },
    FourierTrend { intercept: f64, coef: Vec<f64> },
    Sarimax(Box<SarimaxModel>),
}

/// A univariate forecaster for one covariate column.
#[derive(Debug, Clone)]
pub struct ExogForecaster {
    kind: ExogKind,
    state: ExogState,
    n_obs: usize,
    /// Held-out MAPE of each candidate when chosen by [`select_exog_forecaster`].
    pub validation_mape: Vec<(ExogKind, f64)>,
}

fn fourier_row(t: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + 2 * FOURIER_HARMONICS * FOURIER_PERIODS.len());
    row.push(t);
    for period in FOURIER_PERIODS {
        for k in 1..=FOURIER_HARMONICS {
            let w = TAU * k as f64 * t / period;
            row.push(w.sin());
            row.push(w.cos());
        }
    }
    row
}

impl ExogForecaster {
    pub fn fit(kind: ExogKind, history: &[f64]) -> Result<ExogForecaster, PipelineError> {
        let n = history.len();
        let state = match kind {
            ExogKind::SeasonalNaive => {
                if n < SEASON {
                    return Err(PipelineError::TooShort { len: n, min: SEASON });
                }
                ExogState::SeasonalNaive {
                    last_cycle: history[n - SEASON..].to_vec(),
                }
            }
            ExogKind::FourierTrend => {
                let rows: Vec<Vec<f64>> = (0..n).map(|t| fourier_row(t as f64)).collect();
                let k = rows.first().map_or(0, Vec::len);
                let columns: Vec<Vec<f64>> = (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
                let fit = ols_with_intercept(history, &columns);
                ExogState::FourierTrend {
                    intercept: fit.intercept,
                    coef: fit.beta,
                }
            }
            ExogKind::Sarimax => {
                let frame = ExogenousFrame::empty(HourStamp::from_epoch_hours(0), n);
                let model = SarimaxModel::fit(history, &frame).map_err(|error| PipelineError::Sarimax {
                    source_name: "covariate".into(),
                    error,
                })?;
                ExogState::Sarimax(Box::new(model))
            }
        };
        Ok(ExogForecaster {
            kind,
            state,
            n_obs: n,
            validation_mape: Vec::new(),
        })
    }

    pub fn kind(&self) -> ExogKind {
        self.kind
    }

    /// Forecast of the `h` values following the fitted history. Covariates
    /// may legitimately be negative, so nothing is clamped.
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>, PipelineError> {
        Ok(match &self.state {
            ExogState::SeasonalNaive { last_cycle } => (0..h).map(|i| last_cycle[i % SEASON]).collect(),
            ExogState::FourierTrend { intercept, coef } => (0..h)
                .map(|i| {
                    let row = fourier_row((self.n_obs + i) as f64);
                    intercept + row.iter().zip(coef).map(|(x, b)| x * b).sum::<f64>()
                })
                .collect(),
            ExogState::Sarimax(model) => {
                let frame = ExogenousFrame::empty(HourStamp::from_epoch_hours(0), h);
                model
                    .forecast_unclamped(h, &frame)
                    .map_err(|error| PipelineError::Sarimax {
                        source_name: "covariate".into(),
                        error,
                    })?
            }
        })
    }
}

/// Scores each candidate on the trailing `validation_h` hours and refits the
/// best one on the full history. Ties go to the cheaper candidate.
pub fn select_exog_forecaster(history: &[f64], validation_h: usize) -> Result<ExogForecaster, PipelineError> {
    let min = validation_h + MIN_FIT_LEN;
    if history.len() < min {
        return Err(PipelineError::TooShort {
            len: history.len(),
            min,
        });
    }
    let split = history.len() - validation_h;
    let (train, holdout) = history.split_at(split);
    let mut scores = Vec::with_capacity(ExogKind::ALL.len());
    let mut best: Option<(ExogKind, f64)> = None;
    for kind in ExogKind::ALL {
        let score = ExogForecaster::fit(kind, train)
            .and_then(|f| f.forecast(validation_h))
            .ok()
            .and_then(|pred| mape(holdout, &pred).ok())
            .filter(|s| s.is_finite())
            .unwrap_or(f64::INFINITY);
        scores.push((kind, score));
        match best {
            Some((_, b)) if !(score < b - SCORE_TIE) => {}
            _ => best = Some((kind, score)),
        }
    }
    let (kind, _) = best.expect("at least one candidate");
    let mut chosen = ExogForecaster::fit(kind, history)?;
    chosen.validation_mape = scores;
    Ok(chosen)
}

/// Builds the covariate rows for `[train.end(), train.end() + horizon_h)`.
///
/// `provided` holds ahead-of-time values (for instance a demand forecast)
/// for any subset of the training columns, matched by name; it must start at
/// `train.end()`. Hours it does not cover are forecast from each column's
/// history by its selected [`ExogForecaster`]. Calendar columns are computed.
pub fn extend_exogenous(
    train: &ExogenousFrame,
    horizon_h: usize,
    provided: Option<&ExogenousFrame>,
) -> Result<ExogenousFrame, PipelineError> {
    let end = train.end();
    let known = provided.filter(|p| p.start() <= end && p.end() > end);
    let have = known.map_or(0, |p| {
        usize::try_from(p.end().hours_since(end)).unwrap_or(0).min(horizon_h)
    });
    let mut columns = Vec::with_capacity(train.columns().len());
    for (j, name) in train.columns().iter().enumerate() {
        if let Some(cal_idx) = crate::domain::CALENDAR_COLUMNS.iter().position(|c| c == name) {
            columns.push(
                (0..horizon_h)
                    .map(|i| calendar_features(end.plus_hours(i as i64))[cal_idx])
                    .collect::<Vec<f64>>(),
            );
            continue;
        }
        let ahead: Vec<f64> = match known.and_then(|p| p.column_index(name).map(|k| (p, k))) {
            Some((p, k)) => p.slice(end, have)?.column(k),
            None => Vec::new(),
        };
        let mut col = ahead;
        if col.len() < horizon_h {
            let mut history = train.column(j);
            history.extend_from_slice(&col);
            let f = select_exog_forecaster(&history, VALIDATION_H)?;
            col.extend(f.forecast(horizon_h - col.len())?);
        }
        columns.push(col);
    }
    Ok(ExogenousFrame::new(
        end,
        train.columns().to_vec(),
        Matrix::from_columns(&columns, horizon_h)?,
    )?)
}

/// Carbon-intensity forecast issued at the end of a training window.
#[derive(Debug, Clone)]
pub struct CarbonForecast {
    pub region: String,
    pub issued_at: HourStamp,
    pub horizon_h: usize,
    pub values: CarbonIntensitySeries,
    /// Forecast generation per source for the horizon.
    pub per_source: EnergyMixSeries,
    /// One-step in-sample intensity estimates over the training window (from
    /// its 25th hour on), when they aggregate cleanly.
    pub fitted: Option<CarbonIntensitySeries>,
    pub models: Vec<(String, SarimaxModel)>,
}

/// Forecasts `mix` forward `horizon_h` hours and aggregates to intensity.
pub fn forecast_carbon(
    mix: &EnergyMixSeries,
    exog: &ExogenousFrame,
    factors: &EmissionFactorTable,
    horizon_h: usize,
    exog_future: Option<&ExogenousFrame>,
) -> Result<CarbonForecast, PipelineError> {
    if horizon_h == 0 || horizon_h > MAX_HORIZON_H {
        return Err(PipelineError::InvalidHorizon(horizon_h));
    }
    for s in mix.sources() {
        if factors.get(s).is_none() {
            return Err(PipelineError::MissingFactor(s.clone()));
        }
    }
    if mix.len() < MIN_FIT_LEN {
        return Err(PipelineError::TooShort {
            len: mix.len(),
            min: MIN_FIT_LEN,
        });
    }
    let train = exog
        .slice(mix.start(), mix.len())
        .map_err(|e| PipelineError::ExogCoverage(e.to_string()))?;
    let future = extend_exogenous(&train, horizon_h, exog_future)?;

    let fits: Vec<(String, SarimaxModel)> = mix
        .sources()
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            SarimaxModel::fit(&mix.source_series(j), &train)
                .map(|m| (name.clone(), m))
                .map_err(|error| PipelineError::Sarimax {
                    source_name: name.clone(),
                    error,
                })
        })
        .collect::<Result<_, _>>()?;

    let mut result = forecast_with_models(mix.region(), mix.end(), &fits, factors, horizon_h, &future)?;
    result.fitted = fitted_intensity(mix, &fits, factors);
    result.models = fits;
    Ok(result)
}

/// Forecast from already-fitted per-source models, in the order of `models`.
pub fn forecast_with_models(
    region: &str,
    issued_at: HourStamp,
    models: &[(String, SarimaxModel)],
    factors: &EmissionFactorTable,
    horizon_h: usize,
    exog_future: &ExogenousFrame,
) -> Result<CarbonForecast, PipelineError> {
    let columns: Vec<Vec<f64>> = models
        .iter()
        .map(|(name, m)| {
            m.forecast(horizon_h, exog_future)
                .map_err(|error| PipelineError::Sarimax {
                    source_name: name.clone(),
                    error,
                })
        })
        .collect::<Result<_, _>>()?;
    let sources: Vec<String> = models.iter().map(|(n, _)| n.clone()).collect();
    let per_source = EnergyMixSeries::new(region, issued_at, sources, Matrix::from_columns(&columns, horizon_h)?)?;
    let values = aggregate_intensity(&per_source, factors)?.with_kind(SeriesKind::Forecast);
    Ok(CarbonForecast {
        region: region.to_string(),
        issued_at,
        horizon_h,
        values,
        per_source,
        fitted: None,
        models: models.to_vec(),
    })
}

fn fitted_intensity(
    mix: &EnergyMixSeries,
    fits: &[(String, SarimaxModel)],
    factors: &EmissionFactorTable,
) -> Option<CarbonIntensitySeries> {
    let len = mix.len() - SEASON;
    let columns: Vec<Vec<f64>> = fits
        .iter()
        .map(|(_, m)| m.fitted.iter().map(|v| v.max(0.0)).collect())
        .collect();
    let matrix = Matrix::from_columns(&columns, len).ok()?;
    let series = EnergyMixSeries::new(
        mix.region(),
        mix.start().plus_hours(SEASON as i64),
        mix.sources().to_vec(),
        matrix,
    )
    .ok()?;
    aggregate_intensity(&series, factors)
        .ok()
        .map(|s| s.with_kind(SeriesKind::Forecast))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn t0() -> HourStamp {
        HourStamp::from_ymdh(2023, 5, 1, 0).unwrap()
    }

    fn factors(pairs: &[(&str, f64)]) -> EmissionFactorTable {
        EmissionFactorTable::new(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
        )
        .unwrap()
    }

    fn mix(sources: &[&str], rows: Vec<Vec<f64>>) -> EnergyMixSeries {
        let k = sources.len();
        EnergyMixSeries::new(
            "r",
            t0(),
            sources.iter().map(|s| s.to_string()).collect(),
            Matrix::from_rows(&rows, k).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let f = factors(&[("coal", 1000.0), ("solar", 0.0), ("gas", 500.0)]);
        let two = aggregate_intensity(&mix(&["coal", "solar"], vec![vec![50.0, 50.0]]), &f).unwrap();
        assert_eq!(two.values(), &[500.0]);
        let one = aggregate_intensity(&mix(&["coal"], vec![vec![100.0]]), &factors(&[("coal", 820.0)])).unwrap();
        assert_eq!(one.values(), &[820.0]);
        let three = aggregate_intensity(&mix(&["coal", "gas", "solar"], vec![vec![20.0, 30.0, 50.0]]), &f).unwrap();
        assert!((three.values()[0] - 350.0).abs() < 1e-12 * 350.0);
    }

    #[test]
    fn aggregate_errors() {
        let f = factors(&[("coal", 1000.0)]);
        assert_eq!(
            aggregate_intensity(&mix(&["coal", "wind"], vec![vec![1.0, 1.0]]), &f).unwrap_err(),
            PipelineError::MissingFactor("wind".into())
        );
        assert!(matches!(
            aggregate_intensity(&mix(&["coal"], vec![vec![1.0], vec![0.0]]), &f),
            Err(PipelineError::ZeroGenerationHour(_))
        ));
    }

    fn ci(values: Vec<f64>) -> CarbonIntensitySeries {
        CarbonIntensitySeries::new("r", t0(), values, SeriesKind::Actual).unwrap()
    }

    #[test]
    fn persistence_examples() {
        let day: Vec<f64> = (1..=24).map(|v| v as f64).collect();
        let mut hist = vec![99.0; 24];
        hist.extend(day.iter().copied());
        let p = persistence_forecast(&ci(hist.clone()), 48).unwrap();
        assert_eq!(&p.values()[..24], day.as_slice());
        assert_eq!(&p.values()[24..], day.as_slice());
        assert_eq!(p.start(), t0().plus_hours(48));
        assert_eq!(p.kind(), SeriesKind::Forecast);
        let p12 = persistence_forecast(&ci(hist), 12).unwrap();
        assert_eq!(p12.values(), &day[..12]);
        assert!(matches!(
            persistence_forecast(&ci(vec![1.0; 23]), 24),
            Err(PipelineError::TooShort { .. })
        ));
    }

    #[test]
    fn select_prefers_seasonal_naive_on_periodic() {
        let h: Vec<f64> = (0..120).map(|t| 10.0 + ((t % 24) as f64).powi(2)).collect();
        let f = select_exog_forecaster(&h, VALIDATION_H).unwrap();
        assert_eq!(f.kind(), ExogKind::SeasonalNaive);
        assert_eq!(f.validation_mape[0], (ExogKind::SeasonalNaive, 0.0));
    }

    #[test]
    fn select_prefers_trend_on_ramp() {
        let h: Vec<f64> = (0..120).map(|t| 5.0 + 2.0 * t as f64).collect();
        let f = select_exog_forecaster(&h, VALIDATION_H).unwrap();
        // Seasonal naive lags the ramp by 48 units every hour of the tail.
        let naive = f.validation_mape[0].1;
        let expected_naive: f64 = (96..120).map(|t| 48.0 / (5.0 + 2.0 * t as f64)).sum::<f64>() / 24.0 * 100.0;
        assert!((naive - expected_naive).abs() < 1e-9);
        assert!(f.validation_mape[1].1 < 1e-6);
        assert_eq!(f.kind(), ExogKind::FourierTrend);
        let next = f.forecast(3).unwrap();
        assert!((next[0] - 245.0).abs() < 1e-6);
    }

    #[test]
    fn select_rejects_short_history() {
        assert_eq!(
            select_exog_forecaster(&[1.0; 72], VALIDATION_H).unwrap_err(),
            PipelineError::TooShort { len: 72, min: 73 }
        );
    }

    #[test]
    fn extend_accepts_a_subset_of_columns() {
        let n = 120;
        let cols = vec!["temperature_c".to_string(), "demand_mwh".to_string()];
        let temp: Vec<f64> = (0..n).map(|t| ((t % 24) as f64) * 0.5).collect();
        let demand: Vec<f64> = (0..n).map(|t| 100.0 + t as f64).collect();
        let train = ExogenousFrame::new(t0(), cols, Matrix::from_columns(&[temp, demand], n).unwrap()).unwrap();
        let ahead = ExogenousFrame::new(
            train.end(),
            vec!["demand_mwh".to_string()],
            Matrix::from_columns(&[vec![7.0; 5]], 5).unwrap(),
        )
        .unwrap();
        let ext = extend_exogenous(&train, 8, Some(&ahead)).unwrap();
        for i in 0..8 {
            let t = n + i;
            assert!((ext.row(i)[0] - ((t % 24) as f64) * 0.5).abs() < 1e-9);
        }
        assert_eq!(&ext.column(1)[..5], &[7.0; 5]);
        // The last three demand hours continue the ramp extended by the provided values.
        assert!(ext.column(1)[5..].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn extend_uses_provided_rows_then_forecasts() {
        let n = 120;
        let cols = vec!["temperature_c".to_string(), "hour_sin".to_string()];
        let temp: Vec<f64> = (0..n + 10).map(|t| ((t % 24) as f64) - 5.0).collect();
        let hsin: Vec<f64> = (0..n + 10)
            .map(|t| calendar_features(t0().plus_hours(t as i64))[0])
            .collect();
        let full = ExogenousFrame::new(
            t0(),
            cols,
            Matrix::from_columns(&[temp.clone(), hsin.clone()], n + 10).unwrap(),
        )
        .unwrap();
        let train = full.slice(t0(), n).unwrap();
        let provided = full.slice(t0().plus_hours(n as i64), 10).unwrap();
        let ext = extend_exogenous(&train, 30, Some(&provided)).unwrap();
        assert_eq!(ext.len(), 30);
        assert_eq!(ext.start(), train.end());
        for i in 0..30 {
            let t = n + i;
            assert!((ext.row(i)[0] - (((t % 24) as f64) - 5.0)).abs() < 1e-9, "row {i}");
            assert_eq!(ext.row(i)[1], calendar_features(t0().plus_hours(t as i64))[0]);
        }
    }
}
