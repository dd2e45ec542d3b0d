//! Regression with seasonal ARIMA(1,0,1)(1,1,1) errors at period 24.
//!
//! Estimation works on the seasonally differenced series:
//!
//! 1. `dy_t = y_t - y_{t-24}` and likewise for every covariate;
//! 2. `dy` is regressed on the differenced covariates plus an intercept (OLS),
//!    leaving residuals `z`;
//! 3. the four ARMA coefficients minimize the conditional sum of squares of
//!    the multiplicative recursion
//!
//! ```text
//! e_t = z_t - ar*z_{t-1} - sar*z_{t-24} + ar*sar*z_{t-25}
//!           - ma*e_{t-1} - sma*e_{t-24} - ma*sma*e_{t-25}
//! ```
//!
//! with pre-sample `z` and `e` set to zero. Coefficients are searched in an
//! unconstrained space and mapped to (-0.99, 0.99) through `0.99 * tanh(u)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::domain::ExogenousFrame;
use crate::linalg::ols_with_intercept;
use crate::optim::{minimize, NelderMeadConfig};

/// Seasonal period in hours.
pub const SEASON: usize = 24;
/// Shortest series `fit` accepts: more than two seasons after differencing.
pub const MIN_FIT_LEN: usize = 2 * SEASON + 1;
pub const MAX_HORIZON_H: usize = 168;
/// History kept for the forecast recursion (lags up to 25).
const HISTORY: usize = SEASON + 1;
const COEF_BOUND: f64 = 0.99;
const INIT_AR: f64 = 0.3;
const INIT_MA: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SarimaxError {
    #[error("series of length {len} is too short; at least {min} observations are required")]
    TooShort { len: usize, min: usize },
    #[error("series has {series} observations but the covariate frame has {frame} rows")]
    LengthMismatch { series: usize, frame: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("forecast horizon {0}h exceeds the {MAX_HORIZON_H}h limit")]
    HorizonTooLong(usize),
    #[error("forecast horizon must be at least one hour")]
    ZeroHorizon,
    #[error("covariates do not match the fitted model: {0}")]
    ExogMismatch(String),
    #[error("model text line {line}: {message}")]
    ModelFormat { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarimaxParams {
    /// Non-seasonal AR coefficient, lag 1.
    pub ar1: f64,
    /// Seasonal AR coefficient, lag 24.
    pub seasonal_ar1: f64,
    /// Non-seasonal MA coefficient, lag 1.
    pub ma1: f64,
    /// Seasonal MA coefficient, lag 24.
    pub seasonal_ma1: f64,
    /// Drift of the differenced series.
    pub intercept: f64,
    /// One coefficient per covariate column; dropped columns carry 0.
    pub beta: Vec<f64>,
    /// Mean squared in-sample residual.
    pub sigma2: f64,
}

impl SarimaxParams {
    fn arma(&self) -> [f64; 4] {
        [self.ar1, self.seasonal_ar1, self.ma1, self.seasonal_ma1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarimaxModel {
    pub params: SarimaxParams,
    pub exog_names: Vec<String>,
    /// Covariates found constant after differencing and excluded from the regression.
    pub dropped_exog: Vec<String>,
    /// Last 25 raw observations.
    pub history_y: Vec<f64>,
    /// Last 24 covariate rows, row-major.
    pub history_x: Vec<f64>,
    /// Last 25 regression residuals of the differenced series.
    pub history_z: Vec<f64>,
    /// Last 25 innovations.
    pub history_eps: Vec<f64>,
    /// One-step in-sample predictions for observations 24.. of the training
    /// series. Not persisted by [`SarimaxModel::to_text`].
    pub fitted: Vec<f64>,
    /// Conditional sum of squares at the optimum and at the starting point.
    pub css: f64,
    pub css_initial: f64,
}

fn to_coef(u: f64) -> f64 {
    COEF_BOUND * u.tanh()
}

fn to_unconstrained(c: f64) -> f64 {
    (c / COEF_BOUND).atanh()
}

/// Runs the innovations recursion over `z`, writing into `eps`, and returns
/// the sum of squared innovations.
pub fn css_recursion(z: &[f64], arma: [f64; 4], eps: &mut [f64]) -> f64 {
    let [ar, sar, ma, sma] = arma;
    let arsar = ar * sar;
    let masma = ma * sma;
    let n = z.len();
    debug_assert_eq!(eps.len(), n);
    let mut sum = 0.0;
    let head = n.min(HISTORY);
    for t in 0..head {
        let zl = |k: usize| if t >= k { z[t - k] } else { 0.0 };
        let el = |k: usize, eps: &[f64]| if t >= k { eps[t - k] } else { 0.0 };
        let e = z[t] - ar * zl(1) - sar * zl(SEASON) + arsar * zl(SEASON + 1)
            - ma * el(1, eps)
            - sma * el(SEASON, eps)
            - masma * el(SEASON + 1, eps);
        eps[t] = e;
        sum += e * e;
    }
    for t in head..n {
        let e = z[t] - ar * z[t - 1] - sar * z[t - SEASON] + arsar * z[t - SEASON - 1]
            - ma * eps[t - 1]
            - sma * eps[t - SEASON]
            - masma * eps[t - SEASON - 1];
        eps[t] = e;
        sum += e * e;
    }
    sum
}

fn seasonal_diff(v: &[f64]) -> Vec<f64> {
    v.iter().skip(SEASON).zip(v).map(|(a, b)| a - b).collect()
}

fn is_degenerate(col: &[f64]) -> bool {
    let first = col.first().copied().unwrap_or(0.0);
    let scale = col.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    col.iter().all(|v| (v - first).abs() <= 1e-9 * scale)
}

fn tail(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n.saturating_sub(v.len())];
    out.extend_from_slice(&v[v.len().saturating_sub(n)..]);
    out
}

impl SarimaxModel {
    pub fn season_m(&self) -> usize {
        SEASON
    }

    /// Fits the model to `y` with covariates `exog` (one row per observation).
    pub fn fit(y: &[f64], exog: &ExogenousFrame) -> Result<SarimaxModel, SarimaxError> {
        Self::fit_with(y, exog, &NelderMeadConfig::default())
    }

    pub fn fit_with(y: &[f64], exog: &ExogenousFrame, nm: &NelderMeadConfig) -> Result<SarimaxModel, SarimaxError> {
        let n = y.len();
        if n < MIN_FIT_LEN {
            return Err(SarimaxError::TooShort {
                len: n,
                min: MIN_FIT_LEN,
            });
        }
        if exog.len() != n {
            return Err(SarimaxError::LengthMismatch {
                series: n,
                frame: exog.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SarimaxError::NonFinite);
        }
        let k = exog.columns().len();
        let dy = seasonal_diff(y);
        let mut kept = Vec::new();
        let mut kept_cols = Vec::new();
        let mut dropped_exog = Vec::new();
        for j in 0..k {
            let dx = seasonal_diff(&exog.column(j));
            if is_degenerate(&dx) {
                log::debug!(
                    "covariate {:?} is constant after differencing; dropped",
                    exog.columns()[j]
                );
                dropped_exog.push(exog.columns()[j].clone());
            } else {
                kept.push(j);
                kept_cols.push(dx);
            }
        }
        let ols = ols_with_intercept(&dy, &kept_cols);
        let mut beta = vec![0.0; k];
        for (b, &j) in ols.beta.iter().zip(&kept) {
            beta[j] = *b;
        }
        let z: Vec<f64> = dy
            .iter()
            .enumerate()
            .map(|(t, d)| {
                let reg: f64 = kept_cols.iter().zip(&ols.beta).map(|(c, b)| c[t] * b).sum();
                d - ols.intercept - reg
            })
            .collect();

        let mut eps = vec![0.0; z.len()];
        let u0 = [
            to_unconstrained(INIT_AR),
            to_unconstrained(INIT_AR),
            to_unconstrained(INIT_MA),
            to_unconstrained(INIT_MA),
        ];
        let unpack = |u: &[f64]| [to_coef(u[0]), to_coef(u[1]), to_coef(u[2]), to_coef(u[3])];
        let found = minimize(|u| css_recursion(&z, unpack(u), &mut eps), &u0, nm);
        let arma = unpack(&found.x);
        let css = css_recursion(&z, arma, &mut eps);

        let fitted: Vec<f64> = y[SEASON..].iter().zip(&eps).map(|(v, e)| v - e).collect();
        let history_x: Vec<f64> = (n - SEASON..n).flat_map(|i| exog.row(i).to_vec()).collect();
        Ok(SarimaxModel {
            params: SarimaxParams {
                ar1: arma[0],
                seasonal_ar1: arma[1],
                ma1: arma[2],
                seasonal_ma1: arma[3],
                intercept: ols.intercept,
                beta,
                sigma2: css / z.len() as f64,
            },
            exog_names: exog.columns().to_vec(),
            dropped_exog,
            history_y: tail(y, HISTORY),
            history_x,
            history_z: tail(&z, HISTORY),
            history_eps: tail(&eps, HISTORY),
            fitted,
            css,
            css_initial: found.f_initial,
        })
    }

    /// Recursive point forecast for the `h` hours after the training series.
    /// Future innovations are zero; outputs are clamped at zero.
    pub fn forecast(&self, h: usize, exog_future: &ExogenousFrame) -> Result<Vec<f64>, SarimaxError> {
        Ok(self
            .forecast_unclamped(h, exog_future)?
            .into_iter()
            .map(|v| v.max(0.0))
            .collect())
    }

    pub fn forecast_unclamped(&self, h: usize, exog_future: &ExogenousFrame) -> Result<Vec<f64>, SarimaxError> {
        if h == 0 {
            return Err(SarimaxError::ZeroHorizon);
        }
        if h > MAX_HORIZON_H {
            return Err(SarimaxError::HorizonTooLong(h));
        }
        if exog_future.columns() != self.exog_names.as_slice() {
            return Err(SarimaxError::ExogMismatch(format!(
                "expected columns {:?}, got {:?}",
                self.exog_names,
                exog_future.columns()
            )));
        }
        if exog_future.len() < h {
            return Err(SarimaxError::ExogMismatch(format!(
                "{} covariate rows for a {h}h horizon",
                exog_future.len()
            )));
        }
        let k = self.exog_names.len();
        let p = &self.params;
        let [ar, sar, ma, sma] = p.arma();
        let mut y = self.history_y.clone();
        let mut z = self.history_z.clone();
        let mut eps = self.history_eps.clone();
        let mut out = Vec::with_capacity(h);
        for j in 0..h {
            let zl = |k: usize| z[z.len() - k];
            let el = |k: usize| eps[eps.len() - k];
            let z_hat = ar * zl(1) + sar * zl(SEASON) - ar * sar * zl(SEASON + 1)
                + ma * el(1)
                + sma * el(SEASON)
                + ma * sma * el(SEASON + 1);
            let x_now = exog_future.row(j);
            let x_lag: &[f64] = if j >= SEASON {
                exog_future.row(j - SEASON)
            } else {
                &self.history_x[j * k..(j + 1) * k]
            };
            let reg: f64 = (0..k).map(|c| p.beta[c] * (x_now[c] - x_lag[c])).sum();
            let y_hat = y[y.len() - SEASON] + p.intercept + reg + z_hat;
            out.push(y_hat);
            y.push(y_hat);
            z.push(z_hat);
            eps.push(0.0);
        }
        Ok(out)
    }

    /// Flat `key = value` record of the parameters and recursion state.
    pub fn to_text(&self, label: &str) -> String {
        fn list(v: &[f64]) -> String {
            v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
        }
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "[sarimax]");
        let _ = writeln!(s, "label = {label}");
        let _ = writeln!(s, "ar1 = {:?}", p.ar1);
        let _ = writeln!(s, "seasonal_ar1 = {:?}", p.seasonal_ar1);
        let _ = writeln!(s, "ma1 = {:?}", p.ma1);
        let _ = writeln!(s, "seasonal_ma1 = {:?}", p.seasonal_ma1);
        let _ = writeln!(s, "intercept = {:?}", p.intercept);
        let _ = writeln!(s, "sigma2 = {:?}", p.sigma2);
        let _ = writeln!(s, "beta = {}", list(&p.beta));
        let _ = writeln!(s, "exog_names = {}", self.exog_names.join(","));
        let _ = writeln!(s, "dropped_exog = {}", self.dropped_exog.join(","));
        let _ = writeln!(s, "history_y = {}", list(&self.history_y));
        let _ = writeln!(s, "history_x = {}", list(&self.history_x));
        let _ = writeln!(s, "history_z = {}", list(&self.history_z));
        let _ = writeln!(s, "history_eps = {}", list(&self.history_eps));
        let _ = writeln!(s, "css = {:?}", self.css);
        let _ = writeln!(s, "[end]");
        s
    }

    /// Parses every record written by [`SarimaxModel::to_text`] in `text`.
    pub fn parse_text(text: &str) -> Result<Vec<(String, SarimaxModel)>, SarimaxError> {
        let mut out = Vec::new();
        let mut current: Option<(usize, Vec<(String, String)>)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SarimaxError::ModelFormat { line: line_no, message };
            match line {
                "[sarimax]" => {
                    if current.is_some() {
                        return Err(err("nested [sarimax] record".into()));
                    }
                    current = Some((line_no, Vec::new()));
                }
                "[end]" => {
                    let (start, fields) = current.take().ok_or_else(|| err("[end] without [sarimax]".into()))?;
                    out.push(Self::from_fields(start, &fields)?);
                }
                _ => {
                    let (_, fields) = current.as_mut().ok_or_else(|| err("field outside a record".into()))?;
                    let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
                    fields.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
        }
        if let Some((start, _)) = current {
            return Err(SarimaxError::ModelFormat {
                line: start,
                message: "record not terminated by [end]".into(),
            });
        }
        Ok(out)
    }

    fn from_fields(line: usize, fields: &[(String, String)]) -> Result<(String, SarimaxModel), SarimaxError> {
        let err = |message: String| SarimaxError::ModelFormat { line, message };
        let get = |key: &str| -> Result<&str, SarimaxError> {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| err(format!("missing field {key}")))
        };
        let num = |key: &str| -> Result<f64, SarimaxError> {
            let v = get(key)?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("{key}: invalid number {v:?}")))
        };
        let nums = |key: &str| -> Result<Vec<f64>, SarimaxError> {
            let v = get(key)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(format!("{key}: invalid number {s:?}")))
                })
                .collect()
        };
        let names = |key: &str| -> Result<Vec<String>, SarimaxError> {
            let v = get(key)?;
            Ok(if v.is_empty() {
                Vec::new()
            } else {
                v.split(',').map(|s| s.trim().to_string()).collect()
            })
        };
        let label = get("label")?.to_string();
        let exog_names = names("exog_names")?;
        let k = exog_names.len();
        let params = SarimaxParams {
            ar1: num("ar1")?,
            seasonal_ar1: num("seasonal_ar1")?,
            ma1: num("ma1")?,
            seasonal_ma1: num("seasonal_ma1")?,
            intercept: num("intercept")?,
            beta: nums("beta")?,
            sigma2: num("sigma2")?,
        };
        if params.arma().iter().any(|c| c.abs() >= 1.0) {
            return Err(err("ARMA coefficients must lie in (-1, 1)".into()));
        }
        if params.sigma2 < 0.0 {
            return Err(err("sigma2 must be non-negative".into()));
        }
        if params.beta.len() != k {
            return Err(err(format!("{} beta values for {k} covariates", params.beta.len())));
        }
        let history_y = nums("history_y")?;
        let history_x = nums("history_x")?;
        let history_z = nums("history_z")?;
        let history_eps = nums("history_eps")?;
        if history_y.len() != HISTORY || history_z.len() != HISTORY || history_eps.len() != HISTORY {
            return Err(err(format!("history buffers must hold {HISTORY} values")));
        }
        if history_x.len() != SEASON * k {
            return Err(err(format!("history_x must hold {} values", SEASON * k)));
        }
        let css = num("css")?;
        Ok((
            label,
            SarimaxModel {
                params,
                exog_names,
                dropped_exog: names("dropped_exog")?,
                history_y,
                history_x,
                history_z,
                history_eps,
                fitted: Vec::new(),
                css,
                css_initial: css,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{HourStamp, Matrix};
    use proptest::prelude::*;

    fn t0() -> HourStamp {
        HourStamp::from_ymdh(2023, 1, 2, 0).unwrap()
    }

    fn zeros_frame(n: usize) -> ExogenousFrame {
        ExogenousFrame::new(t0(), vec!["x".into()], Matrix::zeros(n, 1)).unwrap()
    }

    fn seasonal(n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| 50.0 + 10.0 * ((t % 24) as f64 * 0.7).sin() + (t % 24) as f64)
            .collect()
    }

    #[test]
    fn pure_seasonality_is_annihilated() {
        let y = seasonal(168);
        let m = SarimaxModel::fit(&y, &zeros_frame(168)).unwrap();
        assert_eq!(m.params.sigma2, 0.0);
        assert!(m.history_eps.iter().all(|e| *e == 0.0));
        assert_eq!(m.dropped_exog, vec!["x".to_string()]);
        let f = m.forecast(24, &zeros_frame(24)).unwrap();
        for (a, b) in f.iter().zip(&y[144..]) {
            assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn constant_series_forecasts_constant() {
        let y = vec![42.5; 100];
        let m = SarimaxModel::fit(&y, &ExogenousFrame::empty(t0(), 100)).unwrap();
        let f = m.forecast(168, &ExogenousFrame::empty(t0(), 168)).unwrap();
        assert_eq!(f.len(), 168);
        assert!(f.iter().all(|v| *v == 42.5));
    }

    #[test]
    fn one_step_matches_hand_evaluation() {
        let k = 2;
        let model = SarimaxModel {
            params: SarimaxParams {
                ar1: 0.5,
                seasonal_ar1: -0.25,
                ma1: 0.2,
                seasonal_ma1: 0.4,
                intercept: 1.5,
                beta: vec![2.0, -1.0],
                sigma2: 1.0,
            },
            exog_names: vec!["a".into(), "b".into()],
            dropped_exog: vec![],
            history_y: (0..25).map(|i| 100.0 + i as f64).collect(),
            history_x: (0..24 * k).map(|i| i as f64 * 0.1).collect(),
            history_z: (0..25).map(|i| (i as f64 - 12.0) * 0.3).collect(),
            history_eps: (0..25).map(|i| ((i * 3) % 7) as f64 - 3.0).collect(),
            fitted: vec![],
            css: 0.0,
            css_initial: 0.0,
        };
        let x_next = vec![5.0, 7.0];
        let fut = ExogenousFrame::new(
            t0(),
            model.exog_names.clone(),
            Matrix::from_rows(std::slice::from_ref(&x_next), 2).unwrap(),
        )
        .unwrap();
        let got = model.forecast_unclamped(1, &fut).unwrap()[0];

        // history index 24 is t-1, 1 is t-24, 0 is t-25; history_x row 0 is t-24.
        let z = &model.history_z;
        let e = &model.history_eps;
        let (ar, sar, ma, sma) = (0.5, -0.25, 0.2, 0.4);
        let z_hat = ar * z[24] + sar * z[1] - ar * sar * z[0] + ma * e[24] + sma * e[1] + ma * sma * e[0];
        let reg = 2.0 * (x_next[0] - model.history_x[0]) - 1.0 * (x_next[1] - model.history_x[1]);
        let expected = model.history_y[1] + 1.5 + reg + z_hat;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let short = vec![1.0; 48];
        assert_eq!(
            SarimaxModel::fit(&short, &ExogenousFrame::empty(t0(), 48)),
            Err(SarimaxError::TooShort { len: 48, min: 49 })
        );
        let mut y = vec![1.0; 60];
        assert!(matches!(
            SarimaxModel::fit(&y, &ExogenousFrame::empty(t0(), 59)),
            Err(SarimaxError::LengthMismatch { .. })
        ));
        y[3] = f64::NAN;
        assert_eq!(
            SarimaxModel::fit(&y, &ExogenousFrame::empty(t0(), 60)),
            Err(SarimaxError::NonFinite)
        );

        let m = SarimaxModel::fit(&seasonal(100), &zeros_frame(100)).unwrap();
        assert_eq!(
            m.forecast(169, &zeros_frame(169)),
            Err(SarimaxError::HorizonTooLong(169))
        );
        assert_eq!(m.forecast(0, &zeros_frame(1)), Err(SarimaxError::ZeroHorizon));
        assert!(matches!(
            m.forecast(24, &ExogenousFrame::empty(t0(), 24)),
            Err(SarimaxError::ExogMismatch(_))
        ));
        assert!(matches!(
            m.forecast(24, &zeros_frame(10)),
            Err(SarimaxError::ExogMismatch(_))
        ));
    }

    #[test]
    fn exogenous_effect_is_learned() {
        // Differenced y is exactly 3 * differenced x.
        let n = 168;
        let x: Vec<f64> = (0..n).map(|t| ((t * 37) % 17) as f64).collect();
        let y: Vec<f64> = (0..n).map(|t| 200.0 + 3.0 * x[t] + (t % 24) as f64).collect();
        let frame = ExogenousFrame::new(t0(), vec!["x".into()], Matrix::from_columns(&[x], n).unwrap()).unwrap();
        let m = SarimaxModel::fit(&y, &frame).unwrap();
        assert!((m.params.beta[0] - 3.0).abs() < 1e-9);
        assert!(m.params.sigma2 < 1e-18);
    }

    #[test]
    fn text_round_trip() {
        let n = 120;
        let x: Vec<f64> = (0..n).map(|t| (t as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..n).map(|t| 20.0 + x[t] + ((t * 7) % 5) as f64).collect();
        let frame = ExogenousFrame::new(t0(), vec!["x".into()], Matrix::from_columns(&[x], n).unwrap()).unwrap();
        let m = SarimaxModel::fit(&y, &frame).unwrap();
        let text = format!("{}{}", m.to_text("coal"), m.to_text("gas"));
        let parsed = SarimaxModel::parse_text(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].0, "coal");
        assert_eq!(parsed[1].1.params, m.params);
        let fut = frame.slice(t0(), 48).unwrap();
        assert_eq!(parsed[0].1.forecast(48, &fut).unwrap(), m.forecast(48, &fut).unwrap());
    }

    #[test]
    fn malformed_model_text() {
        assert!(SarimaxModel::parse_text("[sarimax]\nlabel = a\n").is_err());
        assert!(SarimaxModel::parse_text("ar1 = 0.1\n").is_err());
        assert!(SarimaxModel::parse_text("[end]\n").is_err());
        assert!(SarimaxModel::parse_text("[sarimax]\nlabel = a\n[end]\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn objective_never_exceeds_start(seed in 0u64..1000) {
            let n = 96;
            let y: Vec<f64> = (0..n).map(|t| (((t as u64 * 2654435761 + seed * 97) % 1000) as f64) / 10.0).collect();
            let m = SarimaxModel::fit(&y, &ExogenousFrame::empty(t0(), n)).unwrap();
            prop_assert!(m.css <= m.css_initial);
            prop_assert!(m.params.arma().iter().all(|c| c.abs() < 1.0));
        }

        #[test]
        fn translation_equivariant(vals in proptest::collection::vec(0i32..500, 72..120), shift in 1i32..10_000, h in 1usize..72) {
            // Integer data keeps differencing exact, so both fits see identical inputs.
            let y: Vec<f64> = vals.iter().map(|v| *v as f64 + 1000.0).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift as f64).collect();
            let n = y.len();
            let a = SarimaxModel::fit(&y, &ExogenousFrame::empty(t0(), n)).unwrap();
            let b = SarimaxModel::fit(&ys, &ExogenousFrame::empty(t0(), n)).unwrap();
            let fa = a.forecast_unclamped(h, &ExogenousFrame::empty(t0(), h)).unwrap();
            let fb = b.forecast_unclamped(h, &ExogenousFrame::empty(t0(), h)).unwrap();
            prop_assert_eq!(fa.len(), h);
            for (p, q) in fa.iter().zip(&fb) {
                prop_assert!((q - p - shift as f64).abs() <= 1e-9 * q.abs().max(1.0), "{} {} {}", p, q, shift);
            }
        }

        #[test]
        fn forecasts_finite_and_non_negative(vals in proptest::collection::vec(0.0f64..100.0, 60..100), h in 1usize..=168) {
            let n = vals.len();
            let m = SarimaxModel::fit(&vals, &ExogenousFrame::empty(t0(), n)).unwrap();
            let f = m.forecast(h, &ExogenousFrame::empty(t0(), h)).unwrap();
            prop_assert_eq!(f.len(), h);
            prop_assert!(f.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
