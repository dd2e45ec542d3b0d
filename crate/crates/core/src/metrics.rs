//! Forecast-quality and scheduling-quality metrics.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("series lengths differ ({actual} actual vs {forecast} forecast)")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("metric needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("every actual value is zero; percentage error is undefined")]
    AllZeroActual,
    #[error("all actual values are equal; no comparable pairs")]
    NoComparablePairs,
    #[error("inputs contain non-finite values")]
    NonFinite,
    #[error("coefficient of variation needs a positive mean, got {0}")]
    NonPositiveMean(f64),
    #[error("oracle emissions must be positive, got {0}")]
    ZeroOracle(f64),
}

fn check_pair(actual: &[f64], forecast: &[f64], min: usize) -> Result<(), MetricError> {
    if actual.len() != forecast.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.len() < min {
        return Err(MetricError::TooFewSamples { min, got: actual.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mape {
    pub pct: f64,
    /// Hours that entered the mean.
    pub used: usize,
    /// Hours skipped because the actual value was zero.
    pub excluded_zero: usize,
}

/// Mean absolute percentage error, skipping zero-actual hours.
pub fn mape_detailed(actual: &[f64], forecast: &[f64]) -> Result<Mape, MetricError> {
    check_pair(actual, forecast, 1)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, f) in actual.iter().zip(forecast) {
        if *a == 0.0 {
            continue;
        }
        sum += ((a - f) / a).abs();
        used += 1;
    }
    if used == 0 {
        return Err(MetricError::AllZeroActual);
    }
    Ok(Mape {
        pct: 100.0 * sum / used as f64,
        used,
        excluded_zero: actual.len() - used,
    })
}

pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    mape_detailed(actual, forecast).map(|m| m.pct)
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    check_pair(actual, forecast, 1)?;
    let ss: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok((ss / actual.len() as f64).sqrt())
}

/// Counts strict inversions of `v` by merge sort, sorting `v` in place.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (l, r) = v.split_at_mut(mid);
    let mut inv = count_inversions(l, &mut buf[..mid]) + count_inversions(r, &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < l.len() && j < r.len() {
        if r[j] < l[i] {
            inv += (l.len() - i) as u64;
            buf[k] = r[j];
            j += 1;
        } else {
            buf[k] = l[i];
            i += 1;
        }
        k += 1;
    }
    while i < l.len() {
        buf[k] = l[i];
        i += 1;
        k += 1;
    }
    while j < r.len() {
        buf[k] = r[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    inv
}

/// Number of pairs with equal keys in a sorted slice, grouped with `same`.
fn tied_pairs<T>(sorted: &[T], same: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Concordance index in percent: over pairs with distinct actual values, the
/// share whose forecast ordering agrees, with forecast ties counting half.
///
/// Runs in O(n log n) using Knight's inversion-counting scheme.
pub fn concordance(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    check_pair(actual, forecast, 2)?;
    if actual.iter().chain(forecast).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let n = actual.len() as u64;
    // Adding 0.0 folds -0.0 into 0.0 so the sort agrees with `==`.
    let mut pairs: Vec<(f64, f64)> = actual.iter().zip(forecast).map(|(a, f)| (a + 0.0, f + 0.0)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let ties_actual = tied_pairs(&pairs, |x, y| x.0 == y.0);
    let ties_joint = tied_pairs(&pairs, |x, y| x.0 == y.0 && x.1 == y.1);
    let mut f_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; f_sorted.len()];
    let discordant = count_inversions(&mut f_sorted, &mut buf);
    let ties_forecast = tied_pairs(&f_sorted, |x, y| x == y);

    let total = n * (n - 1) / 2;
    let comparable = total - ties_actual;
    if comparable == 0 {
        return Err(MetricError::NoComparablePairs);
    }
    let forecast_only_ties = ties_forecast - ties_joint;
    let concordant = comparable - discordant - forecast_only_ties;
    Ok(100.0 * (concordant as f64 + 0.5 * forecast_only_ties as f64) / comparable as f64)
}

/// Population standard deviation over the mean.
pub fn coefficient_of_variation(series: &[f64]) -> Result<f64, MetricError> {
    if series.is_empty() {
        return Err(MetricError::TooFewSamples { min: 1, got: 0 });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(MetricError::NonPositiveMean(mean));
    }
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Extra emissions over the oracle, in percent of the oracle.
pub fn additional_emissions_pct(realized_g: f64, oracle_g: f64) -> Result<f64, MetricError> {
    if !(oracle_g > 0.0) {
        return Err(MetricError::ZeroOracle(oracle_g));
    }
    Ok(100.0 * (realized_g - oracle_g) / oracle_g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub mape_pct: f64,
    pub rmse: f64,
    pub concordance_pct: f64,
    pub n: usize,
    pub mape_excluded_zero: usize,
}

pub fn report(actual: &[f64], forecast: &[f64]) -> Result<MetricReport, MetricError> {
    let m = mape_detailed(actual, forecast)?;
    Ok(MetricReport {
        mape_pct: m.pct,
        rmse: rmse(actual, forecast)?,
        concordance_pct: concordance(actual, forecast)?,
        n: actual.len(),
        mape_excluded_zero: m.excluded_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct pair enumeration.
    fn concordance_pairs(a: &[f64], f: &[f64]) -> Option<f64> {
        let mut score = 0.0;
        let mut comparable = 0usize;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                if a[i] == a[j] {
                    continue;
                }
                comparable += 1;
                if f[i] == f[j] {
                    score += 0.5;
                } else if (f[i] < f[j]) == (a[i] < a[j]) {
                    score += 1.0;
                }
            }
        }
        (comparable > 0).then(|| 100.0 * score / comparable as f64)
    }

    #[test]
    fn mape_examples() {
        assert!((mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        let a = [120.0, 333.3, 17.0, 999.0];
        let f: Vec<f64> = a.iter().map(|v| v * 1.32).collect();
        assert!((mape(&a, &f).unwrap() - 32.0).abs() < 1e-9);
    }

    #[test]
    fn mape_zero_actuals_excluded() {
        let m = mape_detailed(&[0.0, 100.0], &[5.0, 90.0]).unwrap();
        assert_eq!(m.excluded_zero, 1);
        assert_eq!(m.used, 1);
        assert!((m.pct - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[0.0, 0.0], &[1.0, 2.0]), Err(MetricError::AllZeroActual));
        assert!(matches!(
            mape(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn concordance_examples() {
        assert_eq!(concordance(&[10.0, 20.0, 30.0], &[1.0, 2.0, 3.0]).unwrap(), 100.0);
        assert_eq!(concordance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        let c = concordance(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((c - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(concordance(&[1.0, 2.0], &[5.0, 5.0]).unwrap(), 50.0);
        assert_eq!(
            concordance(&[4.0, 4.0, 4.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::NoComparablePairs)
        );
        assert!(matches!(
            concordance(&[1.0], &[1.0]),
            Err(MetricError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355339059327378).abs() < 1e-12);
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[7.0; 5]).unwrap(), 0.0);
        assert_eq!(coefficient_of_variation(&[1.0, 3.0]).unwrap(), 0.5);
        assert!(matches!(
            coefficient_of_variation(&[-1.0, 1.0]),
            Err(MetricError::NonPositiveMean(_))
        ));
    }

    #[test]
    fn additional_emissions_examples() {
        assert_eq!(additional_emissions_pct(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(additional_emissions_pct(120.0, 100.0).unwrap(), 20.0);
        assert!(matches!(
            additional_emissions_pct(1.0, 0.0),
            Err(MetricError::ZeroOracle(_))
        ));
    }

    fn tied_values() -> impl Strategy<Value = Vec<(f64, f64)>> {
        // Small integer ranges force many ties on both sides.
        proptest::collection::vec((0u8..6, 0u8..6), 2..60)
            .prop_map(|v| v.into_iter().map(|(a, f)| (a as f64, f as f64)).collect())
    }

    proptest! {
        #[test]
        fn concordance_matches_pair_enumeration(v in tied_values()) {
            let (a, f): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            match concordance_pairs(&a, &f) {
                Some(expected) => prop_assert!((concordance(&a, &f).unwrap() - expected).abs() < 1e-12),
                None => prop_assert_eq!(concordance(&a, &f), Err(MetricError::NoComparablePairs)),
            }
        }

        #[test]
        fn concordance_is_rank_invariant(v in proptest::collection::vec((0.0f64..100.0, 0.0f64..5.0), 2..80)) {
            let (a, f): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let g: Vec<f64> = f.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            if let Ok(c) = concordance(&a, &f) {
                prop_assert!((c - concordance(&a, &g).unwrap()).abs() < 1e-12);
                prop_assert!((0.0..=100.0).contains(&c));
            }
        }

        #[test]
        fn concordance_self_and_reverse(a in proptest::collection::vec(0.0f64..100.0, 2..80)) {
            let neg: Vec<f64> = a.iter().map(|x| -x).collect();
            if let Ok(c) = concordance(&a, &a) {
                prop_assert_eq!(c, 100.0);
                prop_assert_eq!(concordance(&a, &neg).unwrap(), 0.0);
            }
        }

        #[test]
        fn mape_scale(a in proptest::collection::vec(1.0f64..1000.0, 1..50), c in 0.01f64..5.0) {
            let f: Vec<f64> = a.iter().map(|x| x * c).collect();
            prop_assert!((mape(&a, &f).unwrap() - 100.0 * (c - 1.0).abs()).abs() < 1e-9);
        }
    }
}
