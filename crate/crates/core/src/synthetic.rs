//! Seeded synthetic regional datasets in the on-disk layout the loaders read.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::HourStamp;
use crate::ingest::{RunConfig, DEMAND_COLUMNS, WEATHER_COLUMNS};

/// Generation capacities of a synthetic region, as fractions of its mean demand.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionProfile {
    pub name: String,
    pub mean_demand_mwh: f64,
    pub solar_share: f64,
    pub wind_share: f64,
    pub nuclear_share: f64,
    pub coal_share: f64,
    /// Amplitude of the diurnal demand swing.
    pub diurnal_amplitude: f64,
    /// Demand multiplier on Saturdays and Sundays.
    pub weekend_factor: f64,
}

impl RegionProfile {
    /// Solar-heavy region with coal baseload.
    pub fn sunny(name: &str) -> Self {
        RegionProfile {
            name: name.to_string(),
            mean_demand_mwh: 5000.0,
            solar_share: 0.9,
            wind_share: 0.1,
            nuclear_share: 0.05,
            coal_share: 0.3,
            diurnal_amplitude: 0.15,
            weekend_factor: 0.85,
        }
    }

    /// Wind-heavy region with nuclear baseload.
    pub fn windy(name: &str) -> Self {
        RegionProfile {
            name: name.to_string(),
            mean_demand_mwh: 3000.0,
            solar_share: 0.2,
            wind_share: 0.7,
            nuclear_share: 0.25,
            coal_share: 0.1,
            diurnal_amplitude: 0.2,
            weekend_factor: 0.9,
        }
    }
}

/// Emission factors (g/kWh) written alongside the synthetic data.
pub const SYNTHETIC_FACTORS: [(&str, f64); 5] = [
    ("coal", 820.0),
    ("gas", 490.0),
    ("nuclear", 12.0),
    ("solar", 48.0),
    ("wind", 11.0),
];

const SOURCES: [&str; 5] = ["coal", "gas", "nuclear", "solar", "wind"];

/// Hourly rows of one synthetic region.
#[derive(Debug, Clone)]
pub struct RegionTrace {
    pub start: HourStamp,
    /// Per hour: coal, gas, nuclear, solar, wind (matching `SOURCES`).
    pub generation: Vec<[f64; 5]>,
    /// Per hour: temperature, wind speed, irradiance, humidity.
    pub weather: Vec<[f64; 4]>,
    /// Per hour: demand, day-ahead demand forecast.
    pub demand: Vec<[f64; 2]>,
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("positive standard deviation")
}

pub fn generate_region(profile: &RegionProfile, start: HourStamp, hours: usize, seed: u64) -> RegionTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = normal(1.0);
    let mut cloud = 0.0;
    let mut wind_noise = 0.0f64;
    let mut temp_noise = 0.0f64;
    let mut demand_noise = 0.0f64;
    let mut out = RegionTrace {
        start,
        generation: Vec::with_capacity(hours),
        weather: Vec::with_capacity(hours),
        demand: Vec::with_capacity(hours),
    };
    let m = profile.mean_demand_mwh;
    for i in 0..hours {
        let t = start.plus_hours(i as i64);
        let hod = f64::from(t.hour_of_day());
        let day = i as f64 / 24.0;
        if t.hour_of_day() == 0 {
            cloud = rng.random_range(0.0..0.5f64);
        }
        let sun = if hod > 6.0 && hod < 18.0 {
            (PI * (hod - 6.0) / 12.0).sin()
        } else {
            0.0
        };
        let irradiance = 950.0 * sun * (1.0 - 0.8 * cloud) * (0.85 + 0.15 * (TAU * (day - 172.0) / 365.0).cos());
        // Nightly wind maximum plus short-memory noise.
        wind_noise = 0.7 * wind_noise + 0.8 * unit.sample(&mut rng);
        let wind = (8.0 + 3.0 * (TAU * (hod - 2.0) / 24.0).cos() + wind_noise).clamp(0.0, 25.0);
        temp_noise = 0.9 * temp_noise + 0.5 * unit.sample(&mut rng);
        let temperature = 12.0 + 9.0 * (TAU * (day - 100.0) / 365.0).sin() + 5.0 * (TAU * (hod - 9.0) / 24.0).sin()
            - 3.0 * cloud
            + temp_noise;
        let humidity =
            (55.0 + 30.0 * cloud - 0.8 * (temperature - 12.0) + 3.0 * unit.sample(&mut rng)).clamp(5.0, 100.0);

        demand_noise = 0.8 * demand_noise + 0.01 * unit.sample(&mut rng);
        let weekend = if t.day_of_week() >= 5 {
            profile.weekend_factor
        } else {
            1.0
        };
        let diurnal = 1.0 + profile.diurnal_amplitude * (TAU * (hod - 13.0) / 24.0).cos();
        let thermal = 1.0 + 0.01 * (temperature - 18.0).abs();
        let demand = m * diurnal * weekend * thermal * (1.0 + demand_noise);
        let demand_forecast = demand * (1.0 + 0.02 * unit.sample(&mut rng));

        let solar = profile.solar_share * m * irradiance / 1000.0;
        let wind_out = profile.wind_share * m * (wind / 14.0).powi(3).min(1.0);
        let nuclear = profile.nuclear_share * m;
        let coal = profile.coal_share * m * (0.95 + 0.1 * rng.random_range(0.0..1.0f64));
        let gas = (demand - solar - wind_out - nuclear - coal).max(0.0);

        out.generation.push([coal, gas, nuclear, solar, wind_out]);
        out.weather.push([temperature, wind, irradiance, humidity]);
        out.demand.push([demand, demand_forecast]);
    }
    out
}

fn table<const N: usize>(start: HourStamp, header: &[String], rows: &[[f64; N]]) -> String {
    let mut s = String::with_capacity(rows.len() * (24 + 12 * N));
    s.push_str("timestamp");
    for h in header {
        s.push(',');
        s.push_str(h);
    }
    s.push('\n');
    for (i, row) in rows.iter().enumerate() {
        write!(s, "{}", start.plus_hours(i as i64)).expect("write to string");
        for v in row {
            write!(s, ",{v:.3}").expect("write to string");
        }
        s.push('\n');
    }
    s
}

/// Writes `energy/`, `weather/` and `demand/` files for each profile plus
/// `emission_factors.csv` under `dir`, and returns a run configuration
/// pointing at them (relative to `dir`).
pub fn write_dataset(
    dir: &Path,
    profiles: &[RegionProfile],
    start: HourStamp,
    hours: usize,
    seed: u64,
) -> io::Result<RunConfig> {
    for sub in ["energy", "weather", "demand"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let energy_header: Vec<String> = SOURCES.iter().map(|s| format!("{s}_mwh")).collect();
    let weather_header: Vec<String> = WEATHER_COLUMNS.iter().map(|s| s.to_string()).collect();
    let demand_header: Vec<String> = DEMAND_COLUMNS.iter().map(|s| s.to_string()).collect();
    for (idx, p) in profiles.iter().enumerate() {
        let trace = generate_region(
            p,
            start,
            hours,
            seed.wrapping_add(idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let file = format!("{}.csv", p.name);
        fs::write(
            dir.join("energy").join(&file),
            table(start, &energy_header, &trace.generation),
        )?;
        fs::write(
            dir.join("weather").join(&file),
            table(start, &weather_header, &trace.weather),
        )?;
        fs::write(
            dir.join("demand").join(&file),
            table(start, &demand_header, &trace.demand),
        )?;
    }
    let mut factors = String::from("source,factor_g_per_kwh\n");
    for (s, f) in SYNTHETIC_FACTORS {
        writeln!(factors, "{s},{f}").expect("write to string");
    }
    fs::write(dir.join("emission_factors.csv"), factors)?;
    Ok(RunConfig {
        regions: profiles.iter().map(|p| p.name.clone()).collect(),
        data_dir: PathBuf::from("."),
        emission_factors_path: PathBuf::from("emission_factors.csv"),
        seed,
        output_dir: PathBuf::from("results"),
        ..RunConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_nonnegative() {
        let start = HourStamp::from_ymdh(2023, 1, 1, 0).unwrap();
        let a = generate_region(&RegionProfile::sunny("a"), start, 500, 7);
        let b = generate_region(&RegionProfile::sunny("a"), start, 500, 7);
        assert_eq!(a.generation, b.generation);
        assert!(a.generation.iter().flatten().all(|v| *v >= 0.0 && v.is_finite()));
        assert!(a.generation.iter().all(|r| r.iter().sum::<f64>() > 0.0));
        let c = generate_region(&RegionProfile::sunny("a"), start, 500, 8);
        assert_ne!(a.generation, c.generation);
    }

    #[test]
    fn solar_only_in_daylight() {
        let start = HourStamp::from_ymdh(2023, 6, 1, 0).unwrap();
        let tr = generate_region(&RegionProfile::sunny("a"), start, 48, 1);
        for (i, g) in tr.generation.iter().enumerate() {
            let hod = i % 24;
            if hod <= 6 || hod >= 18 {
                assert_eq!(g[3], 0.0, "hour {hod}");
            }
        }
        assert!(tr.generation[12][3] > 0.0);
    }
}
