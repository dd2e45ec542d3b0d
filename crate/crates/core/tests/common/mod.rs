#![allow(dead_code)]

use std::path::Path;

use gridcast::ingest::RunConfig;
use gridcast::synthetic::{write_dataset, RegionProfile};
use gridcast::HourStamp;

pub fn t0() -> HourStamp {
    HourStamp::from_ymdh(2023, 3, 1, 0).unwrap()
}

/// Writes a short synthetic dataset under `dir` and returns a config with
/// absolute paths and a small experiment grid.
pub fn small_dataset(dir: &Path, profiles: &[RegionProfile], days: usize, seed: u64) -> RunConfig {
    let mut cfg = write_dataset(dir, profiles, t0(), days * 24, seed).unwrap();
    cfg.data_dir = dir.to_path_buf();
    cfg.emission_factors_path = dir.join("emission_factors.csv");
    cfg.output_dir = dir.join("results");
    cfg.horizon_h = 48;
    cfg.job_lengths_h = vec![1, 6];
    cfg.slacks_h = vec![12, 24];
    cfg
}

pub fn two_regions() -> Vec<RegionProfile> {
    vec![RegionProfile::sunny("sunny"), RegionProfile::windy("windy")]
}
