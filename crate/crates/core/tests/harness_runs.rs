mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridcast::harness::{
    emit_results, read_results, replay_on, spatial_on, temporal_on, ExperimentResult, Policy, RegionData, ResultMode,
};
use gridcast::ingest::{load_emission_factors, RunConfig, TraceJob, WorkloadTrace};
use gridcast::synthetic::RegionProfile;
use gridcast::{EmissionFactorTable, EnergyMixSeries, Matrix};

fn load(
    profiles: &[RegionProfile],
    days: usize,
) -> (Vec<RegionData>, EmissionFactorTable, RunConfig, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_dataset(dir.path(), profiles, days, 5);
    let factors = load_emission_factors(&cfg.emission_factors_path).unwrap();
    let regions = cfg
        .regions
        .iter()
        .map(|r| RegionData::load(&cfg, r, &factors).unwrap())
        .collect();
    (regions, factors, cfg, dir)
}

type CellKey = (Option<u32>, Option<u32>, Policy);

fn by_cell<'a>(rows: impl Iterator<Item = &'a ExperimentResult>) -> BTreeMap<CellKey, &'a ExperimentResult> {
    rows.map(|r| ((r.length_h, r.slack_h, r.policy), r)).collect()
}

#[test]
fn temporal_run_is_complete_and_reproducible() {
    let (regions, factors, cfg, dir) = load(&common::two_regions(), 16);
    let out = temporal_on(&regions, &factors, &cfg, Vec::new());
    assert!(out.failed_regions.is_empty());
    assert!(out.accounting.reconciles(), "{:?}", out.accounting);
    assert!(out.accounting.evaluated > 0);
    assert_eq!(out.audit.deadline_violations, 0);
    assert_eq!(out.audit.emission_increases, 0);

    // 2 regions x 2 modes x 2 lengths x 2 slacks x 4 policies.
    assert_eq!(out.results.len(), 64);
    for r in &out.results {
        assert!(r.mean_rho >= 1.0 - 1e-12, "{r:?}");
        if r.policy == Policy::Oracle {
            assert_eq!((r.mean_additional_pct, r.mean_rho), (0.0, 1.0));
        }
    }

    let again = temporal_on(&regions, &factors, &cfg, Vec::new());
    assert_eq!(again.results, out.results);

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    emit_results(&out, &a).unwrap();
    emit_results(&again, &b).unwrap();
    let csv_a = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("results.csv")).unwrap());
    assert_eq!(read_results(&a.join("results.csv")).unwrap(), out.results);

    let scatter = fs::read_to_string(a.join("plotdata").join("cv_scatter.csv")).unwrap();
    let pairs: BTreeSet<(&str, Policy)> = out.results.iter().map(|r| (r.region.as_str(), r.policy)).collect();
    assert_eq!(scatter.lines().count() - 1, pairs.len());

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["heuristic_audit"]["deadline_violations"], 0);
}

#[test]
fn identical_regions_match_the_temporal_run() {
    let (regions, factors, cfg, _dir) = load(&[RegionProfile::sunny("sunny")], 14);
    let mut twin = regions[0].clone();
    twin.name = "twin".into();
    let spatial = spatial_on(&[regions[0].clone(), twin], &factors, &cfg, Vec::new());
    let temporal = temporal_on(&regions, &factors, &cfg, Vec::new());
    let s = by_cell(spatial.results.iter());
    let t = by_cell(temporal.results.iter().filter(|r| r.mode == ResultMode::Continuous));
    assert_eq!(s.len(), t.len());
    for (k, sr) in &s {
        let tr = t[k];
        assert_eq!(sr.mode, ResultMode::Spatial);
        assert_eq!(
            (
                sr.submissions,
                sr.mean_additional_pct,
                sr.mean_rho,
                sr.mape_pct,
                sr.concordance_pct,
                sr.mean_realized_g
            ),
            (
                tr.submissions,
                tr.mean_additional_pct,
                tr.mean_rho,
                tr.mape_pct,
                tr.concordance_pct,
                tr.mean_realized_g
            ),
            "{k:?}"
        );
    }
}

#[test]
fn strictly_cleaner_region_takes_every_job() {
    let (regions, factors, cfg, _dir) = load(&[RegionProfile::sunny("sunny")], 14);
    let dirty = &regions[0];
    // Same clock and covariates, but only low-carbon generation.
    let n = dirty.mix.len();
    let nuclear = vec![1500.0; n];
    let wind = dirty
        .mix
        .source_series(dirty.mix.sources().iter().position(|s| s == "wind").unwrap());
    let mix = EnergyMixSeries::new(
        "clean",
        dirty.mix.start(),
        vec!["nuclear".into(), "wind".into()],
        Matrix::from_columns(&[nuclear, wind], n).unwrap(),
    )
    .unwrap();
    let clean = RegionData::new("clean", mix, dirty.exog.clone(), &factors).unwrap();
    assert!(clean
        .actual
        .values()
        .iter()
        .zip(dirty.actual.values())
        .all(|(c, d)| c < d));

    let spatial = spatial_on(&[clean.clone(), dirty.clone()], &factors, &cfg, Vec::new());
    let temporal = temporal_on(&[clean], &factors, &cfg, Vec::new());
    let t = by_cell(temporal.results.iter().filter(|r| r.mode == ResultMode::Continuous));
    for (k, sr) in by_cell(spatial.results.iter()) {
        assert_eq!(sr.mean_realized_g, t[&k].mean_realized_g, "{k:?}");
    }
}

#[test]
fn spatial_oracle_beats_every_single_region() {
    let profiles = [
        RegionProfile::sunny("a"),
        RegionProfile::windy("b"),
        RegionProfile::sunny("c"),
    ];
    let (regions, factors, cfg, _dir) = load(&profiles, 14);
    let spatial = spatial_on(&regions, &factors, &cfg, Vec::new());
    let temporal = temporal_on(&regions, &factors, &cfg, Vec::new());
    for s in spatial.results.iter().filter(|r| r.policy == Policy::Oracle) {
        let best = temporal
            .results
            .iter()
            .filter(|r| r.policy == Policy::Oracle && r.mode == ResultMode::Continuous)
            .filter(|r| (r.length_h, r.slack_h) == (s.length_h, s.slack_h))
            .map(|r| r.mean_realized_g)
            .fold(f64::INFINITY, f64::min);
        assert!(s.mean_realized_g <= best * (1.0 + 1e-12), "{s:?} vs {best}");
    }
}

fn policy_row(rows: &[ExperimentResult], region: &str, policy: Policy) -> ExperimentResult {
    rows.iter()
        .find(|r| r.region == region && r.policy == policy)
        .unwrap()
        .clone()
}

#[test]
fn replay_single_job_without_slack_has_no_freedom() {
    let (regions, factors, cfg, _dir) = load(&[RegionProfile::windy("w")], 10);
    let trace = WorkloadTrace {
        jobs: vec![TraceJob {
            id: 1,
            submit_h: 5,
            runtime_h: 3,
            wait_h: 0,
        }],
        dropped: 0,
    };
    let out = replay_on(&regions, &factors, &cfg, &trace, Vec::new());
    let noop = policy_row(&out.results, "w", Policy::Noop).mean_realized_g;
    for r in &out.results {
        assert_eq!(r.mean_realized_g, noop, "{:?}", r.policy);
        assert_eq!(r.savings_pct, Some(0.0));
    }
}

#[test]
fn replay_trace_savings_order() {
    let (regions, factors, cfg, _dir) = load(&common::two_regions(), 40);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let jobs = (0..100)
        .map(|id| TraceJob {
            id,
            submit_h: rng.random_range(0..24 * 30),
            runtime_h: rng.random_range(1..=12),
            wait_h: rng.random_range(0..=36),
        })
        .collect();
    let trace = WorkloadTrace { jobs, dropped: 0 };
    let out = replay_on(&regions, &factors, &cfg, &trace, Vec::new());
    assert!(out.accounting.reconciles());
    assert_eq!(out.audit.deadline_violations, 0);
    let mut violations = Vec::new();
    for region in ["sunny", "windy"] {
        let saving = |p| policy_row(&out.results, region, p).savings_pct.unwrap();
        let (oracle, heuristic, sarimax) = (
            saving(Policy::Oracle),
            saving(Policy::Heuristic),
            saving(Policy::Sarimax),
        );
        println!("{region}: oracle {oracle:.3}% heuristic {heuristic:.3}% sarimax {sarimax:.3}%");
        assert!(oracle >= heuristic.max(sarimax) - 1e-9);
        if !(heuristic >= sarimax && sarimax >= 0.0) {
            violations.push(format!("{region}: heuristic {heuristic:.3}% sarimax {sarimax:.3}%"));
        }
    }
    assert!(violations.is_empty(), "{violations:?}");
}
