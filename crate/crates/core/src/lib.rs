//! Carbon-intensity forecasting from the generation mix, and carbon-aware
//! scheduling of flexible jobs driven by those forecasts.

// Negated float comparisons are deliberate: they treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod sarimax;
pub mod scheduler;
pub mod synthetic;

pub use domain::{
    CarbonIntensitySeries, DomainError, EmissionFactorTable, EnergyMixSeries, ExogenousFrame, HourStamp, JobMode,
    JobSpec, Matrix, Schedule, SeriesKind,
};
pub use pipeline::{aggregate_intensity, forecast_carbon, persistence_forecast, CarbonForecast, PipelineError};
pub use sarimax::{SarimaxError, SarimaxModel};
pub use scheduler::{SchedulerError, SchedulingProblem};
