//! Workload forecasting with cyclic-window local linear regression.
//!
//! Every target period of a request trace is summarized by a Poisson rate
//! fitted by maximum likelihood. Rates are kept in an m x l matrix indexed
//! by position on the pattern period and by cycle, and the rate of the next
//! period is predicted by a kernel-weighted line fit over the trailing
//! utilization window of that matrix.
//!
//! Modules, bottom up:
//!
//! - [`trace`]: parse traces and aggregate events into per-period counts
//! - [`poisson`]: rate fitting, PMF, CDF, quantiles
//! - [`llr`]: kernels, bandwidths and local linear regression
//! - [`cyclic_store`]: the parameter matrix and its window extraction
//! - [`forecaster`]: the prediction loop and baseline comparators
//! - [`evaluation`]: MAPE, sweeps and comparison reports
//! - [`synthetic`]: seeded traces with known rates

pub mod cyclic_store;
pub mod error;
pub mod evaluation;
pub mod forecaster;
pub mod llr;
pub mod poisson;
pub mod synthetic;
pub mod trace;

pub use cyclic_store::{CyclicDataset, UtilizationWindow, WindowEntry};
pub use error::{Error, Result};
pub use evaluation::{compare, mape, sweep, EvaluationReport};
pub use forecaster::{
    baseline_naive, baseline_poisson_window, predict_step, observe_step, run, Baseline,
    CyclicForecaster, ForecastConfig, PredictionRecord,
};
pub use llr::{Bandwidth, Fallback, KernelFamily, KernelSpec, LlrPrediction};
pub use poisson::{poisson_mle, PoissonParam};
pub use synthetic::{SyntheticSpec, SyntheticTrace};
pub use trace::{MetricKind, PeriodObservation, TraceEvent, TraceFormat};
