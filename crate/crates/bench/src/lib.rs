//! Fixtures shared by the benchmarks.

use reqcast_core::synthetic::generate;
use reqcast_core::trace::aggregate_stream;
use reqcast_core::{CyclicDataset, MetricKind, PeriodObservation, PoissonParam, SyntheticSpec};

/// Arrival observations of the default three-week synthetic trace.
pub fn synthetic_weeks(seed: u64) -> Vec<PeriodObservation> {
    let spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
    let trace = generate(&spec).expect("default spec is valid");
    aggregate_stream(
        &trace.events,
        0,
        spec.tp_seconds,
        spec.tps,
        spec.pp_tps,
        MetricKind::Arrivals,
        spec.sub_bin_seconds,
        1.0,
    )
    .expect("aggregation of generated events")
}

/// A fully populated `m` x `l` store holding a smooth periodic rate.
pub fn filled_store(m: usize, l: usize) -> CyclicDataset {
    let mut ds = CyclicDataset::new(m, l).expect("positive dimensions");
    for t in 0..m * l {
        let phase = (t % m) as f64 / m as f64 * std::f64::consts::TAU;
        let lambda = 5.0 + 3.0 * phase.sin() + (t / m) as f64 * 0.1;
        ds.update(PoissonParam::new(lambda).expect("positive rate"));
    }
    ds
}
