//! Cyclic-window forecasting loop and the baseline comparators.
//!
//! Each step predicts the rate of the target period under the store cursor
//! from the trailing utilization window, then fits the observed period and
//! writes it into the store.

use std::fmt;
use std::io::{BufRead, Write};

use crate::cyclic_store::CyclicDataset;
use crate::error::{Error, Result};
use crate::llr::{llr_predict, Bandwidth, Fallback, KernelSpec, LlrPrediction};
use crate::poisson::{poisson_mle, poisson_pmf, PoissonParam};
use crate::trace::{MetricKind, PeriodObservation};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub tp_minutes: u64,
    /// Target periods per pattern period (m).
    pub pp_tps: usize,
    /// Target periods per utilization window (n).
    pub up_tps: usize,
    /// Pattern periods kept in the store (l).
    pub cycles: usize,
    pub kernel: KernelSpec,
    pub metric: MetricKind,
    pub sub_bin_seconds: u64,
    pub scale: f64,
}

impl Default for ForecastConfig {
    /// 30-minute periods, one-week pattern, 25-hour window, two cycles,
    /// Epanechnikov kernel over the 20 nearest points.
    fn default() -> Self {
        Self {
            tp_minutes: 30,
            pp_tps: 336,
            up_tps: 50,
            cycles: 2,
            kernel: KernelSpec::default(),
            metric: MetricKind::Arrivals,
            sub_bin_seconds: 60,
            scale: 100.0,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tp_minutes == 0 {
            return Err(Error::config("target period length must be positive"));
        }
        if self.pp_tps == 0 {
            return Err(Error::config("pattern period must contain at least one target period"));
        }
        if self.up_tps == 0 || self.up_tps > self.pp_tps {
            return Err(Error::config(format!(
                "utilization window of {} periods must lie in 1..={}",
                self.up_tps, self.pp_tps
            )));
        }
        if self.cycles == 0 {
            return Err(Error::config("cycle depth must be positive"));
        }
        if self.sub_bin_seconds == 0 || !self.tp_seconds().is_multiple_of(self.sub_bin_seconds) {
            return Err(Error::config(format!(
                "sub-bin of {} s must divide the {} s target period",
                self.sub_bin_seconds,
                self.tp_seconds()
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::config(format!("scale must be positive, got {}", self.scale)));
        }
        self.kernel.validate()
    }

    pub fn tp_seconds(&self) -> u64 {
        self.tp_minutes * 60
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    /// 1-based step index.
    pub t: u64,
    pub tp_index: usize,
    pub cycle_index: usize,
    /// `None` while the utilization window is still empty.
    pub predicted: Option<f64>,
    pub actual: f64,
    pub fallback: Fallback,
}

impl PredictionRecord {
    pub fn is_warm_up(&self) -> bool {
        self.predicted.is_none()
    }
}

/// Predict the rate at the store cursor.
///
/// The fit runs over the window's `(offset, rate)` pairs and is evaluated at
/// offset `n`, the cursor itself. Negative extrapolations clamp to zero.
pub fn predict_step(ds: &CyclicDataset, cfg: &ForecastConfig) -> Result<LlrPrediction> {
    let window = ds.extract_window(cfg.up_tps)?;
    let points = window.points();
    let mut kernel = cfg.kernel;
    // Warm-up windows may hold fewer points than the neighbour count.
    if let Bandwidth::KNearest(k) = kernel.bandwidth {
        kernel.bandwidth = Bandwidth::KNearest(k.min(points.len()));
    }
    let mut prediction = llr_predict(&points, window.n as f64, &kernel)?;
    prediction.value = prediction.value.max(0.0);
    Ok(prediction)
}

/// Fit the observed period and store it at the cursor.
pub fn observe_step(ds: &mut CyclicDataset, obs: &PeriodObservation) -> Result<PoissonParam> {
    if obs.tp_index != ds.cursor() {
        return Err(Error::OutOfOrder(format!(
            "observation for position {} but the store expects position {}",
            obs.tp_index,
            ds.cursor()
        )));
    }
    let actual = poisson_mle(obs)?;
    ds.update(actual);
    Ok(actual)
}

/// Online forecaster: one [`CyclicForecaster::step`] per target period.
#[derive(Debug, Clone)]
pub struct CyclicForecaster {
    cfg: ForecastConfig,
    store: CyclicDataset,
    last: Option<(usize, usize)>,
}

impl CyclicForecaster {
    pub fn new(cfg: ForecastConfig) -> Result<Self> {
        cfg.validate()?;
        let store = CyclicDataset::new(cfg.pp_tps, cfg.cycles)?;
        Ok(Self { cfg, store, last: None })
    }

    pub fn config(&self) -> &ForecastConfig {
        &self.cfg
    }

    pub fn store(&self) -> &CyclicDataset {
        &self.store
    }

    /// Prediction for the next period, or `None` during warm-up.
    pub fn predict(&self) -> Result<Option<LlrPrediction>> {
        match predict_step(&self.store, &self.cfg) {
            Ok(p) => Ok(Some(p)),
            Err(Error::EmptyWindow) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn step(&mut self, obs: &PeriodObservation) -> Result<PredictionRecord> {
        if obs.metric != self.cfg.metric {
            return Err(Error::invalid(format!(
                "observation metric {} does not match configured {}",
                obs.metric, self.cfg.metric
            )));
        }
        let expected = match self.last {
            None => (1, obs.cycle_index),
            Some((tp, cycle)) if tp < self.cfg.pp_tps => (tp + 1, cycle),
            Some((_, cycle)) => (1, cycle + 1),
        };
        if (obs.tp_index, obs.cycle_index) != expected {
            return Err(Error::OutOfOrder(format!(
                "got position {} of cycle {}, expected position {} of cycle {}",
                obs.tp_index, obs.cycle_index, expected.0, expected.1
            )));
        }

        let t = self.store.step();
        let prediction = self.predict()?;
        let actual = observe_step(&mut self.store, obs)?;
        self.last = Some((obs.tp_index, obs.cycle_index));
        Ok(PredictionRecord {
            t,
            tp_index: obs.tp_index,
            cycle_index: obs.cycle_index,
            predicted: prediction.map(|p| p.value),
            actual: actual.lambda(),
            fallback: prediction.map(|p| p.fallback).unwrap_or_default(),
        })
    }
}

/// Replay an ordered observation stream through a fresh forecaster.
pub fn run(observations: &[PeriodObservation], cfg: &ForecastConfig) -> Result<Vec<PredictionRecord>> {
    let mut forecaster = CyclicForecaster::new(cfg.clone())?;
    observations.iter().map(|obs| forecaster.step(obs)).collect()
}

/// Moving-window average with Poisson-shaped weights.
///
/// The `i`-th newest of the last `window` values (i = 0 for the newest) is
/// weighted by the Poisson(`window`) probability of `i`.
pub fn baseline_poisson_window(history: &[f64], window: usize) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::invalid("baseline needs a nonempty history"));
    }
    if window == 0 {
        return Err(Error::config("poisson window must be positive"));
    }
    let shape = PoissonParam::new(window as f64)?;
    let recent = history.iter().rev().take(window);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &h) in recent.clone().enumerate() {
        let w = poisson_pmf(shape, i as u64);
        num += w * h;
        den += w;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        let n = recent.len() as f64;
        Ok(recent.sum::<f64>() / n)
    }
}

/// Most recent value.
pub fn baseline_naive(history: &[f64]) -> Result<f64> {
    history.last().copied().ok_or_else(|| Error::invalid("baseline needs a nonempty history"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Naive,
    PoissonWindow(usize),
}

impl Baseline {
    pub fn predict(self, history: &[f64]) -> Result<f64> {
        match self {
            Baseline::Naive => baseline_naive(history),
            Baseline::PoissonWindow(w) => baseline_poisson_window(history, w),
        }
    }

    /// One-step-ahead predictions for every position of `actuals` that has
    /// at least one predecessor.
    pub fn walk_forward(self, actuals: &[f64]) -> Result<Vec<Option<f64>>> {
        (0..actuals.len())
            .map(|i| if i == 0 { Ok(None) } else { self.predict(&actuals[..i]).map(Some) })
            .collect()
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Baseline::Naive => f.write_str("naive"),
            Baseline::PoissonWindow(w) => write!(f, "poisson_window_{w}"),
        }
    }
}

pub const RECORD_HEADER: &str = "t,tp_index,predicted_lambda,actual_lambda,fallback_used";
const WARM_UP: &str = "warmup";

pub fn write_records<W: Write>(mut out: W, records: &[PredictionRecord]) -> Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        match r.predicted {
            Some(p) => writeln!(out, "{},{},{},{},{}", r.t, r.tp_index, p, r.actual, r.fallback)?,
            None => writeln!(out, "{},{},NA,{},{WARM_UP}", r.t, r.tp_index, r.actual)?,
        }
    }
    Ok(())
}

/// Read records back. Cycle indices are not part of the file and are
/// reconstructed from wrap-arounds of `tp_index`.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<PredictionRecord>> {
    let mut out: Vec<PredictionRecord> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.starts_with("t,")) {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let t = f[0].parse().map_err(|_| err(format!("bad step `{}`", f[0])))?;
        let tp_index: usize = f[1].parse().map_err(|_| err(format!("bad tp_index `{}`", f[1])))?;
        let actual = f[3].parse().map_err(|_| err(format!("bad actual `{}`", f[3])))?;
        let (predicted, fallback) = if f[4] == WARM_UP {
            (None, Fallback::None)
        } else {
            let p = f[2].parse().map_err(|_| err(format!("bad prediction `{}`", f[2])))?;
            (Some(p), f[4].parse().map_err(|_| err(format!("bad fallback `{}`", f[4])))?)
        };
        let cycle_index = match out.last() {
            None => 1,
            Some(prev) if tp_index <= prev.tp_index => prev.cycle_index + 1,
            Some(prev) => prev.cycle_index,
        };
        out.push(PredictionRecord { t, tp_index, cycle_index, predicted, actual, fallback });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llr::KernelFamily;

    fn obs(tp: usize, cycle: usize, samples: Vec<u64>) -> PeriodObservation {
        PeriodObservation {
            tp_index: tp,
            cycle_index: cycle,
            metric: MetricKind::Arrivals,
            samples,
            sub_bin_seconds: 60,
            scale: 1.0,
        }
    }

    fn filled_store(m: usize, l: usize, value: impl Fn(usize) -> f64) -> CyclicDataset {
        let mut ds = CyclicDataset::new(m, l).unwrap();
        for i in 0..m * l {
            ds.update(PoissonParam::new(value(i % m + 1)).unwrap());
        }
        ds
    }

    fn cfg(m: usize, n: usize, l: usize, kernel: KernelSpec) -> ForecastConfig {
        ForecastConfig { pp_tps: m, up_tps: n, cycles: l, kernel, ..ForecastConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(ForecastConfig::default().validate().is_ok());
        let bad = ForecastConfig { up_tps: 400, ..ForecastConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad = ForecastConfig { sub_bin_seconds: 7, ..ForecastConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ForecastConfig { cycles: 0, ..ForecastConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_store_predicts_constant() {
        let ds = filled_store(12, 2, |_| 4.0);
        for n in [1, 3, 12] {
            for family in [KernelFamily::Epanechnikov, KernelFamily::Gaussian] {
                let k = KernelSpec { family, bandwidth: Bandwidth::KNearest(4) };
                let p = predict_step(&ds, &cfg(12, n, 2, k)).unwrap();
                assert!((p.value - 4.0).abs() < 1e-12, "n={n}: {p:?}");
            }
        }
    }

    #[test]
    fn ramp_over_window_is_extrapolated() {
        // After a full pass the cursor is at 1; window offsets x map to
        // positions m-n+1+x for x<n and position 1 for x=n.
        let (m, n) = (10, 6);
        let ds = filled_store(m, 2, |pos| match pos {
            1 => n as f64,
            p if p > m - n + 1 => (p + n - m - 1) as f64,
            _ => 0.0,
        });
        let k = KernelSpec { family: KernelFamily::Epanechnikov, bandwidth: Bandwidth::KNearest(8) };
        let p = predict_step(&ds, &cfg(m, n, 2, k)).unwrap();
        assert!((p.value - n as f64).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn negative_extrapolation_clamps() {
        // Positions 1..=4 fall steeply; position 5 (the cursor) is unseen.
        let mut ds = CyclicDataset::new(10, 1).unwrap();
        for v in [12.0, 8.0, 4.0, 1.0] {
            ds.update(PoissonParam::new(v).unwrap());
        }
        let k = KernelSpec { family: KernelFamily::Gaussian, bandwidth: Bandwidth::FixedRadius(3.0) };
        let p = predict_step(&ds, &cfg(10, 5, 1, k)).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn observe_writes_at_cursor() {
        let mut ds = CyclicDataset::new(4, 2).unwrap();
        assert_eq!(observe_step(&mut ds, &obs(1, 1, vec![2, 3, 4])).unwrap().lambda(), 3.0);
        assert_eq!(ds.get(1, 1).unwrap().lambda(), 3.0);
        assert_eq!(observe_step(&mut ds, &obs(2, 1, vec![0, 0])).unwrap().lambda(), 0.0);
        assert_eq!(ds.get(2, 1).unwrap().lambda(), 0.0);
        assert!(matches!(observe_step(&mut ds, &obs(1, 1, vec![1])), Err(Error::OutOfOrder(_))));
        assert!(observe_step(&mut ds, &obs(3, 1, vec![])).is_err());
    }

    #[test]
    fn run_marks_warm_up_and_keeps_count() {
        let (m, l) = (4, 2);
        let stream: Vec<_> =
            (0..m * l).map(|k| obs(k % m + 1, k / m + 1, vec![k as u64 % 3, 2])).collect();
        let records = run(&stream, &cfg(m, 2, l, KernelSpec::default())).unwrap();
        assert_eq!(records.len(), m * l);
        assert!(records[0].is_warm_up());
        assert!(records[1..].iter().all(|r| !r.is_warm_up()));
        assert!(records.iter().all(|r| r.predicted.unwrap_or(0.0) >= 0.0));
        assert_eq!(records.iter().map(|r| r.t).collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn run_rejects_gaps() {
        let stream = vec![obs(1, 1, vec![1]), obs(3, 1, vec![1])];
        assert!(matches!(run(&stream, &cfg(4, 2, 1, KernelSpec::default())), Err(Error::OutOfOrder(_))));
        let late_start = vec![obs(2, 1, vec![1])];
        assert!(run(&late_start, &cfg(4, 2, 1, KernelSpec::default())).is_err());
    }

    #[test]
    fn poisson_window_baseline() {
        assert_eq!(baseline_poisson_window(&[2.5; 9], 4).unwrap(), 2.5);
        assert_eq!(baseline_poisson_window(&[5.0], 1000).unwrap(), 5.0);
        assert_eq!(baseline_poisson_window(&[1.0, 2.0, 3.0], 1).unwrap(), 3.0);
        // Weights e^-3 * (1, 3, 9/2) on the newest three values (8, 4, 2).
        let got = baseline_poisson_window(&[1.0, 2.0, 4.0, 8.0], 3).unwrap();
        assert!((got - 29.0 / 8.5).abs() < 1e-12, "{got}");
        assert!(baseline_poisson_window(&[], 3).is_err());
    }

    #[test]
    fn naive_baseline() {
        assert_eq!(baseline_naive(&[1.0, 2.0, 3.0]).unwrap(), 3.0);
        assert_eq!(baseline_naive(&[7.5]).unwrap(), 7.5);
        assert!(baseline_naive(&[]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let stream: Vec<_> = (0..9).map(|k| obs(k % 3 + 1, k / 3 + 1, vec![k as u64, 1])).collect();
        let c = cfg(3, 2, 2, KernelSpec { family: KernelFamily::Gaussian, bandwidth: Bandwidth::KNearest(3) });
        let records = run(&stream, &c).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        assert!(String::from_utf8_lossy(&buf).lines().nth(1).unwrap().ends_with(",NA,0.5,warmup"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }
}
