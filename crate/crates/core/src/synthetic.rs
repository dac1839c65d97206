//! Seeded synthetic traces with a known, cyclic Poisson rate.
//!
//! The rate of target period `j` is
//! `base * (1 + daily_amp * sin(2 pi pos / tps_per_day)) * (1 + weekly_amp * sin(2 pi pos / m))`
//! with `pos = j mod m`, optionally multiplied by a lognormal factor drawn
//! once per period. Every sub-bin count is an independent Poisson draw at
//! that rate.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

use crate::error::{Error, Result};
use crate::trace::{TraceEvent, MICROS_PER_SECOND};

/// Generator identity, recorded alongside outputs.
pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Target periods per pattern period (m).
    pub pp_tps: usize,
    /// Number of target periods to generate.
    pub tps: usize,
    pub tp_seconds: u64,
    pub sub_bin_seconds: u64,
    pub tps_per_day: usize,
    /// Mean count per sub-bin before modulation.
    pub base_lambda: f64,
    pub daily_amp: f64,
    pub weekly_amp: f64,
    /// Standard deviation of the log of the per-period noise factor.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pp_tps: 336,
            tps: 3 * 336,
            tp_seconds: 1800,
            sub_bin_seconds: 60,
            tps_per_day: 48,
            base_lambda: 5.0,
            daily_amp: 0.6,
            weekly_amp: 0.3,
            noise_sigma: 0.1,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pp_tps == 0 || self.tps == 0 || self.tps_per_day == 0 {
            return Err(Error::config("period counts must be positive"));
        }
        if self.sub_bin_seconds == 0 || !self.tp_seconds.is_multiple_of(self.sub_bin_seconds) {
            return Err(Error::config(format!(
                "sub-bin of {} s must divide the {} s target period",
                self.sub_bin_seconds, self.tp_seconds
            )));
        }
        if !(self.base_lambda.is_finite() && self.base_lambda > 0.0) {
            return Err(Error::config(format!("base rate must be positive, got {}", self.base_lambda)));
        }
        for (name, a) in [("daily", self.daily_amp), ("weekly", self.weekly_amp)] {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::config(format!("{name} amplitude must lie in [0, 1), got {a}")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// Noise-free rate of 0-based target period `j`.
    pub fn pattern_rate(&self, j: usize) -> f64 {
        let pos = (j % self.pp_tps) as f64;
        let daily = 1.0 + self.daily_amp * (2.0 * PI * pos / self.tps_per_day as f64).sin();
        let weekly = 1.0 + self.weekly_amp * (2.0 * PI * pos / self.pp_tps as f64).sin();
        self.base_lambda * daily * weekly
    }

    pub fn sub_bins(&self) -> usize {
        (self.tp_seconds / self.sub_bin_seconds) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthPoint {
    /// 1-based step.
    pub t: usize,
    pub tp_index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub events: Vec<TraceEvent>,
    pub truth: Vec<TruthPoint>,
    /// Drawn count of every sub-bin, per target period.
    pub counts: Vec<Vec<u64>>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticTrace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = if spec.noise_sigma > 0.0 {
        Some(LogNormal::new(0.0, spec.noise_sigma).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };
    let bin_us = spec.sub_bin_seconds as i64 * MICROS_PER_SECOND;
    let tp_us = spec.tp_seconds as i64 * MICROS_PER_SECOND;

    let mut out = SyntheticTrace {
        events: Vec::new(),
        truth: Vec::with_capacity(spec.tps),
        counts: Vec::with_capacity(spec.tps),
    };
    for j in 0..spec.tps {
        let factor = noise.as_ref().map_or(1.0, |d| d.sample(&mut rng));
        let rate = spec.pattern_rate(j) * factor;
        out.truth.push(TruthPoint { t: j + 1, tp_index: j % spec.pp_tps + 1, lambda: rate });

        let draw = Poisson::new(rate).map_err(|e| Error::config(e.to_string()))?;
        let mut counts = Vec::with_capacity(spec.sub_bins());
        for b in 0..spec.sub_bins() {
            let c = draw.sample(&mut rng) as u64;
            let bin_start = j as i64 * tp_us + b as i64 * bin_us;
            for k in 0..c {
                // Evenly spaced inside the sub-bin.
                let offset = ((2 * k + 1) as i64 * bin_us) / (2 * c as i64);
                let cpu = (rng.random_range(1..=100) as f64) / 1000.0;
                let mem = (rng.random_range(1..=100) as f64) / 2000.0;
                out.events.push(TraceEvent {
                    timestamp: bin_start + offset,
                    job_id: format!("j{}", j + 1),
                    task_id: format!("{b}.{k}"),
                    cpu_request: cpu,
                    mem_request: mem,
                });
            }
            counts.push(c);
        }
        out.counts.push(counts);
    }
    Ok(out)
}

pub const TRACE_HEADER: &str = "timestamp,job_id,task_id,cpu_request,mem_request";

/// Write events in the default trace layout read by [`crate::trace::parse_trace`].
pub fn write_trace<W: Write>(mut out: W, events: &[TraceEvent]) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in events {
        writeln!(out, "{},{},{},{},{}", e.timestamp, e.job_id, e.task_id, e.cpu_request, e.mem_request)?;
    }
    Ok(())
}

pub fn write_truth<W: Write>(mut out: W, truth: &[TruthPoint]) -> Result<()> {
    writeln!(out, "t,tp_index,true_lambda")?;
    for p in truth {
        writeln!(out, "{},{},{}", p.t, p.tp_index, p.lambda)?;
    }
    Ok(())
}
