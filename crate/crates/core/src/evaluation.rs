//! Forecast accuracy: MAPE, configuration sweeps and baseline comparison.

use std::io::Write;
use std::thread;

use crate::error::{Error, Result};
use crate::forecaster::{run, Baseline, ForecastConfig, PredictionRecord};
use crate::llr::Bandwidth;
use crate::trace::PeriodObservation;

#[derive(Debug, Clone, PartialEq)]
pub struct MapeSummary {
    pub mape: f64,
    /// Absolute percentage error of each retained pair, as a fraction.
    pub errors: Vec<f64>,
    /// Indices (into the inputs) of the retained pairs.
    pub retained: Vec<usize>,
    pub skipped_zero_targets: usize,
}

/// Mean of `|P - T| / T` over pairs with `T > 0`. Zero targets are skipped
/// and counted rather than perturbed.
pub fn mape_detailed(predicted: &[f64], target: &[f64]) -> Result<MapeSummary> {
    if predicted.len() != target.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} targets",
            predicted.len(),
            target.len()
        )));
    }
    let mut errors = Vec::with_capacity(target.len());
    let mut retained = Vec::with_capacity(target.len());
    for (i, (&p, &t)) in predicted.iter().zip(target).enumerate() {
        if t > 0.0 {
            errors.push((p - t).abs() / t);
            retained.push(i);
        }
    }
    if errors.is_empty() {
        return Err(Error::invalid("no pair has a positive target"));
    }
    let mape = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(MapeSummary {
        mape,
        skipped_zero_targets: target.len() - errors.len(),
        errors,
        retained,
    })
}

pub fn mape(predicted: &[f64], target: &[f64]) -> Result<f64> {
    mape_detailed(predicted, target).map(|s| s.mape)
}

/// Relative improvement of `a` over `b` in percent: `(b - a) / b * 100`.
pub fn compare(mape_a: f64, mape_b: f64) -> Result<f64> {
    if mape_b == 0.0 {
        return Err(Error::invalid("reference MAPE is zero"));
    }
    Ok((mape_b - mape_a) / mape_b * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorResult {
    pub baseline: Baseline,
    pub mape: f64,
    /// Improvement of the cyclic forecaster over this baseline, percent.
    pub improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpError {
    pub t: u64,
    pub tp_index: usize,
    pub predicted: f64,
    pub target: f64,
    pub ape: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub config_id: String,
    pub up_tps: usize,
    pub bandwidth: Option<Bandwidth>,
    pub mape: f64,
    pub errors: Vec<TpError>,
    /// Test periods considered, before any skipping.
    pub evaluated: usize,
    pub skipped_zero_targets: usize,
    pub skipped_warm_up: usize,
    pub comparators: Vec<ComparatorResult>,
    /// The training stream held fewer than `cycles` full pattern periods.
    pub insufficient_train: bool,
}

impl EvaluationReport {
    pub fn retained(&self) -> usize {
        self.errors.len()
    }
}

pub fn config_id(cfg: &ForecastConfig) -> String {
    format!(
        "{}-{}-up{}-{}-l{}",
        cfg.metric, cfg.kernel.family, cfg.up_tps, cfg.kernel.bandwidth, cfg.cycles
    )
}

/// Score the records from index `test_start` on against their own fitted
/// rates, and score each baseline on exactly the same periods.
pub fn evaluate_records(
    records: &[PredictionRecord],
    test_start: usize,
    baselines: &[Baseline],
    config_id: String,
) -> Result<EvaluationReport> {
    if test_start >= records.len() {
        return Err(Error::invalid(format!(
            "test section starts at record {test_start} but only {} records exist",
            records.len()
        )));
    }
    let test = &records[test_start..];
    let scored: Vec<usize> = (test_start..records.len())
        .filter(|&i| records[i].predicted.is_some())
        .collect();
    let skipped_warm_up = test.len() - scored.len();

    let predicted: Vec<f64> = scored.iter().map(|&i| records[i].predicted.unwrap_or(0.0)).collect();
    let target: Vec<f64> = scored.iter().map(|&i| records[i].actual).collect();
    let summary = mape_detailed(&predicted, &target)?;
    let kept: Vec<usize> = summary.retained.iter().map(|&j| scored[j]).collect();

    let actuals: Vec<f64> = records.iter().map(|r| r.actual).collect();
    let mut comparators = Vec::with_capacity(baselines.len());
    for &baseline in baselines {
        let mut bp = Vec::with_capacity(kept.len());
        let mut bt = Vec::with_capacity(kept.len());
        for &i in &kept {
            if i == 0 {
                continue;
            }
            bp.push(baseline.predict(&actuals[..i])?);
            bt.push(actuals[i]);
        }
        let base_mape = mape(&bp, &bt)?;
        comparators.push(ComparatorResult {
            baseline,
            mape: base_mape,
            improvement_pct: compare(summary.mape, base_mape).unwrap_or(f64::NAN),
        });
    }

    let errors = kept
        .iter()
        .zip(&summary.errors)
        .map(|(&i, &ape)| TpError {
            t: records[i].t,
            tp_index: records[i].tp_index,
            predicted: records[i].predicted.unwrap_or(0.0),
            target: records[i].actual,
            ape,
        })
        .collect();

    Ok(EvaluationReport {
        config_id,
        up_tps: 0,
        bandwidth: None,
        mape: summary.mape,
        errors,
        evaluated: test.len(),
        skipped_zero_targets: summary.skipped_zero_targets,
        skipped_warm_up,
        comparators,
        insufficient_train: false,
    })
}

/// Run every configuration over `train ++ test` and score the test part.
///
/// `threads` > 1 spreads configurations over scoped worker threads; the
/// result order does not depend on it.
pub fn sweep(
    grid: &[ForecastConfig],
    train: &[PeriodObservation],
    test: &[PeriodObservation],
    baselines: &[Baseline],
    threads: usize,
) -> Result<Vec<EvaluationReport>> {
    if test.is_empty() {
        return Err(Error::invalid("test stream is empty"));
    }
    let stream: Vec<PeriodObservation> = train.iter().chain(test).cloned().collect();
    let evaluate = |cfg: &ForecastConfig| -> Result<EvaluationReport> {
        let records = run(&stream, cfg)?;
        let mut report = evaluate_records(&records, train.len(), baselines, config_id(cfg))?;
        report.up_tps = cfg.up_tps;
        report.bandwidth = Some(cfg.kernel.bandwidth);
        report.insufficient_train = train.len() < cfg.cycles * cfg.pp_tps;
        Ok(report)
    };

    let threads = threads.max(1).min(grid.len().max(1));
    let mut results: Vec<Result<EvaluationReport>> = if threads == 1 {
        grid.iter().map(evaluate).collect()
    } else {
        let chunk = grid.len().div_ceil(threads);
        thread::scope(|s| {
            let handles: Vec<_> = grid
                .chunks(chunk)
                .map(|cfgs| s.spawn(|| cfgs.iter().map(&evaluate).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
        })
    };

    let mut reports = results.drain(..).collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| {
        let bw = |r: &EvaluationReport| r.bandwidth.map_or(0.0, |b| b.value());
        a.up_tps.cmp(&b.up_tps).then(bw(a).total_cmp(&bw(b)))
    });
    Ok(reports)
}

/// Summary table, one row per report.
pub fn write_reports<W: Write>(mut out: W, reports: &[EvaluationReport]) -> Result<()> {
    let baselines: Vec<Baseline> = reports
        .first()
        .map(|r| r.comparators.iter().map(|c| c.baseline).collect())
        .unwrap_or_default();
    write!(
        out,
        "config_id,up_tps,bandwidth,mape,evaluated,retained,skipped_zero_targets,skipped_warm_up,insufficient_train"
    )?;
    for b in &baselines {
        write!(out, ",{b}_mape,improvement_vs_{b}_pct")?;
    }
    writeln!(out)?;
    for r in reports {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.config_id,
            r.up_tps,
            r.bandwidth.map_or_else(String::new, |b| b.to_string()),
            r.mape,
            r.evaluated,
            r.retained(),
            r.skipped_zero_targets,
            r.skipped_warm_up,
            r.insufficient_train
        )?;
        for c in &r.comparators {
            write!(out, ",{},{}", c.mape, c.improvement_pct)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Plot-ready `(up_tps, bandwidth, mape)` rows.
pub fn write_plot_table<W: Write>(mut out: W, reports: &[EvaluationReport]) -> Result<()> {
    writeln!(out, "up_tps,bandwidth,mape")?;
    for r in reports {
        writeln!(out, "{},{},{}", r.up_tps, r.bandwidth.map_or(0.0, |b| b.value()), r.mape)?;
    }
    Ok(())
}

pub fn write_errors<W: Write>(mut out: W, reports: &[EvaluationReport]) -> Result<()> {
    writeln!(out, "config_id,t,tp_index,predicted_lambda,target_lambda,ape")?;
    for r in reports {
        for e in &r.errors {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.config_id, e.t, e.tp_index, e.predicted, e.target, e.ape
            )?;
        }
    }
    Ok(())
}
