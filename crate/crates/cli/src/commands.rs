use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use reqcast_core::evaluation::{evaluate_records, sweep, write_errors, write_plot_table, write_reports};
use reqcast_core::forecaster::{read_records, run, write_records};
use reqcast_core::synthetic::{generate, write_trace, write_truth, RNG_NAME};
use reqcast_core::trace::{aggregate_stream, parse_trace, read_observations, write_observations, ColumnRef};
use reqcast_core::{
    poisson_mle, Bandwidth, Baseline, EvaluationReport, Fallback, ForecastConfig, MetricKind, PeriodObservation,
    SyntheticSpec, TraceFormat,
};

use crate::args::{BaselineKind, EvaluateArgs, FitArgs, IngestArgs, Layout, PredictArgs, SynthArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::settings::Resolver;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

/// Create `dir/name`, fill it with `fill`, and list it in the manifest.
fn emit<F>(manifest: &mut RunManifest, dir: &Path, name: &str, fill: F) -> CliResult<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> reqcast_core::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut out = BufWriter::new(file);
    fill(&mut out).map_err(|e| CliError::from_core(e, &path))?;
    out.flush().map_err(|e| CliError::io(&path, e))?;
    manifest.output(&path)?;
    Ok(path)
}

fn load_observations(path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<PeriodObservation>> {
    let obs = read_observations(open(path)?).map_err(|e| CliError::from_core(e, path))?;
    manifest.input(path)?;
    Ok(obs)
}

/// The requested metric, or the single metric present in the data.
fn choose_metric(requested: Option<MetricKind>, obs: &[PeriodObservation]) -> CliResult<MetricKind> {
    if let Some(m) = requested {
        return Ok(m);
    }
    let present: BTreeSet<&str> = obs.iter().map(|o| o.metric.as_str()).collect();
    match (present.len(), obs.first()) {
        (1, Some(o)) => Ok(o.metric),
        (0, _) => Err(CliError::data("no observations")),
        _ => Err(CliError::usage(format!(
            "observations hold several metrics ({}); pick one with --metric",
            present.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn select(obs: Vec<PeriodObservation>, metric: MetricKind, what: &str) -> CliResult<Vec<PeriodObservation>> {
    let kept: Vec<_> = obs.into_iter().filter(|o| o.metric == metric).collect();
    if kept.is_empty() {
        return Err(CliError::data(format!("{what} has no {metric} observations")));
    }
    Ok(kept)
}

/// Observations must have been aggregated with the configured period layout.
fn check_layout(obs: &[PeriodObservation], cfg: &ForecastConfig) -> CliResult<()> {
    let expected = (cfg.tp_seconds() / cfg.sub_bin_seconds) as usize;
    for o in obs {
        if o.sub_bin_seconds != cfg.sub_bin_seconds || o.samples.len() != expected {
            return Err(CliError::data(format!(
                "period {} of cycle {} has {} samples of {} s, expected {expected} of {} s",
                o.tp_index,
                o.cycle_index,
                o.samples.len(),
                o.sub_bin_seconds,
                cfg.sub_bin_seconds
            )));
        }
    }
    Ok(())
}

fn column(r: &mut Resolver, key: &str, flag: Option<String>) -> CliResult<Option<ColumnRef>> {
    r.opt(key, flag)?
        .map(|c| c.parse::<ColumnRef>().map_err(|e| CliError::usage(format!("--{key}: {e}"))))
        .transpose()
}

pub fn ingest(a: &IngestArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("ingest");
    let mut r = Resolver::new(&a.shared)?;
    let out_dir = r.out_dir(&a.shared)?;

    let layout_flag = a.layout.map(|l| if l == Layout::Google { "google" } else { "default" }.to_string());
    let mut format = match r.get("layout", layout_flag, "default".to_string())?.as_str() {
        "default" => TraceFormat::default(),
        "google" => TraceFormat::google_task_events(),
        other => return Err(CliError::usage(format!("unknown layout `{other}`"))),
    };
    if let Some(c) = column(&mut r, "col-ts", a.col_ts.clone())? {
        format.timestamp = c;
    }
    if let Some(c) = column(&mut r, "col-cpu", a.col_cpu.clone())? {
        format.cpu = c;
    }
    if let Some(c) = column(&mut r, "col-mem", a.col_mem.clone())? {
        format.memory = c;
    }
    if format.has_header && r.flag("no-header", a.no_header)? {
        format.has_header = false;
    }
    if let Some(d) = r.opt::<char>("delimiter", a.delimiter)? {
        format.delimiter =
            u8::try_from(d).map_err(|_| CliError::usage(format!("delimiter `{d}` is not a single byte")))?;
    }

    let tp_min: u64 = r.get("tp-min", a.shared.tp_min, 30)?;
    let pp_tps: usize = r.get("pp-tps", a.shared.pp_tps, 336)?;
    let sub_bin: u64 = r.get("sub-bin-sec", a.shared.sub_bin_sec, 60)?;
    let scale: f64 = r.get("scale", a.shared.scale, 100.0)?;
    let start_us: i64 = r.get("start-us", a.start_us, 0)?;
    let metrics = match r.metric(&a.shared)? {
        Some(m) => vec![m],
        None => MetricKind::ALL.to_vec(),
    };
    if tp_min == 0 {
        return Err(CliError::usage("--tp-min must be positive"));
    }

    let parsed = parse_trace(open(&a.trace)?, &format).map_err(|e| CliError::from_core(e, &a.trace))?;
    manifest.input(&a.trace)?;

    let tp_us = tp_min as i64 * 60 * 1_000_000;
    let covering = parsed
        .events
        .last()
        .filter(|e| e.timestamp >= start_us)
        .map_or(0, |e| ((e.timestamp - start_us) / tp_us + 1) as usize);
    let tps = r.get("tps", a.tps, covering)?;
    let split = r.opt("split-at", a.split_at)?;
    if split.is_some_and(|s| s == 0 || s >= tps) {
        return Err(CliError::usage(format!("--split-at must lie in 1..{tps}")));
    }

    for metric in metrics {
        let obs = aggregate_stream(&parsed.events, start_us, tp_min * 60, tps, pp_tps, metric, sub_bin, scale)
            .map_err(|e| CliError::from_core(e, &a.trace))?;
        emit(&mut manifest, &out_dir, &format!("observations_{metric}.csv"), |w| write_observations(w, &obs))?;
        if let Some(at) = split {
            let (train, test) = obs.split_at(at);
            emit(&mut manifest, &out_dir, &format!("observations_{metric}_train.csv"), |w| {
                write_observations(w, train)
            })?;
            emit(&mut manifest, &out_dir, &format!("observations_{metric}_test.csv"), |w| {
                write_observations(w, test)
            })?;
        }
    }

    eprintln!(
        "ingested {} events into {tps} target periods, {} rows rejected",
        parsed.events.len(),
        parsed.rejected
    );
    manifest.note("events", parsed.events.len());
    manifest.note("rejected_rows", parsed.rejected);
    manifest.note("target_periods", tps);
    manifest.config = r.into_echo();
    manifest.write(&out_dir)?;
    Ok(())
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("fit");
    let mut r = Resolver::new(&a.shared)?;
    let out_dir = r.out_dir(&a.shared)?;
    let only = r.metric(&a.shared)?;

    let mut all = Vec::new();
    for path in &a.obs {
        all.extend(load_observations(path, &mut manifest)?);
    }
    if all.is_empty() {
        return Err(CliError::data("no observations to fit"));
    }

    let mut written = 0;
    for metric in MetricKind::ALL {
        if only.is_some_and(|m| m != metric) {
            continue;
        }
        let obs: Vec<&PeriodObservation> = all.iter().filter(|o| o.metric == metric).collect();
        if obs.is_empty() {
            continue;
        }
        let fitted = obs
            .iter()
            .map(|o| poisson_mle(o).map(|p| p.lambda()))
            .collect::<reqcast_core::Result<Vec<f64>>>()?;
        emit(&mut manifest, &out_dir, &format!("lambda_{metric}.csv"), |w| {
            writeln!(w, "t,tp_index,cycle_index,lambda,empty")?;
            for (i, (o, lambda)) in obs.iter().zip(&fitted).enumerate() {
                writeln!(w, "{},{},{},{},{}", i + 1, o.tp_index, o.cycle_index, lambda, o.is_idle())?;
            }
            Ok(())
        })?;
        manifest.note(&format!("empty_periods_{metric}"), obs.iter().filter(|o| o.is_idle()).count());
        written += 1;
    }
    if written == 0 {
        return Err(CliError::data("no observations of the requested metric"));
    }
    manifest.config = r.into_echo();
    manifest.write(&out_dir)?;
    Ok(())
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("predict");
    let mut r = Resolver::new(&a.shared)?;
    let out_dir = r.out_dir(&a.shared)?;

    let train = load_observations(&a.train, &mut manifest)?;
    let test = match &a.test {
        Some(p) => load_observations(p, &mut manifest)?,
        None => Vec::new(),
    };
    let requested = r.metric(&a.shared)?;
    let metric = choose_metric(requested, &train)?;
    let cfg = r.forecast_config(&a.shared, metric)?;
    let train = select(train, metric, "train stream")?;
    let test = if test.is_empty() { test } else { select(test, metric, "test stream")? };

    let stream: Vec<PeriodObservation> = train.iter().chain(&test).cloned().collect();
    check_layout(&stream, &cfg)?;
    let records = run(&stream, &cfg)?;
    emit(&mut manifest, &out_dir, &format!("records_{metric}.csv"), |w| write_records(w, &records))?;

    let warm_up = records.iter().filter(|r| r.is_warm_up()).count();
    for fb in [Fallback::WidenedH, Fallback::WeightedMean, Fallback::GlobalLine] {
        manifest.note(&format!("fallback_{fb}"), records.iter().filter(|r| r.fallback == fb).count());
    }
    manifest.note("test_from_t", train.len() + 1);
    manifest.note("warm_up_steps", warm_up);
    eprintln!("{} steps, {warm_up} in warm-up, test section starts at t={}", records.len(), train.len() + 1);
    manifest.config = r.into_echo();
    manifest.write(&out_dir)?;
    Ok(())
}

fn baselines(r: &mut Resolver, a: &EvaluateArgs) -> CliResult<Vec<Baseline>> {
    let window: usize = r.get("baseline-window", a.baseline_window, 2)?;
    if window == 0 {
        return Err(CliError::usage("--baseline-window must be positive"));
    }
    let mut out = Vec::new();
    for kind in &a.baseline {
        let b = match kind {
            BaselineKind::Naive => Baseline::Naive,
            BaselineKind::PoissonWindow => Baseline::PoissonWindow(window),
        };
        if !out.contains(&b) {
            out.push(b);
        }
    }
    Ok(out)
}

fn sweep_grid(base: &ForecastConfig, a: &EvaluateArgs) -> CliResult<Vec<ForecastConfig>> {
    let ups = if a.up_grid.is_empty() { vec![base.up_tps] } else { a.up_grid.clone() };
    let mut bws: Vec<Bandwidth> = a.k_grid.iter().map(|&k| Bandwidth::KNearest(k)).collect();
    bws.extend(a.h_grid.iter().map(|&h| Bandwidth::FixedRadius(h)));
    if bws.is_empty() {
        bws.push(base.kernel.bandwidth);
    }
    let mut grid = Vec::with_capacity(ups.len() * bws.len());
    for &up_tps in &ups {
        for &bandwidth in &bws {
            let mut cfg = base.clone();
            cfg.up_tps = up_tps;
            cfg.kernel.bandwidth = bandwidth;
            cfg.validate().map_err(|e| CliError::usage(format!("grid point up={up_tps} {bandwidth}: {e}")))?;
            grid.push(cfg);
        }
    }
    Ok(grid)
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("evaluate");
    let mut r = Resolver::new(&a.shared)?;
    let out_dir = r.out_dir(&a.shared)?;
    let baselines = baselines(&mut r, a)?;
    manifest.note("baselines", baselines.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));

    let reports: Vec<EvaluationReport> = if let Some(path) = &a.records {
        let records = read_records(open(path)?).map_err(|e| CliError::from_core(e, path))?;
        manifest.input(path)?;
        let from: u64 = r.get("test-from-t", a.test_from_t, 1)?;
        let start = records
            .iter()
            .position(|rec| rec.t >= from)
            .ok_or_else(|| CliError::data(format!("no records at or after t={from}")))?;
        vec![evaluate_records(&records, start, &baselines, "records".to_string())
            .map_err(|e| CliError::from_core(e, path))?]
    } else {
        let (Some(train_path), Some(test_path)) = (&a.train, &a.test) else {
            return Err(CliError::usage("give --records, or --train with --test"));
        };
        let train = load_observations(train_path, &mut manifest)?;
        let test = load_observations(test_path, &mut manifest)?;
        // The grid replaces the window size, so the base need not hold a
        // default that only fits longer pattern periods.
        let mut shared = a.shared.clone();
        if shared.up_tps.is_none() {
            shared.up_tps = a.up_grid.first().copied();
        }
        let requested = r.metric(&shared)?;
        let metric = choose_metric(requested, &train)?;
        let base = r.forecast_config(&shared, metric)?;
        let train = select(train, metric, "train stream")?;
        let test = select(test, metric, "test stream")?;
        check_layout(&train, &base)?;
        check_layout(&test, &base)?;
        let grid = sweep_grid(&base, a)?;
        let threads: usize = r.get("threads", a.threads, 1)?;
        manifest.note("grid_points", grid.len());
        let join = |v: Vec<String>| v.join(",");
        manifest.note("up_grid", join(a.up_grid.iter().map(ToString::to_string).collect()));
        manifest.note("k_grid", join(a.k_grid.iter().map(ToString::to_string).collect()));
        manifest.note("h_grid", join(a.h_grid.iter().map(ToString::to_string).collect()));
        sweep(&grid, &train, &test, &baselines, threads)?
    };

    emit(&mut manifest, &out_dir, "report.csv", |w| write_reports(w, &reports))?;
    emit(&mut manifest, &out_dir, "plot.csv", |w| write_plot_table(w, &reports))?;
    emit(&mut manifest, &out_dir, "errors.csv", |w| write_errors(w, &reports))?;

    for rep in &reports {
        let mut line = format!("{} mape={:.6}", rep.config_id, rep.mape);
        for c in &rep.comparators {
            line.push_str(&format!(" {}={:.6} ({:+.2}%)", c.baseline, c.mape, c.improvement_pct));
        }
        if rep.insufficient_train {
            line.push_str(" [train shorter than the store depth]");
        }
        println!("{line}");
    }
    manifest.config = r.into_echo();
    manifest.write(&out_dir)?;
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("synth");
    let mut r = Resolver::new(&a.shared)?;
    let out_dir = r.out_dir(&a.shared)?;
    let d = SyntheticSpec::default();

    let tp_min: u64 = r.get("tp-min", a.shared.tp_min, d.tp_seconds / 60)?;
    if tp_min == 0 || 1440 % tp_min != 0 {
        return Err(CliError::usage(format!("--tp-min {tp_min} must divide a day")));
    }
    let pp_tps: usize = r.get("pp-tps", a.shared.pp_tps, d.pp_tps)?;
    let spec = SyntheticSpec {
        pp_tps,
        tps: r.get("tps", a.tps, 3 * pp_tps)?,
        tp_seconds: tp_min * 60,
        sub_bin_seconds: r.get("sub-bin-sec", a.shared.sub_bin_sec, d.sub_bin_seconds)?,
        tps_per_day: r.get("tps-per-day", a.tps_per_day, (1440 / tp_min) as usize)?,
        base_lambda: r.get("base-lambda", a.base_lambda, d.base_lambda)?,
        daily_amp: r.get("daily-amp", a.daily_amp, d.daily_amp)?,
        weekly_amp: r.get("weekly-amp", a.weekly_amp, d.weekly_amp)?,
        noise_sigma: r.get("noise-sigma", a.noise_sigma, d.noise_sigma)?,
        seed: r.get("seed", a.shared.seed, d.seed)?,
    };
    let trace = generate(&spec)?;

    emit(&mut manifest, &out_dir, "trace.csv", |w| write_trace(w, &trace.events))?;
    emit(&mut manifest, &out_dir, "truth.csv", |w| write_truth(w, &trace.truth))?;
    manifest.seed = Some(spec.seed);
    manifest.rng = Some(RNG_NAME.to_string());
    manifest.note("events", trace.events.len());
    manifest.config = r.into_echo();
    manifest.write(&out_dir)?;
    Ok(())
}
