//! Flag, config-file and default resolution.
//!
//! A value set on the command line wins over the `--config` file, which wins
//! over the built-in default. Every resolved value is echoed into the run
//! manifest under its flag name, so the echo can be replayed as a config file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use reqcast_core::{Bandwidth, ForecastConfig, KernelFamily, KernelSpec, MetricKind};

use crate::args::Shared;
use crate::error::{CliError, CliResult};

const KNOWN_KEYS: &[&str] = &[
    "tp-min",
    "pp-tps",
    "up-tps",
    "cycles",
    "kernel",
    "bandwidth-k",
    "bandwidth-h",
    "metric",
    "sub-bin-sec",
    "scale",
    "seed",
    "out-dir",
    // command specific
    "layout",
    "col-ts",
    "col-cpu",
    "col-mem",
    "delimiter",
    "no-header",
    "start-us",
    "tps",
    "split-at",
    "test-from-t",
    "threads",
    "baseline-window",
    "tps-per-day",
    "base-lambda",
    "daily-amp",
    "weekly-amp",
    "noise-sigma",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text).map_err(|m| CliError::usage(format!("{}: {m}", p.display())))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", i + 1));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

pub struct Resolver {
    file: ConfigFile,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(shared: &Shared) -> CliResult<Self> {
        Ok(Self { file: ConfigFile::load(shared.config.as_deref())?, echo: BTreeMap::new() })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    /// Resolve an optional setting without a default.
    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let value = self.opt(key, flag)?.unwrap_or(default);
        self.echo.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn flag(&mut self, key: &str, set: bool) -> CliResult<bool> {
        let value = set || self.file_value::<bool>(key)?.unwrap_or(false);
        self.echo.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn out_dir(&mut self, shared: &Shared) -> CliResult<PathBuf> {
        let dir = match &shared.out_dir {
            Some(d) => d.clone(),
            None => self.file.get("out-dir").map_or_else(|| PathBuf::from("."), PathBuf::from),
        };
        self.echo.insert("out-dir".into(), dir.display().to_string());
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    pub fn metric(&mut self, shared: &Shared) -> CliResult<Option<MetricKind>> {
        self.opt::<String>("metric", shared.metric.clone())?
            .map(|m| m.parse::<MetricKind>().map_err(|e| CliError::usage(e.to_string())))
            .transpose()
    }

    fn bandwidth(&mut self, shared: &Shared) -> CliResult<Bandwidth> {
        let from_flags = match (shared.bandwidth_k, shared.bandwidth_h) {
            (Some(_), Some(_)) => return Err(CliError::usage("give either --bandwidth-k or --bandwidth-h")),
            (Some(k), None) => Some(Bandwidth::KNearest(k)),
            (None, Some(h)) => Some(Bandwidth::FixedRadius(h)),
            (None, None) => None,
        };
        let bw = match from_flags {
            Some(b) => b,
            None => match (self.file_value::<usize>("bandwidth-k")?, self.file_value::<f64>("bandwidth-h")?) {
                (Some(_), Some(_)) => {
                    return Err(CliError::usage("config sets both bandwidth-k and bandwidth-h"))
                }
                (Some(k), None) => Bandwidth::KNearest(k),
                (None, Some(h)) => Bandwidth::FixedRadius(h),
                (None, None) => KernelSpec::default().bandwidth,
            },
        };
        match bw {
            Bandwidth::KNearest(k) => self.echo.insert("bandwidth-k".into(), k.to_string()),
            Bandwidth::FixedRadius(h) => self.echo.insert("bandwidth-h".into(), h.to_string()),
        };
        Ok(bw)
    }

    /// Forecaster settings. `metric` is supplied by the caller, who may have
    /// inferred it from the data.
    pub fn forecast_config(&mut self, shared: &Shared, metric: MetricKind) -> CliResult<ForecastConfig> {
        let d = ForecastConfig::default();
        let kernel: String = self.get("kernel", shared.kernel.clone(), d.kernel.family.to_string())?;
        let family = kernel.parse::<KernelFamily>().map_err(|e| CliError::usage(e.to_string()))?;
        let cfg = ForecastConfig {
            tp_minutes: self.get("tp-min", shared.tp_min, d.tp_minutes)?,
            pp_tps: self.get("pp-tps", shared.pp_tps, d.pp_tps)?,
            up_tps: self.get("up-tps", shared.up_tps, d.up_tps)?,
            cycles: self.get("cycles", shared.cycles, d.cycles)?,
            kernel: KernelSpec { family, bandwidth: self.bandwidth(shared)? },
            metric,
            sub_bin_seconds: self.get("sub-bin-sec", shared.sub_bin_sec, d.sub_bin_seconds)?,
            scale: self.get("scale", shared.scale, d.scale)?,
        };
        self.echo.insert("metric".into(), metric.to_string());
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn into_echo(self) -> BTreeMap<String, String> {
        self.echo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let c = ConfigFile::parse("# comment\n\nup_tps = 12\nkernel=gaussian\n").unwrap();
        assert_eq!(c.get("up-tps"), Some("12"));
        assert_eq!(c.get("kernel"), Some("gaussian"));
        assert!(ConfigFile::parse("bogus=1").is_err());
        assert!(ConfigFile::parse("up-tps 12").is_err());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let mut r = Resolver {
            file: ConfigFile::parse("up-tps=12\ncycles=3").unwrap(),
            echo: BTreeMap::new(),
        };
        assert_eq!(r.get("up-tps", Some(6usize), 50).unwrap(), 6);
        assert_eq!(r.get("cycles", None, 2usize).unwrap(), 3);
        assert_eq!(r.get("pp-tps", None, 336usize).unwrap(), 336);
        let echo = r.into_echo();
        assert_eq!(echo["up-tps"], "6");
        assert_eq!(echo["cycles"], "3");
    }

    #[test]
    fn bandwidth_from_file_and_conflicts() {
        let shared = Shared::default();
        let mut r = Resolver { file: ConfigFile::parse("bandwidth-h=2.5").unwrap(), echo: BTreeMap::new() };
        assert_eq!(r.bandwidth(&shared).unwrap(), Bandwidth::FixedRadius(2.5));

        let flagged = Shared { bandwidth_k: Some(8), ..Shared::default() };
        assert_eq!(r.bandwidth(&flagged).unwrap(), Bandwidth::KNearest(8));

        let mut both =
            Resolver { file: ConfigFile::parse("bandwidth-h=2\nbandwidth-k=3").unwrap(), echo: BTreeMap::new() };
        assert!(matches!(both.bandwidth(&shared), Err(CliError::Usage(_))));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let mut r = Resolver { file: ConfigFile::parse("up-tps=many").unwrap(), echo: BTreeMap::new() };
        assert!(matches!(r.get("up-tps", None, 50usize), Err(CliError::Usage(_))));
        let shared = Shared { up_tps: Some(400), ..Shared::default() };
        let mut r = Resolver { file: ConfigFile::default(), echo: BTreeMap::new() };
        assert!(matches!(r.forecast_config(&shared, MetricKind::Arrivals), Err(CliError::Usage(_))));
    }
}
