//! Kernel-weighted local linear regression.
//!
//! At a query point `x_u` the fit minimizes
//! `sum_i K(|x_i - x_u| / h) * (y_i - a - b * x_i)^2` and returns `a + b * x_u`.
//! The 2x2 normal equations are solved in closed form after centering `x` on
//! its weighted mean.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Epanechnikov,
    Biweight,
    Gaussian,
}

impl KernelFamily {
    /// Kernel profile at scaled distance `u >= 0`.
    pub fn profile(self, u: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov if u <= 1.0 => 0.75 * (1.0 - u * u),
            KernelFamily::Biweight if u <= 1.0 => {
                let t = 1.0 - u * u;
                15.0 / 16.0 * t * t
            }
            KernelFamily::Epanechnikov | KernelFamily::Biweight => 0.0,
            KernelFamily::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
        }
    }

    pub fn has_compact_support(self) -> bool {
        !matches!(self, KernelFamily::Gaussian)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Biweight => "biweight",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelFamily::Epanechnikov),
            "biweight" | "quartic" => Ok(KernelFamily::Biweight),
            "gaussian" | "normal" => Ok(KernelFamily::Gaussian),
            other => Err(Error::config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Locality control: a fixed radius, or the distance to the k-th nearest point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    FixedRadius(f64),
    KNearest(usize),
}

impl Bandwidth {
    /// Numeric value used when sorting and tabulating sweep results.
    pub fn value(self) -> f64 {
        match self {
            Bandwidth::FixedRadius(h) => h,
            Bandwidth::KNearest(k) => k as f64,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::FixedRadius(h) => write!(f, "h{h}"),
            Bandwidth::KNearest(k) => write!(f, "k{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: Bandwidth) -> Result<Self> {
        let spec = Self { family, bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.bandwidth {
            Bandwidth::FixedRadius(h) if !(h.is_finite() && h > 0.0) => {
                Err(Error::config(format!("bandwidth radius must be positive, got {h}")))
            }
            Bandwidth::KNearest(k) if k < 2 => {
                Err(Error::config(format!("nearest-neighbour bandwidth needs k >= 2, got {k}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { family: KernelFamily::Epanechnikov, bandwidth: Bandwidth::KNearest(20) }
    }
}

/// Which rescue produced a prediction when the local system was singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fallback {
    #[default]
    None,
    WidenedH,
    WeightedMean,
    GlobalLine,
}

impl Fallback {
    pub fn as_str(self) -> &'static str {
        match self {
            Fallback::None => "none",
            Fallback::WidenedH => "widened_h",
            Fallback::WeightedMean => "weighted_mean",
            Fallback::GlobalLine => "global_line",
        }
    }
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "none" => Fallback::None,
            "widened_h" => Fallback::WidenedH,
            "weighted_mean" => Fallback::WeightedMean,
            "global_line" => Fallback::GlobalLine,
            other => return Err(Error::invalid(format!("unknown fallback `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrPrediction {
    pub value: f64,
    pub fallback: Fallback,
}

pub fn kernel_weight(family: KernelFamily, x_u: f64, x_i: f64, h: f64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid(format!("kernel bandwidth must be positive, got {h}")));
    }
    Ok(family.profile((x_i - x_u).abs() / h))
}

/// Bandwidth in effect at `x_u`.
///
/// For `KNearest(k)` this is the distance to the k-th nearest of `xs`. When
/// replicated coordinates make that distance zero it is promoted to the
/// smallest positive spacing between distinct `xs`, or to 1 when every
/// coordinate coincides.
pub fn effective_bandwidth(spec: &KernelSpec, x_u: f64, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid("no points to derive a bandwidth from"));
    }
    match spec.bandwidth {
        Bandwidth::FixedRadius(h) => {
            if h > 0.0 {
                Ok(h)
            } else {
                Err(Error::invalid(format!("bandwidth radius must be positive, got {h}")))
            }
        }
        Bandwidth::KNearest(k) => {
            if k == 0 || k > xs.len() {
                return Err(Error::invalid(format!(
                    "nearest-neighbour bandwidth k={k} exceeds {} available points",
                    xs.len()
                )));
            }
            let mut dist: Vec<f64> = xs.iter().map(|x| (x - x_u).abs()).collect();
            dist.select_nth_unstable_by(k - 1, f64::total_cmp);
            let d = dist[k - 1];
            if d > 0.0 {
                return Ok(d);
            }
            Ok(smallest_spacing(xs).unwrap_or(1.0))
        }
    }
}

fn smallest_spacing(xs: &[f64]) -> Option<f64> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
}

/// Weighted least-squares line through `points`, evaluated at `x_u`.
pub fn weighted_line(points: &[(f64, f64)], weights: &[f64], x_u: f64) -> Result<f64> {
    debug_assert_eq!(points.len(), weights.len());
    let sw: f64 = weights.iter().sum();
    if sw.is_nan() || sw <= 0.0 {
        return Err(Error::Singular("all kernel weights are zero"));
    }
    let mut support = points.iter().zip(weights).filter(|(_, &w)| w > 0.0).map(|(p, _)| p.0);
    let first = support.next().unwrap_or_default();
    if support.all(|x| x == first) {
        return Err(Error::Singular("kernel weight concentrated at a single x"));
    }

    let x_bar = points.iter().zip(weights).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let y_bar = points.iter().zip(weights).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((x, y), w) in points.iter().zip(weights) {
        let dx = x - x_bar;
        sxx += w * dx * dx;
        sxy += w * dx * (y - y_bar);
    }
    // Relative to the weighted second moment; guards near-duplicate x.
    let scale = points.iter().zip(weights).map(|(p, w)| w * p.0 * p.0).sum::<f64>();
    let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
    if sxx.is_nan() || sxx <= floor {
        return Err(Error::Singular("weighted x spread vanishes"));
    }
    Ok(y_bar + sxy / sxx * (x_u - x_bar))
}

fn weights_at(points: &[(f64, f64)], family: KernelFamily, x_u: f64, h: f64) -> Vec<f64> {
    points.iter().map(|p| family.profile((p.0 - x_u).abs() / h)).collect()
}

fn check_points(points: &[(f64, f64)], x_u: f64) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid("local regression needs at least one point"));
    }
    if !x_u.is_finite() || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::invalid("local regression inputs must be finite"));
    }
    Ok(())
}

/// Local linear fit at `x_u` with no fallback; singular systems are errors.
pub fn llr_fit_predict(points: &[(f64, f64)], x_u: f64, spec: &KernelSpec) -> Result<f64> {
    check_points(points, x_u)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let h = effective_bandwidth(spec, x_u, &xs)?;
    weighted_line(points, &weights_at(points, spec.family, x_u, h), x_u)
}

const MAX_WIDENINGS: usize = 3;

/// Local linear fit that always yields a value.
///
/// A singular system is retried with the bandwidth doubled up to three
/// times, then answered by the local weighted mean, then by an unweighted
/// line over every point.
pub fn llr_predict(points: &[(f64, f64)], x_u: f64, spec: &KernelSpec) -> Result<LlrPrediction> {
    check_points(points, x_u)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut h = effective_bandwidth(spec, x_u, &xs)?;

    let mut local_mean = None;
    for attempt in 0..=MAX_WIDENINGS {
        let weights = weights_at(points, spec.family, x_u, h);
        match weighted_line(points, &weights, x_u) {
            Ok(value) => {
                let fallback = if attempt == 0 { Fallback::None } else { Fallback::WidenedH };
                return Ok(LlrPrediction { value, fallback });
            }
            Err(_) => {
                let sw: f64 = weights.iter().sum();
                if local_mean.is_none() && sw > 0.0 {
                    let sy = points.iter().zip(&weights).map(|(p, w)| w * p.1).sum::<f64>();
                    local_mean = Some(sy / sw);
                }
            }
        }
        h *= 2.0;
    }
    if let Some(value) = local_mean {
        return Ok(LlrPrediction { value, fallback: Fallback::WeightedMean });
    }

    let uniform = vec![1.0; points.len()];
    let value = weighted_line(points, &uniform, x_u).unwrap_or_else(|_| {
        points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64
    });
    Ok(LlrPrediction { value, fallback: Fallback::GlobalLine })
}

/// Fitted values at each of `query_xs`, with per-point fallback.
pub fn llr_curve(points: &[(f64, f64)], query_xs: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    query_xs
        .iter()
        .map(|&x| llr_predict(points, x, spec).map(|p| p.value))
        .collect()
}
