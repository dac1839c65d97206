//! Poisson rate fitting and distribution queries.
//!
//! The maximum-likelihood rate of i.i.d. Poisson counts is the sample mean.
//! PMF terms are evaluated in log space so that rates in the tens of
//! thousands (scaled CPU sums) and counts up to ~10^6 stay finite.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::trace::PeriodObservation;

/// Rate parameter of a Poisson distribution, in counts per sub-bin.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PoissonParam(f64);

impl PoissonParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "poisson rate must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self(lambda))
    }

    pub fn lambda(self) -> f64 {
        self.0
    }
}

/// Maximum-likelihood rate of one period observation.
pub fn poisson_mle(obs: &PeriodObservation) -> Result<PoissonParam> {
    fit_counts(&obs.samples)
}

/// Maximum-likelihood rate of raw counts: the arithmetic mean.
///
/// The sum is accumulated in integer arithmetic so the only rounding is the
/// final division.
pub fn fit_counts(samples: &[u64]) -> Result<PoissonParam> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let total: u128 = samples.iter().map(|&x| x as u128).sum();
    PoissonParam::new(total as f64 / samples.len() as f64)
}

/// Log-likelihood of `samples` under rate `lambda`, including the
/// `-sum(log X_i!)` constant.
pub fn log_likelihood(lambda: f64, samples: &[u64]) -> f64 {
    let n = samples.len() as f64;
    let total: f64 = samples.iter().map(|&x| x as f64).sum();
    let log_fact: f64 = samples.iter().map(|&x| ln_factorial(x)).sum();
    if lambda == 0.0 {
        return if total == 0.0 { -log_fact } else { f64::NEG_INFINITY };
    }
    total * lambda.ln() - n * lambda - log_fact
}

fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

pub fn poisson_ln_pmf(param: PoissonParam, k: u64) -> f64 {
    let lambda = param.lambda();
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

pub fn poisson_pmf(param: PoissonParam, k: u64) -> f64 {
    poisson_ln_pmf(param, k).exp().clamp(0.0, 1.0)
}

/// `P(X <= k)` by direct summation of PMF terms.
pub fn poisson_cdf(param: PoissonParam, k: u64) -> f64 {
    let total: f64 = (0..=k).map(|i| poisson_pmf(param, i)).sum();
    total.min(1.0)
}

/// Smallest `k` with `P(X <= k) >= p`.
///
/// A rate of zero is a point mass at zero. Once past the mode, a term that
/// underflows to zero ends the scan: the remaining tail cannot move the sum.
pub fn poisson_quantile(param: PoissonParam, p: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {p}")));
    }
    let lambda = param.lambda();
    if lambda == 0.0 {
        return Ok(0);
    }
    let mut cumulative = 0.0;
    let mut k = 0u64;
    loop {
        let term = poisson_pmf(param, k);
        cumulative += term;
        if cumulative >= p || (term == 0.0 && k as f64 > lambda) {
            return Ok(k);
        }
        k += 1;
    }
}
