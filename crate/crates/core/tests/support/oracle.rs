//! Reference computations kept separate from the library code paths.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kern {
    Epanechnikov,
    Biweight,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Width {
    Radius(f64),
    Nearest(usize),
}

pub fn kern_value(kern: Kern, dist: f64, h: f64) -> f64 {
    let u = dist / h;
    match kern {
        Kern::Epanechnikov => {
            if u <= 1.0 {
                3.0 / 4.0 * (1.0 - u * u)
            } else {
                0.0
            }
        }
        Kern::Biweight => {
            if u <= 1.0 {
                (15.0 / 16.0) * (1.0 - u * u) * (1.0 - u * u)
            } else {
                0.0
            }
        }
        Kern::Gaussian => (-(u * u) / 2.0).exp() * (1.0 / (2.0 * std::f64::consts::PI).sqrt()),
    }
}

/// k-th nearest distance by full sort; zero distances fall back to the
/// smallest gap between distinct coordinates, or 1.
pub fn oracle_bandwidth(width: Width, x_u: f64, xs: &[f64]) -> f64 {
    match width {
        Width::Radius(h) => h,
        Width::Nearest(k) => {
            let mut d: Vec<f64> = xs.iter().map(|x| (x - x_u).abs()).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if d[k - 1] > 0.0 {
                return d[k - 1];
            }
            let mut best = f64::INFINITY;
            for a in xs {
                for b in xs {
                    let gap = (a - b).abs();
                    if gap > 0.0 && gap < best {
                        best = gap;
                    }
                }
            }
            if best.is_finite() {
                best
            } else {
                1.0
            }
        }
    }
}

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Weighted least squares solved exactly over the rationals:
/// `[S0 S1; S1 S2] [a; b] = [T0; T1]`, evaluated at `x_u`.
/// Returns `None` when the normal matrix is singular.
pub fn exact_wls(points: &[(f64, f64)], weights: &[f64], x_u: f64) -> Option<f64> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
    );
    for (&(x, y), &w) in points.iter().zip(weights) {
        let (x, y, w) = (q(x), q(y), q(w));
        s0 += &w;
        s1 += &w * &x;
        s2 += &w * &x * &x;
        t0 += &w * &y;
        t1 += &w * &x * &y;
    }
    let det = &s0 * &s2 - &s1 * &s1;
    if det.is_zero() {
        return None;
    }
    let a = (&s2 * &t0 - &s1 * &t1) / &det;
    let b = (&s0 * &t1 - &s1 * &t0) / &det;
    (a + b * q(x_u)).to_f64()
}

pub fn exact_llr(points: &[(f64, f64)], x_u: f64, kern: Kern, width: Width) -> Option<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let h = oracle_bandwidth(width, x_u, &xs);
    let w: Vec<f64> = points.iter().map(|p| kern_value(kern, (p.0 - x_u).abs(), h)).collect();
    exact_wls(points, &w, x_u)
}

/// Smallest k with sum_{i<=k} P(i) >= p, with P(i) built by the recurrence
/// P(i) = P(i-1) * lambda / i from P(0) = exp(-lambda).
pub fn brute_quantile(lambda: f64, p: f64) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    let mut term = (-lambda).exp();
    let mut total = term;
    let mut k = 0u64;
    while total < p {
        k += 1;
        term *= lambda / k as f64;
        total += term;
    }
    k
}

/// Mean computed with exact big-integer summation.
pub fn exact_mean(samples: &[u64]) -> f64 {
    let sum: BigInt = samples.iter().map(|&s| BigInt::from(s)).sum();
    (BigRational::new(sum, BigInt::from(samples.len()))).to_f64().unwrap()
}

/// Eq.-style log-likelihood with log-factorials by direct summation.
pub fn log_likelihood(lambda: f64, samples: &[u64]) -> f64 {
    samples
        .iter()
        .map(|&x| {
            let log_fact: f64 = (2..=x).map(|i| (i as f64).ln()).sum();
            x as f64 * lambda.ln() - lambda - log_fact
        })
        .sum()
}

/// The part of the log-likelihood that depends on `lambda`. Enough to
/// compare candidate rates for one sample vector of any magnitude.
pub fn log_likelihood_kernel(lambda: f64, samples: &[u64]) -> f64 {
    let sum: f64 = samples.iter().map(|&x| x as f64).sum();
    let log_term = if sum == 0.0 { 0.0 } else { sum * lambda.ln() };
    log_term - samples.len() as f64 * lambda
}
