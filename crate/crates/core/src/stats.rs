//! Monte Carlo summaries: means with confidence intervals, bootstrap, and
//! weighted least-squares fits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("invalid confidence level {0}")]
    InvalidLevel(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Normal,
    Bootstrap,
    Exact,
}

/// Sample mean with standard error and a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    /// Fraction of replicas that hit the horizon before stopping.
    pub censored_fraction: f64,
    /// Set when censoring exceeded the allowed fraction; the numbers are then
    /// lower bounds only and must not be used for a verdict.
    pub aborted: bool,
    pub method: CiMethod,
}

impl MomentEstimate {
    /// Normal-approximation interval at `level` from a two-pass mean and variance.
    pub fn from_samples(samples: &[f64], level: f64) -> Result<Self, StatsError> {
        let z = z_value(level)?;
        let (mean, var) = mean_var(samples)?;
        let n = samples.len();
        let se = (var / n as f64).sqrt();
        Ok(MomentEstimate {
            mean,
            se,
            ci_lo: mean - z * se,
            ci_hi: mean + z * se,
            n,
            censored_fraction: 0.0,
            aborted: false,
            method: CiMethod::Normal,
        })
    }

    /// A value known without sampling error.
    pub fn exact(value: f64) -> Self {
        MomentEstimate {
            mean: value,
            se: 0.0,
            ci_lo: value,
            ci_hi: value,
            n: 0,
            censored_fraction: 0.0,
            aborted: false,
            method: CiMethod::Exact,
        }
    }

    pub fn with_censoring(mut self, censored: usize, total: usize, max_fraction: f64) -> Self {
        self.censored_fraction = if total == 0 { 0.0 } else { censored as f64 / total as f64 };
        self.aborted = self.censored_fraction > max_fraction;
        self
    }

    /// Estimate of `a * X + b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let (lo, hi) = if a >= 0.0 {
            (a * self.ci_lo + b, a * self.ci_hi + b)
        } else {
            (a * self.ci_hi + b, a * self.ci_lo + b)
        };
        MomentEstimate {
            mean: a * self.mean + b,
            se: a.abs() * self.se,
            ci_lo: lo,
            ci_hi: hi,
            ..*self
        }
    }
}

/// Two-pass sample mean and unbiased variance.
pub fn mean_var(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { index });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

/// Two-sided standard normal quantile `z` with `P(|N| <= z) = level`.
pub fn z_value(level: f64) -> Result<f64, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

/// Welford accumulator; `merge` combines partial results exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self, level: f64) -> Result<MomentEstimate, StatsError> {
        if self.n < 2 {
            return Err(StatsError::TooFewSamples {
                needed: 2,
                got: self.n as usize,
            });
        }
        let z = z_value(level)?;
        let se = (self.variance() / self.n as f64).sqrt();
        Ok(MomentEstimate {
            mean: self.mean,
            se,
            ci_lo: self.mean - z * se,
            ci_hi: self.mean + z * se,
            n: self.n as usize,
            censored_fraction: 0.0,
            aborted: false,
            method: CiMethod::Normal,
        })
    }
}

/// Percentile bootstrap interval for the mean. The resampling stream is
/// fixed by `seed`, so repeated calls agree.
pub fn bootstrap_mean(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<MomentEstimate, StatsError> {
    let mut est = MomentEstimate::from_samples(samples, level)?;
    let resamples = resamples.max(100);
    let n = samples.len();
    let mut rng = stream_rng(seed, 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - level) / 2.0;
    let pick = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    est.ci_lo = pick(alpha);
    est.ci_hi = pick(1.0 - alpha);
    est.method = CiMethod::Bootstrap;
    Ok(est)
}

/// Weighted straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub r2: f64,
}

/// Weighted least squares with weights `1/sigma^2`. Standard errors come
/// from the weights alone (known-variance model).
pub fn wls_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit, StatsError> {
    let fit = wls_poly(x, y, sigma, &[0, 1])?;
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let ybar = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let ss_tot: f64 = w.iter().zip(y).map(|(w, y)| w * (y - ybar).powi(2)).sum();
    let ss_res: f64 = w
        .iter()
        .zip(x.iter().zip(y))
        .map(|(w, (x, y))| w * (y - fit.coef[0] - fit.coef[1] * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit {
        slope: fit.coef[1],
        slope_se: fit.se[1],
        intercept: fit.coef[0],
        intercept_se: fit.se[0],
        r2,
    })
}

/// Weighted fit of `y = sum_k coef[k] * x^powers[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub powers: Vec<u32>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
}

pub fn wls_poly(x: &[f64], y: &[f64], sigma: &[f64], powers: &[u32]) -> Result<PolyFit, StatsError> {
    let p = powers.len();
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(StatsError::DegenerateFit("length mismatch".into()));
    }
    if x.len() < p || p == 0 {
        return Err(StatsError::TooFewSamples { needed: p.max(1), got: x.len() });
    }
    if let Some(index) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(StatsError::DegenerateFit(format!("sigma[{index}] must be positive")));
    }
    // normal equations X^T W X b = X^T W y
    let mut a = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(sigma) {
        let w = 1.0 / (si * si);
        let row: Vec<f64> = powers.iter().map(|&k| xi.powi(k as i32)).collect();
        for i in 0..p {
            rhs[i] += w * row[i] * yi;
            for j in 0..p {
                a[i][j] += w * row[i] * row[j];
            }
        }
    }
    let inv = invert(a)?;
    let coef: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv[i][j] * rhs[j]).sum()).collect();
    let se: Vec<f64> = (0..p).map(|i| inv[i][i].max(0.0).sqrt()).collect();
    Ok(PolyFit {
        powers: powers.to_vec(),
        coef,
        se,
    })
}

/// Gauss-Jordan inversion with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, StatsError> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-14 * scale {
            return Err(StatsError::DegenerateFit("singular design matrix".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_value_matches_tables() {
        assert!((z_value(0.95).unwrap() - 1.959964).abs() < 1e-5);
        assert!((z_value(0.99).unwrap() - 2.575829).abs() < 1e-5);
        assert!(z_value(1.0).is_err());
    }

    #[test]
    fn two_pass_and_welford_agree() {
        let data: Vec<f64> = (0..1000).map(|i| 1e6 + (i as f64 * 0.37).sin()).collect();
        let (m, v) = mean_var(&data).unwrap();
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        for (i, x) in data.iter().enumerate() {
            if i < 400 { a.push(*x) } else { b.push(*x) }
        }
        a.merge(&b);
        assert!((a.mean() - m).abs() < 1e-9);
        assert!((a.variance() - v).abs() / v < 1e-8);
    }

    #[test]
    fn rejects_short_or_nonfinite_input() {
        assert!(MomentEstimate::from_samples(&[1.0], 0.95).is_err());
        assert_eq!(
            MomentEstimate::from_samples(&[1.0, f64::NAN], 0.95),
            Err(StatsError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn wls_recovers_exact_polynomial() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 2.0 * v.powi(4) - 3.0 * v * v + 0.5).collect();
        let fit = wls_poly(&x, &y, &[1.0; 5], &[0, 2, 4]).unwrap();
        assert!((fit.coef[0] - 0.5).abs() < 1e-8);
        assert!((fit.coef[1] + 3.0).abs() < 1e-8);
        assert!((fit.coef[2] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn wls_line_slope_and_r2() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = wls_line(&x, &y, &[0.1; 4]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.slope_se - 0.1 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets_mean() {
        let data: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        let a = bootstrap_mean(&data, 0.95, 500, 3).unwrap();
        let b = bootstrap_mean(&data, 0.95, 500, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_lo < a.mean && a.mean < a.ci_hi);
    }

    #[test]
    fn affine_flips_interval_for_negative_scale() {
        let e = MomentEstimate::from_samples(&[1.0, 2.0, 3.0], 0.95).unwrap().affine(-2.0, 1.0);
        assert!(e.ci_lo < e.mean && e.mean < e.ci_hi);
        assert!((e.mean + 3.0).abs() < 1e-12);
    }
}
