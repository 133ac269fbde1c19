//! Convergence diagnostics over multiple chains.
//!
//! Inputs are `chains[c][t][d]`: chain `c`, draw `t`, coordinate `d`. Both
//! estimators split every chain into two halves first, dropping the middle
//! draw of odd-length chains.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chains::ChainResult;
use crate::error::{Error, Result};

pub const MIN_DRAWS: usize = 4;

fn check_shape(chains: &[Vec<Vec<f64>>]) -> Result<usize> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InsufficientDraws("no chains".into()))?;
    let n = first.len();
    if n < MIN_DRAWS {
        return Err(Error::InsufficientDraws(format!(
            "need at least {MIN_DRAWS} draws per chain, got {n}"
        )));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidConfig("chains have different lengths".into()));
    }
    let dim = first[0].len();
    if chains.iter().flatten().any(|row| row.len() != dim) {
        return Err(Error::InvalidConfig("draws have different dimensions".into()));
    }
    Ok(dim)
}

/// Half-chains of coordinate `d`.
fn split_halves(chains: &[Vec<Vec<f64>>], d: usize) -> Vec<Vec<f64>> {
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        let column: Vec<f64> = c.iter().map(|row| row[d]).collect();
        halves.push(column[..half].to_vec());
        halves.push(column[column.len() - half..].to_vec());
    }
    halves
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

struct Moments {
    within: f64,
    var_plus: f64,
}

fn moments(halves: &[Vec<f64>]) -> Moments {
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = mean(&halves.iter().map(|h| sample_variance(h)).collect::<Vec<_>>());
    let between_over_n = if halves.len() > 1 { sample_variance(&means) } else { 0.0 };
    Moments {
        within,
        var_plus: within * (n - 1.0) / n + between_over_n,
    }
}

/// Autocovariance at `lag` with the biased `1/n` normalization.
fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Effective sample size per coordinate.
///
/// A coordinate with zero variance across all draws yields `NaN` and a
/// logged warning. Results are capped at the total draw count.
pub fn ess(chains: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let dim = check_shape(chains)?;
    Ok((0..dim).map(|d| ess_1d(&split_halves(chains, d), d)).collect())
}

fn ess_1d(halves: &[Vec<f64>], d: usize) -> f64 {
    let m = halves.len();
    let n = halves[0].len();
    let total = (m * n) as f64;
    let Moments { within, var_plus } = moments(halves);
    if !(var_plus > 0.0 && within > 0.0) || !var_plus.is_finite() {
        log::warn!("coordinate {d} has zero variance; effective sample size undefined");
        return f64::NAN;
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let rho = |lag: usize| -> f64 {
        let mean_acov = halves
            .iter()
            .zip(&means)
            .map(|(h, &mu)| autocovariance(h, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (within - mean_acov) / var_plus
    };

    // Initial positive sequence on pairs (rho_{2k}, rho_{2k+1}), made
    // monotone non-increasing.
    let mut sum_pairs = 0.0;
    let mut previous = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = if k == 0 { 1.0 + rho(1) } else { rho(2 * k) + rho(2 * k + 1) };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        sum_pairs += pair;
        previous = pair;
        k += 1;
    }
    let tau = -1.0 + 2.0 * sum_pairs;
    if tau <= 0.0 {
        return total;
    }
    (total / tau).min(total)
}

/// Split potential scale reduction per coordinate.
pub fn split_rhat(chains: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let dim = check_shape(chains)?;
    Ok((0..dim)
        .map(|d| {
            let Moments { within, var_plus } = moments(&split_halves(chains, d));
            if within > 0.0 {
                (var_plus / within).sqrt()
            } else {
                log::warn!("coordinate {d} has zero within-chain variance; R-hat undefined");
                f64::NAN
            }
        })
        .collect())
}

/// One-sample Kolmogorov-Smirnov test against `N(mu, sigma^2)`.
/// Returns `(statistic, p_value)` using the asymptotic distribution.
pub fn ks_normal(draws: &[f64], mu: f64, sigma: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::InsufficientDraws("KS test needs draws".into()));
    }
    let normal = Normal::new(mu, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let stat = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let root = n.sqrt();
    Ok((stat, kolmogorov_survival((root + 0.12 + 0.11 / root) * stat)))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSummary {
    pub mean: f64,
    pub std: f64,
    pub ess: f64,
    pub split_rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dims: Vec<DimSummary>,
    /// Leapfrog steps across warmup and sampling, all chains.
    pub total_leapfrogs: u64,
    pub sampling_leapfrogs: u64,
    pub divergences: usize,
    pub mean_accept: f64,
    pub min_ess: f64,
    /// Sampling-phase wall time divided by sampling leapfrog steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns_per_leapfrog: Option<f64>,
    /// Sampling-phase wall time divided by the smallest ESS.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns_per_effective_sample: Option<f64>,
}

impl RunSummary {
    pub fn strip_timing(&mut self) {
        self.ns_per_leapfrog = None;
        self.ns_per_effective_sample = None;
    }
}

pub fn summarize(results: &[ChainResult]) -> Result<RunSummary> {
    let chains: Vec<Vec<Vec<f64>>> = results.iter().map(|r| r.samples.clone()).collect();
    let ess_v = ess(&chains)?;
    let rhat = split_rhat(&chains)?;
    let dim = ess_v.len();
    let total = chains.iter().map(Vec::len).sum::<usize>() as f64;
    let dims = (0..dim)
        .map(|d| {
            let col: Vec<f64> = chains.iter().flatten().map(|r| r[d]).collect();
            let m = mean(&col);
            DimSummary {
                mean: m,
                std: sample_variance(&col).sqrt(),
                ess: ess_v[d],
                split_rhat: rhat[d],
            }
        })
        .collect();
    let sampling_leapfrogs: u64 = results.iter().map(|r| r.sampling_leapfrogs).sum();
    let sampling_nanos: u64 = results.iter().map(|r| r.sampling_nanos).sum();
    let min_ess = ess_v.iter().copied().fold(f64::INFINITY, f64::min);
    let accept_sum: f64 = results
        .iter()
        .flat_map(|r| r.stats.iter().map(|s| s.accept_stat))
        .sum();
    Ok(RunSummary {
        dims,
        total_leapfrogs: results.iter().map(|r| r.total_leapfrogs).sum(),
        sampling_leapfrogs,
        divergences: results.iter().map(ChainResult::divergences).sum(),
        mean_accept: accept_sum / total,
        min_ess,
        ns_per_leapfrog: Some(sampling_nanos as f64 / sampling_leapfrogs.max(1) as f64),
        ns_per_effective_sample: Some(sampling_nanos as f64 / min_ess),
    })
}
