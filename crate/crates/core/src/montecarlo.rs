//! Monte Carlo estimates of `s(N, L) = P(K < L)` and phase sweeps over
//! `L = N^c`.
//!
//! Sample `i` of a run with seed `s` draws its walk and noise from
//! `derive_stream(s, i)`, and counts are summed as integers, so results do
//! not depend on the number of worker threads.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::NormalizedParams;
use crate::shadow::{k_fast, k_naive, DEFAULT_STAT_TOL};
use crate::walk::{derive_stream, hash_words, sample_noise, sample_walk};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Samples with `|K - l| <= GUARD_REL * l` are recomputed by enumeration.
pub const GUARD_REL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("trajectory length must be >= 1")]
    EmptyTrajectory,
    #[error("sample count must be >= 1")]
    NoSamples,
    #[error("threshold l = {0} must be >= 0 and not NaN")]
    InvalidThreshold(f64),
    #[error("noise scale d = {0} must be finite and >= 0")]
    InvalidScale(f64),
    #[error("precision eps = {0} must be finite and > 0")]
    InvalidPrecision(f64),
    #[error("exponent c = {0} must be finite and > 0")]
    InvalidExponent(f64),
    #[error("empty grid")]
    EmptyGrid,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// A binomial proportion with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub successes: u64,
    pub samples: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub master_seed: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, samples: u64, master_seed: u64) -> Self {
        assert!(samples > 0 && successes <= samples, "invalid counts");
        let p_hat = successes as f64 / samples as f64;
        let (lo, hi) = wilson(successes, samples, Z_95);
        Self {
            successes,
            samples,
            p_hat,
            ci_low: lo.min(p_hat),
            ci_high: hi.max(p_hat),
            master_seed,
        }
    }

    /// Whether the two intervals are disjoint.
    pub fn separated_from(&self, other: &Estimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

/// Wilson score interval for `successes / samples` at quantile `z`.
pub fn wilson(successes: u64, samples: u64, z: f64) -> (f64, f64) {
    let n = samples as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Counters accumulated over the samples of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub samples: u64,
    pub successes: u64,
    /// Samples with `K > D`.
    pub bound_violations: u64,
    /// Samples recomputed by enumeration because `K` was close to `l`.
    pub guard_recomputes: u64,
}

impl Tally {
    fn merge(self, other: Self) -> Self {
        Self {
            samples: self.samples + other.samples,
            successes: self.successes + other.successes,
            bound_violations: self.bound_violations + other.bound_violations,
            guard_recomputes: self.guard_recomputes + other.guard_recomputes,
        }
    }
}

fn sample_tally(params: &NormalizedParams, n: usize, l: f64, seed: u64, index: u64) -> Tally {
    let mut stream = derive_stream(seed, index);
    let walk = sample_walk(params, n, &mut stream);
    let pseudo = sample_noise(&walk, 1.0, &mut stream).expect("unit scale is valid");
    let mut report = k_fast(&walk, &pseudo, DEFAULT_STAT_TOL).expect("default tolerance is valid");
    let mut guard = 0;
    if (report.k_statistic - l).abs() <= GUARD_REL * l {
        report = k_naive(&walk, &pseudo);
        guard = 1;
    }
    Tally {
        samples: 1,
        successes: u64::from(report.k_statistic < l),
        bound_violations: u64::from(report.k_statistic > report.d_bound),
        guard_recomputes: guard,
    }
}

/// `estimate_s` together with its counters.
pub fn estimate_s_tally(
    params: &NormalizedParams,
    n: usize,
    l: f64,
    samples: u64,
    seed: u64,
) -> Result<(Estimate, Tally), MonteCarloError> {
    if n == 0 {
        return Err(MonteCarloError::EmptyTrajectory);
    }
    if samples == 0 {
        return Err(MonteCarloError::NoSamples);
    }
    if !(l >= 0.0) {
        return Err(MonteCarloError::InvalidThreshold(l));
    }
    let tally = (0..samples)
        .into_par_iter()
        .map(|i| sample_tally(params, n, l, seed, i))
        .reduce(Tally::default, Tally::merge);
    Ok((Estimate::from_counts(tally.successes, tally.samples, seed), tally))
}

/// Estimates `P(K < l)` over `samples` random instances of length `n`.
pub fn estimate_s(
    params: &NormalizedParams,
    n: usize,
    l: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate, MonteCarloError> {
    estimate_s_tally(params, n, l, samples, seed).map(|(e, _)| e)
}

/// Estimates `p(d, n, eps)`, the probability that a pseudo-orbit of noise
/// amplitude `d` is `eps`-shadowed; equals `s(n, eps / d)`.
pub fn estimate_p(
    params: &NormalizedParams,
    d: f64,
    n: usize,
    eps: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate, MonteCarloError> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(MonteCarloError::InvalidScale(d));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(MonteCarloError::InvalidPrecision(eps));
    }
    if samples == 0 {
        return Err(MonteCarloError::NoSamples);
    }
    if d == 0.0 {
        return Ok(Estimate::from_counts(samples, samples, seed));
    }
    estimate_s(params, n, eps / d, samples, seed)
}

/// One `(n, c)` cell of a phase sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub c: f64,
    /// `n^c`.
    pub l: f64,
    /// `eps / n^c`.
    pub d: f64,
    pub estimate: Estimate,
    pub tally: Tally,
}

/// Seed of the cell at `index`, independent of the other cells in the grid.
pub fn cell_seed(master_seed: u64, n: usize, c: f64, index: usize) -> u64 {
    hash_words(&[master_seed, n as u64, c.to_bits(), index as u64])
}

/// Estimates `p(eps / n^c, n, eps)` on the grid `n_list × c_list`, n-major.
pub fn phase_sweep(
    params: &NormalizedParams,
    eps: f64,
    c_list: &[f64],
    n_list: &[usize],
    samples: u64,
    seed: u64,
) -> Result<Vec<SweepCell>, MonteCarloError> {
    if c_list.is_empty() || n_list.is_empty() {
        return Err(MonteCarloError::EmptyGrid);
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(MonteCarloError::InvalidPrecision(eps));
    }
    if let Some(&c) = c_list.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(MonteCarloError::InvalidExponent(c));
    }
    let mut cells = Vec::with_capacity(c_list.len() * n_list.len());
    for &n in n_list {
        for &c in c_list {
            let index = cells.len();
            let l = (c * (n as f64).ln()).exp();
            let s = cell_seed(seed, n, c, index);
            let (estimate, tally) = estimate_s_tally(params, n, l, samples, s)?;
            cells.push(SweepCell {
                n,
                c,
                l,
                d: eps / l,
                estimate,
                tally,
            });
        }
    }
    Ok(cells)
}

/// Runs `f` on a pool of `threads` workers (`0` = all available cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, MonteCarloError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MonteCarloError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
