//! The driving random walk and the pseudotrajectory noise.
//!
//! Indexing: `S_0 = 0` and `S_k = γ_0 + … + γ_{k-1}`, so an exact fiber
//! orbit is `y_k = e^{S_k} y_0`. The noise `r_1..r_N` enters as
//!
//! ```text
//! x_0 = 0,  x_{k+1} = e^{γ_k} x_k + d r_{k+1}
//! z_0 = 0,  z_k = z_{k-1} + r_k e^{-S_k}
//! ```
//!
//! so that `x_k = d e^{S_k} z_k`.

mod instance;
mod scaled;
mod stream;

pub use instance::{format_real, parse_instance, write_instance, Instance, InstanceError};
pub use scaled::{Rebase, ScaledSequence, ScaledSum, OFFSET_QUANTUM, REBASE_LIMIT};
pub use stream::{derive_stream, hash_words, mix64, RandomStream};

use thiserror::Error;

use crate::model::{ModelParams, NormalizedParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("noise length {noise} does not match walk length {walk}")]
    LengthMismatch { noise: usize, walk: usize },
    #[error("noise value r_{index} = {value} outside [-1, 1]")]
    NoiseOutOfRange { index: usize, value: f64 },
    #[error("noise scale d = {0} must be finite and >= 0")]
    InvalidScale(f64),
}

/// A realized symbol sequence with its increments and prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    params: ModelParams,
    symbols: Vec<bool>,
    gamma: Vec<f64>,
    prefix: Vec<f64>,
}

impl WalkPath {
    /// Builds the walk for a given symbol sequence (`true` selects `a1`).
    pub fn from_symbols(params: ModelParams, symbols: Vec<bool>) -> Self {
        let gamma: Vec<f64> = symbols
            .iter()
            .map(|&s| params.log_multiplier(s))
            .collect();
        // S_k from the symbol counts, so its error does not grow with k
        let mut prefix = Vec::with_capacity(gamma.len() + 1);
        let (mut n0, mut n1) = (0u64, 0u64);
        prefix.push(0.0);
        for &s in &symbols {
            if s {
                n1 += 1;
            } else {
                n0 += 1;
            }
            prefix.push((n1 as f64).mul_add(params.a1(), n0 as f64 * params.a0()));
        }
        Self {
            params,
            symbols,
            gamma,
            prefix,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[bool] {
        &self.symbols
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `S_0..S_N`.
    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// Fiber multiplier applied on step `i → i+1`.
    #[inline]
    pub fn multiplier(&self, i: usize) -> f64 {
        self.params.multiplier(self.symbols[i])
    }

    /// The first `steps` steps of this walk.
    pub fn truncated(&self, steps: usize) -> Self {
        Self {
            params: self.params,
            symbols: self.symbols[..steps].to_vec(),
            gamma: self.gamma[..steps].to_vec(),
            prefix: self.prefix[..=steps].to_vec(),
        }
    }
}

/// Draws `n` i.i.d. fair symbols from `stream`.
pub fn sample_walk(params: &NormalizedParams, n: usize, stream: &mut RandomStream) -> WalkPath {
    let symbols = (0..n).map(|_| stream.next_bit()).collect();
    WalkPath::from_symbols(*params.params(), symbols)
}

/// The noise of a fiber pseudotrajectory and its weighted sums `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOrbit {
    noise: Vec<f64>,
    scale: f64,
    z: ScaledSequence,
}

impl PseudoOrbit {
    /// `noise[k-1]` is `r_k`; its length must equal the walk's.
    pub fn new(walk: &WalkPath, noise: Vec<f64>, scale: f64) -> Result<Self, WalkError> {
        if noise.len() != walk.len() {
            return Err(WalkError::LengthMismatch {
                noise: noise.len(),
                walk: walk.len(),
            });
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(WalkError::InvalidScale(scale));
        }
        if let Some((i, &r)) = noise
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.abs() <= 1.0))
        {
            return Err(WalkError::NoiseOutOfRange {
                index: i + 1,
                value: r,
            });
        }
        let z = compute_z(walk, &noise);
        Ok(Self { noise, scale, z })
    }

    /// `r_1..r_N`.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// Noise amplitude `d`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn z(&self) -> &ScaledSequence {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    /// Same noise with amplitude `scale`.
    pub fn with_scale(&self, scale: f64) -> Result<Self, WalkError> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(WalkError::InvalidScale(scale));
        }
        Ok(Self {
            noise: self.noise.clone(),
            scale,
            z: self.z.clone(),
        })
    }

    pub fn truncated(&self, steps: usize) -> Self {
        Self {
            noise: self.noise[..steps].to_vec(),
            scale: self.scale,
            z: self.z.truncated(steps + 1),
        }
    }

    /// Fiber positions `x_k = d e^{S_k} z_k` reconstructed from `z`.
    pub fn positions(&self, walk: &WalkPath) -> Vec<f64> {
        (0..=self.len())
            .map(|k| {
                let sign = self.z.signum(k);
                if sign == 0.0 || self.scale == 0.0 {
                    0.0
                } else {
                    sign * self.scale * (walk.prefix()[k] + self.z.ln_abs(k)).exp()
                }
            })
            .collect()
    }
}

/// Draws `r_1..r_N` i.i.d. Uniform[-1, 1] and forms the pseudo-orbit.
pub fn sample_noise(walk: &WalkPath, d: f64, stream: &mut RandomStream) -> Result<PseudoOrbit, WalkError> {
    let noise = (0..walk.len()).map(|_| stream.next_noise()).collect();
    PseudoOrbit::new(walk, noise, d)
}

/// `z_0 = 0`, `z_k = z_{k-1} + r_k e^{-S_k}` in scaled form.
///
/// # Panics
///
/// If `noise.len() != walk.len()`.
pub fn compute_z(walk: &WalkPath, noise: &[f64]) -> ScaledSequence {
    assert_eq!(noise.len(), walk.len(), "noise and walk lengths differ");
    let prefix = walk.prefix();
    let mut z = ScaledSequence::with_capacity(noise.len() + 1);
    let mut sum = ScaledSum::zero();
    z.push(&sum);
    for (k, &r) in noise.iter().enumerate() {
        sum.add_weighted(r, -prefix[k + 1]);
        z.push(&sum);
    }
    z
}
