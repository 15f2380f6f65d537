//! Signed sums of exponentially weighted terms without overflow.
//!
//! A value is stored as `mantissa * e^offset`. Offsets are integer multiples
//! of [`OFFSET_QUANTUM`], so offset arithmetic is exact and a rebase costs a
//! single rounding of the mantissa.

/// Offsets are multiples of this many natural-log units.
pub const OFFSET_QUANTUM: f64 = 256.0;

/// Mantissas are rebased once `|ln |mantissa||` exceeds this.
pub const REBASE_LIMIT: f64 = 350.0;

// e^{±REBASE_LIMIT}
const REBASE_HIGH: f64 = 1.007_090_887_028_079_7e152;
const REBASE_LOW: f64 = 9.929_590_396_264_98e-153;

fn quantize(log_magnitude: f64) -> f64 {
    (log_magnitude / OFFSET_QUANTUM).round() * OFFSET_QUANTUM
}

/// Running sum `Σ r_i e^{w_i}` kept in scaled form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScaledSum {
    mantissa: f64,
    offset: f64,
}

impl ScaledSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Adds `coeff * e^{log_weight}`.
    pub fn add_weighted(&mut self, coeff: f64, log_weight: f64) {
        if coeff == 0.0 {
            return;
        }
        if self.mantissa == 0.0 {
            self.offset = quantize(log_weight);
            self.mantissa = coeff * (log_weight - self.offset).exp();
        } else {
            let mut rel = log_weight - self.offset;
            if rel > REBASE_LIMIT {
                let target = quantize(log_weight);
                self.mantissa *= (self.offset - target).exp();
                self.offset = target;
                rel = log_weight - target;
            }
            self.mantissa += coeff * rel.exp();
        }
        self.renormalize();
    }

    fn renormalize(&mut self) {
        let m = self.mantissa.abs();
        if m != 0.0 && !(REBASE_LOW..=REBASE_HIGH).contains(&m) {
            let shift = quantize(m.ln());
            self.mantissa *= (-shift).exp();
            self.offset += shift;
        }
    }

    /// `ln |value|`; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.offset
        }
    }

    pub fn signum(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    /// Plain value; may overflow to ±inf or underflow to 0.
    pub fn value(&self) -> f64 {
        self.mantissa * self.offset.exp()
    }
}

/// Start of a run of entries sharing one offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rebase {
    pub start: usize,
    pub offset: f64,
}

/// A sequence of reals stored as mantissas with piecewise-constant offsets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaledSequence {
    mantissas: Vec<f64>,
    rebases: Vec<Rebase>,
}

impl ScaledSequence {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            mantissas: Vec::with_capacity(n),
            rebases: Vec::new(),
        }
    }

    /// Appends the current state of a running sum.
    pub fn push(&mut self, sum: &ScaledSum) {
        let index = self.mantissas.len();
        if self.rebases.last().map(|r| r.offset) != Some(sum.offset()) {
            self.rebases.push(Rebase {
                start: index,
                offset: sum.offset(),
            });
        }
        self.mantissas.push(sum.mantissa());
    }

    pub fn len(&self) -> usize {
        self.mantissas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissas.is_empty()
    }

    pub fn mantissas(&self) -> &[f64] {
        &self.mantissas
    }

    pub fn rebases(&self) -> &[Rebase] {
        &self.rebases
    }

    pub fn offset(&self, k: usize) -> f64 {
        let block = self.rebases.partition_point(|r| r.start <= k);
        self.rebases[block - 1].offset
    }

    pub fn mantissa(&self, k: usize) -> f64 {
        self.mantissas[k]
    }

    /// Reconstructed value; may overflow to ±inf.
    pub fn get(&self, k: usize) -> f64 {
        self.mantissas[k] * self.offset(k).exp()
    }

    pub fn ln_abs(&self, k: usize) -> f64 {
        let m = self.mantissas[k];
        if m == 0.0 {
            f64::NEG_INFINITY
        } else {
            m.abs().ln() + self.offset(k)
        }
    }

    pub fn signum(&self, k: usize) -> f64 {
        let m = self.mantissas[k];
        if m == 0.0 {
            0.0
        } else {
            m.signum()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.get(k)).collect()
    }

    pub fn truncated(&self, len: usize) -> Self {
        let mantissas = self.mantissas[..len].to_vec();
        let rebases = self
            .rebases
            .iter()
            .copied()
            .filter(|r| r.start < len)
            .collect();
        Self { mantissas, rebases }
    }
}
