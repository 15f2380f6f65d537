//! Optimal shadowing radius of a finite fiber pseudotrajectory.
//!
//! An exact orbit `y_k = e^{S_k} y_0` shadows the pseudo-orbit
//! `x_k = d e^{S_k} z_k` with precision `max_k e^{S_k} |y_0 - d z_k|`. The
//! optimal precision over `y_0` equals `d · K` where
//!
//! ```text
//! K = max_{0 <= k < n <= N} B(k, n),
//! B(k, n) = e^{S_k + S_n} / (e^{S_k} + e^{S_n}) · |z_n - z_k|
//! ```
//!
//! Three computations are provided: [`k_naive`] enumerates all pairs,
//! [`k_fast`] bisects on the min-max value with an `O(N)` feasibility scan,
//! and [`oracle_radius`] minimizes the shadowing error over `y_0` directly in
//! exact arithmetic. The last one shares no code with the first two.

mod oracle;

pub use oracle::{oracle_radius, oracle_radius_from, OracleResult, DEFAULT_ORACLE_TOL};

use thiserror::Error;

use crate::walk::{PseudoOrbit, ScaledSum, WalkPath};

/// Default relative tolerance of [`k_fast`].
pub const DEFAULT_STAT_TOL: f64 = 1e-10;

/// Tolerance for comparing the oracle radius against `d · K`.
pub const DEFAULT_CROSS_CHECK_TOL: f64 = 1e-9;

const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShadowError {
    #[error("pair ({k}, {n}) out of range for N = {len} (need 0 <= k < n <= N)")]
    IndexOutOfRange { k: usize, n: usize, len: usize },
    #[error("tolerance must be positive and finite (got {0})")]
    InvalidTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowReport {
    /// `K`, the optimal radius in units of `d`.
    pub k_statistic: f64,
    /// A maximizing pair `(k, n)`; `None` when `N = 0`.
    pub witness: Option<(usize, usize)>,
    /// Noise amplitude `d`.
    pub scale: f64,
    /// `d · K`.
    pub radius: f64,
    /// An initial point whose orbit attains `radius`.
    pub optimal_y0: f64,
    /// Upper bound `D = max_k Σ_{i>=k} e^{S_k - S_i}`.
    pub d_bound: f64,
}

impl ShadowReport {
    fn build(walk: &WalkPath, pseudo: &PseudoOrbit, k_statistic: f64, witness: Option<(usize, usize)>) -> Self {
        let optimal_y0 = match witness {
            Some((k, n)) => pseudo.scale() * pair_gap(walk, pseudo, k, n).midpoint(pseudo, k),
            None => 0.0,
        };
        Self {
            k_statistic,
            witness,
            scale: pseudo.scale(),
            radius: pseudo.scale() * k_statistic,
            optimal_y0,
            d_bound: upper_bound_d(walk),
        }
    }
}

/// `B(k, n)` together with the signed gap `z_n - z_k` in log form.
#[derive(Debug, Clone, Copy)]
struct PairGap {
    b: f64,
    gap_sign: f64,
    gap_ln_abs: f64,
    // ln of w_n / (w_k + w_n)
    ln_weight_share: f64,
}

impl PairGap {
    /// `z_k + (z_n - z_k) w_n / (w_k + w_n)`, the point equalizing both errors.
    fn midpoint(&self, pseudo: &PseudoOrbit, k: usize) -> f64 {
        let step = if self.gap_sign == 0.0 {
            0.0
        } else {
            self.gap_sign * (self.gap_ln_abs + self.ln_weight_share).exp()
        };
        pseudo.z().get(k) + step
    }
}

fn ln1p_exp_neg(x: f64) -> f64 {
    // ln(1 + e^{-x}) for x >= 0
    (-x).exp().ln_1p()
}

fn pair_gap(walk: &WalkPath, pseudo: &PseudoOrbit, k: usize, n: usize) -> PairGap {
    let s = walk.prefix();
    let r = pseudo.noise();
    let base = s[k].min(s[n]);
    let mut sum = ScaledSum::zero();
    for i in k + 1..=n {
        sum.add_weighted(r[i - 1], base - s[i]);
    }
    let spread = (s[n] - s[k]).abs();
    let ln_abs = sum.ln_abs();
    let b = if sum.signum() == 0.0 {
        0.0
    } else {
        (ln_abs - ln1p_exp_neg(spread)).exp()
    };
    // w_n / (w_k + w_n) = 1 / (1 + e^{S_k - S_n})
    let d = s[k] - s[n];
    let ln_weight_share = if d > 0.0 {
        -d - ln1p_exp_neg(d)
    } else {
        -ln1p_exp_neg(-d)
    };
    PairGap {
        b,
        gap_sign: sum.signum(),
        gap_ln_abs: ln_abs - base,
        ln_weight_share,
    }
}

/// `B(k, n)` evaluated in scaled arithmetic.
pub fn pairwise_b(walk: &WalkPath, pseudo: &PseudoOrbit, k: usize, n: usize) -> Result<f64, ShadowError> {
    if !(k < n && n <= walk.len()) {
        return Err(ShadowError::IndexOutOfRange {
            k,
            n,
            len: walk.len(),
        });
    }
    Ok(pair_gap(walk, pseudo, k, n).b)
}

/// `K` by enumeration of all `N(N+1)/2` pairs.
///
/// Ties keep the lexicographically smallest pair.
pub fn k_naive(walk: &WalkPath, pseudo: &PseudoOrbit) -> ShadowReport {
    let n_steps = walk.len();
    if n_steps == 0 {
        return ShadowReport::build(walk, pseudo, 0.0, None);
    }
    let s = walk.prefix();
    let r = pseudo.noise();
    let mut best = 0.0;
    let mut witness = (0, 1);
    for k in 0..n_steps {
        // running Σ_{i=k+1}^{n} r_i e^{S_k - S_i}
        let mut sum = ScaledSum::zero();
        for n in k + 1..=n_steps {
            sum.add_weighted(r[n - 1], s[k] - s[n]);
            if sum.signum() == 0.0 {
                continue;
            }
            let rise = s[n] - s[k];
            let exponent = sum.offset() - (-rise).max(0.0);
            let b = if exponent < 700.0 {
                sum.mantissa().abs() * exponent.exp() / (1.0 + (-rise.abs()).exp())
            } else {
                (sum.mantissa().abs().ln() + exponent - ln1p_exp_neg(rise.abs())).exp()
            };
            if b > best {
                best = b;
                witness = (k, n);
            }
        }
    }
    ShadowReport::build(walk, pseudo, best, Some(witness))
}

/// Outcome of one feasibility scan at radius `t`.
enum Scan {
    Feasible,
    /// A pair with `B(k, n) > t`.
    Violated(usize, usize),
}

/// Is there `c` with `|c - z_k| <= t e^{-S_k}` for all `k`?
///
/// Works in the moving frame of index `n`: `upper` is
/// `max_{k<=n} e^{S_n}(z_k - z_n - t e^{-S_k})` and `lower` is
/// `min_{k<=n} e^{S_n}(z_k - z_n + t e^{-S_k})`. Both stay in `[-t, t]` while
/// the constraints are consistent, so nothing overflows.
fn scan(multipliers: &[f64], noise: &[f64], t: f64) -> Scan {
    let (mut upper, mut upper_arg) = (-t, 0);
    let (mut lower, mut lower_arg) = (t, 0);
    for (n, (&lambda, &r)) in multipliers.iter().zip(noise).enumerate() {
        let u = lambda * upper - r;
        if u >= -t {
            upper = u;
        } else {
            upper = -t;
            upper_arg = n + 1;
        }
        let l = lambda * lower - r;
        if l <= t {
            lower = l;
        } else {
            lower = t;
            lower_arg = n + 1;
        }
        if upper > t {
            return Scan::Violated(upper_arg, n + 1);
        }
        if lower < -t {
            return Scan::Violated(lower_arg, n + 1);
        }
    }
    Scan::Feasible
}

/// `K` to relative tolerance `tol` by bisection on the min-max value.
pub fn k_fast(walk: &WalkPath, pseudo: &PseudoOrbit, tol: f64) -> Result<ShadowReport, ShadowError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ShadowError::InvalidTolerance(tol));
    }
    let n_steps = walk.len();
    if n_steps == 0 {
        return Ok(ShadowReport::build(walk, pseudo, 0.0, None));
    }
    let multipliers: Vec<f64> = (0..n_steps).map(|i| walk.multiplier(i)).collect();
    let noise = pseudo.noise();

    // adjacent pairs: B(k, k+1) = |r_{k+1}| / (1 + λ_k)
    let (mut lo, adjacent) = multipliers
        .iter()
        .zip(noise)
        .enumerate()
        .map(|(k, (&lambda, &r))| (r.abs() / (1.0 + lambda), k))
        .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best });
    if lo == 0.0 {
        return Ok(ShadowReport::build(walk, pseudo, 0.0, Some((0, 1))));
    }
    if let Scan::Feasible = scan(&multipliers, noise, lo) {
        return Ok(ShadowReport::build(walk, pseudo, lo, Some((adjacent, adjacent + 1))));
    }

    let mut hi = upper_bound_d(walk).min(reverse_upper_bound(walk));
    if !hi.is_finite() {
        hi = f64::MAX;
    }
    // both bounds hold exactly; doubling only absorbs rounding in the scan
    while let Scan::Violated(..) = scan(&multipliers, noise, hi) {
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }

    let mut violated = (adjacent, adjacent + 1);
    // the reported pair value lies in (lo, K], so a gap of tol/4 keeps it within tol
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 0.25 * tol * hi {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        match scan(&multipliers, noise, mid) {
            Scan::Feasible => hi = mid,
            Scan::Violated(k, n) => {
                lo = mid;
                violated = (k, n);
            }
        }
    }
    if let Scan::Violated(k, n) = scan(&multipliers, noise, lo) {
        violated = (k, n);
    }
    let (k, n) = violated;
    let at_witness = pair_gap(walk, pseudo, k, n).b;
    let slack = 4.0 * f64::EPSILON * hi;
    let k_statistic = if at_witness >= lo - slack && at_witness <= hi + slack {
        at_witness
    } else {
        hi
    };
    Ok(ShadowReport::build(walk, pseudo, k_statistic, Some(violated)))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln D` via the backward recursion `U_N = 1`, `U_k = 1 + e^{-γ_k} U_{k+1}`.
pub fn log_upper_bound_d(walk: &WalkPath) -> f64 {
    let mut log_u = 0.0f64;
    let mut best = 0.0f64;
    for &g in walk.gamma().iter().rev() {
        log_u = log_add_exp(0.0, log_u - g);
        best = best.max(log_u);
    }
    best
}

/// `D = max_k Σ_{i=k}^{N} e^{-(S_i - S_k)} >= K`.
pub fn upper_bound_d(walk: &WalkPath) -> f64 {
    log_upper_bound_d(walk).exp()
}

/// `max_n Σ_{i=0}^{n} e^{S_n - S_i}`, the same bound for the time-reversed
/// problem; it is the tight one when the drift is negative.
pub fn reverse_upper_bound(walk: &WalkPath) -> f64 {
    let mut log_v = 0.0f64;
    let mut best = 0.0f64;
    for &g in walk.gamma() {
        log_v = log_add_exp(0.0, log_v + g);
        best = best.max(log_v);
    }
    best.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::walk::{derive_stream, sample_noise, sample_walk};

    fn ln2_instance() -> (WalkPath, PseudoOrbit) {
        // a1 = ln 2, one expanding step, r_1 = 1
        let p = ModelParams::validate(0.25, 2.0).unwrap();
        let w = WalkPath::from_symbols(p, vec![true]);
        let o = PseudoOrbit::new(&w, vec![1.0], 1.0).unwrap();
        (w, o)
    }

    fn random_instance(seed: u64, n: usize, d: f64) -> (WalkPath, PseudoOrbit) {
        let p = ModelParams::validate(0.5, 3.0).unwrap().normalize();
        let mut s = derive_stream(seed, 0);
        let w = sample_walk(&p, n, &mut s);
        let o = sample_noise(&w, d, &mut s).unwrap();
        (w, o)
    }

    #[test]
    fn single_pair_is_one_third() {
        let (w, o) = ln2_instance();
        assert!((o.z().get(1) - 0.5).abs() < 1e-16);
        assert!((pairwise_b(&w, &o, 0, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let naive = k_naive(&w, &o);
        assert!((naive.k_statistic - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(naive.witness, Some((0, 1)));
        assert!((naive.optimal_y0 - 1.0 / 3.0).abs() < 1e-15);
        let fast = k_fast(&w, &o, 1e-12).unwrap();
        assert!((fast.k_statistic - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_z_gives_zero() {
        let p = ModelParams::validate(0.5, 3.0).unwrap();
        let w = WalkPath::from_symbols(p, vec![true, false, true]);
        let o = PseudoOrbit::new(&w, vec![0.5, 0.0, -0.25], 1.0).unwrap();
        assert_eq!(pairwise_b(&w, &o, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_pairs() {
        let (w, o) = ln2_instance();
        assert!(pairwise_b(&w, &o, 1, 1).is_err());
        assert!(pairwise_b(&w, &o, 0, 2).is_err());
        assert!(k_fast(&w, &o, 0.0).is_err());
        assert!(k_fast(&w, &o, f64::NAN).is_err());
    }

    #[test]
    fn zero_noise_is_exact() {
        let p = ModelParams::validate(0.5, 3.0).unwrap();
        let w = WalkPath::from_symbols(p, vec![true, false, true, true, false]);
        let o = PseudoOrbit::new(&w, vec![0.0; 5], 0.7).unwrap();
        let naive = k_naive(&w, &o);
        let fast = k_fast(&w, &o, DEFAULT_STAT_TOL).unwrap();
        assert_eq!(naive.k_statistic, 0.0);
        assert_eq!(naive.radius, 0.0);
        assert_eq!(fast.k_statistic, 0.0);
        assert_eq!(fast.radius, 0.0);
    }

    #[test]
    fn empty_walk() {
        let p = ModelParams::validate(0.5, 3.0).unwrap();
        let w = WalkPath::from_symbols(p, vec![]);
        let o = PseudoOrbit::new(&w, vec![], 1.0).unwrap();
        let r = k_fast(&w, &o, DEFAULT_STAT_TOL).unwrap();
        assert_eq!(r.k_statistic, 0.0);
        assert_eq!(r.witness, None);
        assert_eq!(k_naive(&w, &o).k_statistic, 0.0);
        assert_eq!(upper_bound_d(&w), 1.0);
    }

    #[test]
    fn d_bound_all_expanding() {
        let p = ModelParams::validate(0.25, 2.0).unwrap();
        let w = WalkPath::from_symbols(p, vec![true, true]);
        assert!((upper_bound_d(&w) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn fast_matches_naive_on_random_instances() {
        for seed in 0..200u64 {
            let n = 1 + (seed as usize * 7) % 200;
            let (w, o) = random_instance(seed, n, 1.0);
            let naive = k_naive(&w, &o);
            let fast = k_fast(&w, &o, DEFAULT_STAT_TOL).unwrap();
            let rel = (fast.k_statistic - naive.k_statistic).abs() / naive.k_statistic;
            assert!(rel <= 1e-10, "seed {seed}: {} vs {}", fast.k_statistic, naive.k_statistic);
            assert!(naive.k_statistic <= naive.d_bound);
        }
    }

    #[test]
    fn fast_handles_negative_drift() {
        let p = ModelParams::validate(1.0 / 3.0, 2.0).unwrap();
        let mut s = derive_stream(5, 0);
        let symbols: Vec<bool> = (0..400).map(|_| s.next_bit()).collect();
        let w = WalkPath::from_symbols(p, symbols);
        let noise: Vec<f64> = (0..400).map(|_| s.next_noise()).collect();
        let o = PseudoOrbit::new(&w, noise, 1.0).unwrap();
        let naive = k_naive(&w, &o);
        let fast = k_fast(&w, &o, DEFAULT_STAT_TOL).unwrap();
        assert!(naive.k_statistic.is_finite());
        assert!((fast.k_statistic - naive.k_statistic).abs() <= 1e-10 * naive.k_statistic);
        assert!(naive.k_statistic <= reverse_upper_bound(&w));
    }

    #[test]
    fn witness_attains_statistic() {
        for seed in 0..50u64 {
            let (w, o) = random_instance(1000 + seed, 60, 1.0);
            let fast = k_fast(&w, &o, DEFAULT_STAT_TOL).unwrap();
            let (k, n) = fast.witness.unwrap();
            let b = pairwise_b(&w, &o, k, n).unwrap();
            assert!((b - fast.k_statistic).abs() <= 1e-10 * fast.k_statistic);
        }
    }

    #[test]
    fn symmetric_pair_at_optimum() {
        for seed in 0..30u64 {
            let (w, o) = random_instance(500 + seed, 12, 0.5);
            let rep = k_naive(&w, &o);
            let (k, n) = rep.witness.unwrap();
            let s = w.prefix();
            let d = o.scale();
            let ek = s[k].exp() * (rep.optimal_y0 - d * o.z().get(k));
            let en = s[n].exp() * (rep.optimal_y0 - d * o.z().get(n));
            assert!((ek + en).abs() <= 1e-10 * rep.radius.max(1e-300), "seed {seed}: {ek} {en}");
            assert!((ek.abs() - rep.radius).abs() <= 1e-10 * rep.radius);
        }
    }

    #[test]
    fn prefix_statistic_is_monotone() {
        let (w, o) = random_instance(77, 150, 1.0);
        let mut last = 0.0;
        for m in 1..=150 {
            let k = k_naive(&w.truncated(m), &o.truncated(m)).k_statistic;
            assert!(k >= last);
            last = k;
        }
    }

    #[test]
    fn time_reversal_preserves_pairs() {
        for seed in 0..40u64 {
            let n = 1 + seed as usize % 10;
            let (w, o) = random_instance(3000 + seed, n, 1.0);
            let inv = w.params().inverse();
            let symbols: Vec<bool> = w.symbols().iter().rev().map(|&b| !b).collect();
            let rw = WalkPath::from_symbols(inv, symbols);
            // r'_{j+1} = -r_{N-j} e^{-γ_{N-j-1}}
            let noise: Vec<f64> = (0..n)
                .map(|j| -o.noise()[n - j - 1] * (-w.gamma()[n - j - 1]).exp())
                .collect();
            // |r'| may exceed one, so bypass range validation by scaling
            let scale = noise.iter().fold(1.0f64, |m, r| m.max(r.abs()));
            let scaled: Vec<f64> = noise.iter().map(|r| r / scale).collect();
            let ro = PseudoOrbit::new(&rw, scaled, 1.0).unwrap();
            for k in 0..n {
                for m in k + 1..=n {
                    let b = pairwise_b(&w, &o, k, m).unwrap();
                    let rb = scale * pairwise_b(&rw, &ro, n - m, n - k).unwrap();
                    assert!((b - rb).abs() <= 1e-12 * b.max(1e-300), "seed {seed} ({k},{m}): {b} vs {rb}");
                }
            }
        }
    }
}
