//! Exponents governing the shadowing phase transition.
//!
//! For a walk with increments `a0 < 0 < a1` and positive mean `v`, the ruin
//! probability `P(∃ i: S_i <= -C)` decays like `e^{-b C}`, where `b` is the
//! positive root of
//!
//! ```text
//! Φ(β) = (e^{-β a0} + e^{-β a1}) / 2 - 1 = 0
//! ```
//!
//! and `c0 = 1/b` is the critical exponent. Left-tail deviations of `S_n / n`
//! below `v - eps` have Cramér rate `h(eps) = I(v - eps)` with
//! `I(x) = sup_t [t x - Λ(t)]` and `Λ(t) = ln((e^{t a0} + e^{t a1}) / 2)`.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ModelError, ModelParams, NormalizedParams};
use crate::montecarlo::Estimate;
use crate::walk::derive_stream;

/// Default residual tolerance for [`solve_ruin_exponent`].
pub const DEFAULT_RUIN_TOL: f64 = 1e-10;

/// Default tolerance on `|Λ'(t) - x|` for the rate function.
pub const DEFAULT_RATE_TOL: f64 = 1e-12;

const MAX_DOUBLINGS: usize = 60;
const CERTIFY_PROBE: f64 = 1e-6;
// Λ' is searched on t ∈ [-RATE_SPAN / (a1 - a0), 0]
const RATE_SPAN: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("drift v = {0} must be positive (normalize the parameters first)")]
    NonPositiveDrift(f64),
    #[error("no sign change of the ruin equation below beta = {0}")]
    BracketFailed(f64),
    #[error("ruin equation residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("root b = {0} is not an isolated sign change")]
    NotCertified(f64),
    #[error("eps = {eps} outside the admissible interval (0, {max}]")]
    EpsOutOfRange { eps: f64, max: f64 },
    #[error("tolerance must be positive and finite (got {0})")]
    InvalidTolerance(f64),
    #[error("ruin level C = {0} must be finite and > 0")]
    InvalidLevel(f64),
    #[error("sample count must be >= 1")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinSolution {
    pub b: f64,
    pub c0: f64,
    /// `|Φ(b)|`.
    pub residual: f64,
}

/// `Φ(β)`, computed with `expm1` so it is accurate near `β = 0`.
pub fn ruin_equation(params: &ModelParams, beta: f64) -> f64 {
    0.5 * ((-beta * params.a0()).exp_m1() + (-beta * params.a1()).exp_m1())
}

fn check_tol(tol: f64) -> Result<(), AsymptoticsError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(AsymptoticsError::InvalidTolerance(tol))
    }
}

/// Positive root `b` of `Φ`.
pub fn solve_ruin_exponent(params: &NormalizedParams, tol: f64) -> Result<RuinSolution, AsymptoticsError> {
    check_tol(tol)?;
    let p = params.params();
    if !(p.drift() > 0.0) {
        return Err(AsymptoticsError::NonPositiveDrift(p.drift()));
    }
    let phi = |beta: f64| ruin_equation(p, beta);

    let mut hi = 1.0;
    let mut doublings = 0;
    while phi(hi) <= 0.0 {
        if doublings == MAX_DOUBLINGS {
            return Err(AsymptoticsError::BracketFailed(hi));
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut lo = hi / 2.0;
    while phi(lo) >= 0.0 {
        lo /= 2.0;
        if lo == 0.0 {
            return Err(AsymptoticsError::BracketFailed(hi));
        }
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = if phi(lo).abs() <= phi(hi).abs() { lo } else { hi };
    let residual = phi(b).abs();
    if residual > tol {
        return Err(AsymptoticsError::Residual { residual, tol });
    }
    if !(phi(b * (1.0 - CERTIFY_PROBE)) < 0.0 && phi(b * (1.0 + CERTIFY_PROBE)) > 0.0) {
        return Err(AsymptoticsError::NotCertified(b));
    }
    Ok(RuinSolution {
        b,
        c0: 1.0 / b,
        residual,
    })
}

/// `c0 = 1/b` for the normalized form of `params`.
pub fn critical_exponent(params: &ModelParams, tol: f64) -> Result<f64, AsymptoticsError> {
    solve_ruin_exponent(&params.normalize(), tol).map(|s| s.c0)
}

/// `ceil(10 C / v + 50 / v)` steps.
pub fn default_horizon(params: &NormalizedParams, level: f64) -> usize {
    let v = params.drift();
    ((10.0 * level + 50.0) / v).ceil() as usize
}

/// Fraction of walks with `S_i <= -level` for some `i <= horizon`.
pub fn ruin_probability_mc(
    params: &NormalizedParams,
    level: f64,
    horizon: usize,
    samples: u64,
    seed: u64,
) -> Result<Estimate, AsymptoticsError> {
    if !(level.is_finite() && level > 0.0) {
        return Err(AsymptoticsError::InvalidLevel(level));
    }
    if samples == 0 {
        return Err(AsymptoticsError::NoSamples);
    }
    let (a0, a1) = (params.a0(), params.a1());
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive_stream(seed, i);
            let mut s = 0.0;
            for _ in 0..horizon {
                s += if stream.next_bit() { a1 } else { a0 };
                if s <= -level {
                    return 1;
                }
            }
            0
        })
        .sum();
    Ok(Estimate::from_counts(hits, samples, seed))
}

/// Fraction of walks with `S_n < 0`.
pub fn lower_tail_mc(params: &NormalizedParams, n: usize, samples: u64, seed: u64) -> Result<Estimate, AsymptoticsError> {
    if samples == 0 {
        return Err(AsymptoticsError::NoSamples);
    }
    let (a0, a1) = (params.a0(), params.a1());
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive_stream(seed, i);
            let s: f64 = (0..n).map(|_| if stream.next_bit() { a1 } else { a0 }).sum();
            u64::from(s < 0.0)
        })
        .sum();
    Ok(Estimate::from_counts(hits, samples, seed))
}

/// The left-tail rate function `h(eps) = I(v - eps)` of the walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunction {
    params: NormalizedParams,
}

/// `h(eps)` with the maximizing `t*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub eps: f64,
    pub h: f64,
    pub t_star: f64,
}

impl RateFunction {
    pub fn new(params: NormalizedParams) -> Self {
        Self { params }
    }

    /// Largest admissible `eps`, namely `v - a0`; there `h = ln 2`.
    pub fn max_eps(&self) -> f64 {
        self.params.drift() - self.params.a0()
    }

    fn spread(&self) -> f64 {
        self.params.a1() - self.params.a0()
    }

    /// `Λ(t)`.
    pub fn log_mgf(&self, t: f64) -> f64 {
        let (x, y) = (t * self.params.a0(), t * self.params.a1());
        let m = x.max(y);
        m + (-(x - y).abs()).exp().ln_1p() - std::f64::consts::LN_2
    }

    /// `Λ'(t)`, a tilted mean of `a0` and `a1`.
    pub fn log_mgf_derivative(&self, t: f64) -> f64 {
        let w = 1.0 / (1.0 + (-self.spread() * t).exp());
        self.params.a0() + self.spread() * w
    }

    pub fn point(&self, eps: f64, tol: f64) -> Result<RatePoint, AsymptoticsError> {
        check_tol(tol)?;
        let max = self.max_eps();
        if !(eps > 0.0 && eps <= max) {
            return Err(AsymptoticsError::EpsOutOfRange { eps, max });
        }
        let x = self.params.drift() - eps;
        let mut lo = -RATE_SPAN / self.spread();
        let mut hi = 0.0;
        // Λ' is increasing, Λ'(lo) < x <= Λ'(0) = v
        loop {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = self.log_mgf_derivative(mid) - x;
            if g.abs() <= tol {
                lo = mid;
                hi = mid;
                break;
            }
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = if (self.log_mgf_derivative(lo) - x).abs() <= (self.log_mgf_derivative(hi) - x).abs() {
            lo
        } else {
            hi
        };
        // t x - Λ(t) with the a0 part cancelled by hand: t (x - a0) - ln(1 + e^{tΔ}) + ln 2
        let h = t * (x - self.params.a0()) - (self.spread() * t).exp().ln_1p() + std::f64::consts::LN_2;
        Ok(RatePoint {
            eps,
            h: h.max(0.0),
            t_star: t,
        })
    }

    pub fn eval(&self, eps: f64, tol: f64) -> Result<f64, AsymptoticsError> {
        self.point(eps, tol).map(|p| p.h)
    }
}

/// `h(eps)` for `params`.
pub fn rate_function(params: &NormalizedParams, eps: f64, tol: f64) -> Result<f64, AsymptoticsError> {
    RateFunction::new(*params).eval(eps, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l0: f64, l1: f64) -> NormalizedParams {
        ModelParams::validate(l0, l1).unwrap().normalize()
    }

    #[test]
    fn phi_basics() {
        let p = params(0.5, 3.0);
        assert_eq!(ruin_equation(&p, 0.0), 0.0);
        let h = 1e-7;
        let slope = ruin_equation(&p, h) / h;
        assert!((slope + p.drift()).abs() < 1e-6);
    }

    #[test]
    fn half_four_is_golden() {
        // u = 2^b solves u^3 - 2u^2 + 1 = 0, so u = φ
        let s = solve_ruin_exponent(&params(0.5, 4.0), DEFAULT_RUIN_TOL).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((s.b - golden.log2()).abs() < 1e-12);
        assert!((s.c0 - 1.0 / golden.log2()).abs() < 1e-12);
    }

    #[test]
    fn half_three_in_range() {
        let s = solve_ruin_exponent(&params(0.5, 3.0), DEFAULT_RUIN_TOL).unwrap();
        assert!(s.b < 1.0 && s.c0 > 1.0);
        assert!(s.residual <= DEFAULT_RUIN_TOL);
        // 2^b + 3^{-b} = 2
        assert!((2f64.powf(s.b) + 3f64.powf(-s.b) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_map_shares_exponent() {
        let a = critical_exponent(&ModelParams::validate(0.5, 3.0).unwrap(), DEFAULT_RUIN_TOL).unwrap();
        let b = critical_exponent(&ModelParams::validate(1.0 / 3.0, 2.0).unwrap(), DEFAULT_RUIN_TOL).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn uniqueness_on_a_grid() {
        let p = params(0.3, 2.5);
        let s = solve_ruin_exponent(&p, DEFAULT_RUIN_TOL).unwrap();
        for i in 1..200 {
            let beta = s.b * i as f64 / 100.0;
            let v = ruin_equation(&p, beta);
            if i < 100 {
                assert!(v < 0.0);
            } else if i > 100 {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = params(0.5, 3.0);
        assert!(solve_ruin_exponent(&p, 0.0).is_err());
        let r = RateFunction::new(p);
        assert!(r.eval(0.0, DEFAULT_RATE_TOL).is_err());
        assert!(r.eval(r.max_eps() * 1.01, DEFAULT_RATE_TOL).is_err());
        assert!(ruin_probability_mc(&p, 0.0, 10, 10, 0).is_err());
    }

    #[test]
    fn rate_matches_closed_form() {
        // Λ'(t) = x solves to t = logit((x - a0)/Δ)/Δ
        let p = params(0.5, 3.0);
        let r = RateFunction::new(p);
        let delta = p.a1() - p.a0();
        for i in 1..20 {
            let eps = r.max_eps() * i as f64 / 20.0;
            let x = p.drift() - eps;
            let q = (x - p.a0()) / delta;
            let t = (q / (1.0 - q)).ln() / delta;
            let expect = t * x - r.log_mgf(t);
            let got = r.point(eps, DEFAULT_RATE_TOL).unwrap();
            assert!((got.h - expect).abs() < 1e-12, "eps {eps}: {} vs {expect}", got.h);
            assert!((r.log_mgf_derivative(got.t_star) - x).abs() < 1e-10);
        }
    }

    #[test]
    fn rate_limits() {
        let r = RateFunction::new(params(0.5, 3.0));
        assert!(r.eval(1e-8, DEFAULT_RATE_TOL).unwrap() < 1e-12);
        let edge = r.eval(r.max_eps(), DEFAULT_RATE_TOL).unwrap();
        assert!((edge - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn ruin_small_level_is_likely() {
        let p = params(0.5, 3.0);
        let level = 0.5 * p.a0().abs();
        let e = ruin_probability_mc(&p, level, default_horizon(&p, level), 4000, 1).unwrap();
        assert!(e.p_hat >= 0.5);
    }

    #[test]
    fn ruin_decreases_with_level() {
        let p = params(0.5, 3.0);
        let mut last = 1.0;
        for level in [1.0, 2.0, 4.0] {
            let e = ruin_probability_mc(&p, level, default_horizon(&p, level), 20_000, 7).unwrap();
            assert!(e.p_hat < last);
            last = e.p_hat;
        }
    }
}
