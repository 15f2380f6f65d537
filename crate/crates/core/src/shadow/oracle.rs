//! Direct minimization of the shadowing error in exact arithmetic.
//!
//! The pseudo-orbit is replayed in dyadic rationals, so `x_k` and the
//! products `P_k = λ_0 ⋯ λ_{k-1}` carry no rounding. The error of the exact
//! orbit through `y` is `e_k(y) = P_k y - x_k` and `F(y) = max_k |e_k(y)|`
//! is convex and piecewise linear; its minimum is found by bisection on the
//! sign of the right derivative.

use super::ShadowError;
use crate::dyadic::Dyadic;
use crate::walk::{PseudoOrbit, WalkPath};

/// Default relative tolerance on the minimal error.
pub const DEFAULT_ORACLE_TOL: f64 = 1e-12;

const MAX_ITERATIONS: usize = 100_000;
const QUOTIENT_BITS: u64 = 80;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    /// `min_y F(y)` to the requested relative tolerance (never below it).
    pub radius: f64,
    /// A point `y` with `F(y) = radius`.
    pub y0: f64,
    pub iterations: usize,
}

struct Lines {
    slopes: Vec<Dyadic>,
    intercepts: Vec<Dyadic>,
}

struct Eval {
    value: Dyadic,
    rising: bool,
    // argmax of e_k and of -e_k
    arg_up: usize,
    arg_down: usize,
}

impl Lines {
    fn build(walk: &WalkPath, pseudo: &PseudoOrbit, x0: f64) -> Self {
        let d = Dyadic::from_f64(pseudo.scale());
        let mut p = Dyadic::from_f64(1.0);
        let mut x = Dyadic::from_f64(x0);
        let mut slopes = Vec::with_capacity(walk.len() + 1);
        let mut intercepts = Vec::with_capacity(walk.len() + 1);
        slopes.push(p.clone());
        intercepts.push(x.clone());
        for (i, &r) in pseudo.noise().iter().enumerate() {
            let lambda = Dyadic::from_f64(walk.multiplier(i));
            p = &p * &lambda;
            x = &(&x * &lambda) + &(&d * &Dyadic::from_f64(r));
            slopes.push(p.clone());
            intercepts.push(x.clone());
        }
        Self { slopes, intercepts }
    }

    fn eval(&self, y: &Dyadic) -> Eval {
        let mut up: Option<(Dyadic, usize)> = None;
        let mut down: Option<(Dyadic, usize)> = None;
        for (k, (p, x)) in self.slopes.iter().zip(&self.intercepts).enumerate() {
            let e = &(p * y) - x;
            let neg = -&e;
            if up.as_ref().is_none_or(|(u, _)| e > *u) {
                up = Some((e, k));
            }
            if down.as_ref().is_none_or(|(v, _)| neg > *v) {
                down = Some((neg, k));
            }
        }
        let (up, arg_up) = up.expect("at least one point");
        let (down, arg_down) = down.expect("at least one point");
        let rising = up >= down;
        Eval {
            value: if rising { up } else { down },
            rising,
            arg_up,
            arg_down,
        }
    }

    /// `min_y max(|e_k(y)|, |e_n(y)|)`, a lower bound on `min F`.
    fn pair_bound(&self, k: usize, n: usize) -> f64 {
        if k == n {
            return 0.0;
        }
        let (pk, xk) = (&self.slopes[k], &self.intercepts[k]);
        let (pn, xn) = (&self.slopes[n], &self.intercepts[n]);
        let num = (&(xk * pn) - &(xn * pk)).abs();
        num.div_approx(&(pk + pn), QUOTIENT_BITS).to_f64()
    }

    fn max_slope(&self) -> &Dyadic {
        self.slopes.iter().max().expect("at least one point")
    }
}

/// Optimal radius for the exact orbits against `pseudo` started at `x_0 = 0`.
pub fn oracle_radius(walk: &WalkPath, pseudo: &PseudoOrbit, tol: f64) -> Result<OracleResult, ShadowError> {
    oracle_radius_from(walk, pseudo, 0.0, tol)
}

/// Same, for the pseudo-orbit started at `x_0 = x0`.
pub fn oracle_radius_from(
    walk: &WalkPath,
    pseudo: &PseudoOrbit,
    x0: f64,
    tol: f64,
) -> Result<OracleResult, ShadowError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ShadowError::InvalidTolerance(tol));
    }
    let lines = Lines::build(walk, pseudo, x0);
    let done = |y: Dyadic, e: &Eval, iterations| OracleResult {
        radius: e.value.to_f64(),
        y0: y.to_f64(),
        iterations,
    };

    let roots: Vec<Dyadic> = lines
        .intercepts
        .iter()
        .zip(&lines.slopes)
        .map(|(x, p)| x.div_approx(p, QUOTIENT_BITS))
        .collect();
    let mut lo = roots.iter().min().expect("at least one point").clone();
    let mut hi = roots.iter().max().expect("at least one point").clone();

    let mut width = &hi - &lo;
    if width.is_zero() {
        width = if lo.is_zero() {
            Dyadic::from_f64(1.0)
        } else {
            lo.abs()
        }
        .mul_pow2(-40);
    }
    let mut at_lo = lines.eval(&lo);
    if at_lo.value.is_zero() {
        return Ok(done(lo, &at_lo, 0));
    }
    while at_lo.rising {
        lo = &lo - &width;
        width = width.mul_pow2(1);
        at_lo = lines.eval(&lo);
    }
    let mut at_hi = lines.eval(&hi);
    while !at_hi.rising {
        hi = &hi + &width;
        width = width.mul_pow2(1);
        at_hi = lines.eval(&hi);
    }

    let tol_d = Dyadic::from_f64(tol);
    let p_max = lines.max_slope().clone();
    for iteration in 1..=MAX_ITERATIONS {
        let mid = (&lo + &hi).half();
        let at_mid = lines.eval(&mid);
        if at_mid.value.is_zero() {
            return Ok(done(mid, &at_mid, iteration));
        }
        if at_mid.rising {
            hi = mid;
            at_hi = at_mid;
        } else {
            lo = mid;
            at_lo = at_mid;
        }
        let lower = lines
            .pair_bound(at_hi.arg_up, at_hi.arg_down)
            .max(lines.pair_bound(at_lo.arg_up, at_lo.arg_down));
        let upper = at_hi.value.to_f64();
        if upper - lower <= tol * upper {
            return Ok(done(hi, &at_hi, iteration));
        }
        // F(hi) - min F <= P_max (hi - lo)
        if &p_max * &(&hi - &lo) <= &tol_d * &at_hi.value {
            return Ok(done(hi, &at_hi, iteration));
        }
    }
    Ok(done(hi, &at_hi, MAX_ITERATIONS))
}
