//! Small numerical kernels shared by the solvers: quadratic roots, a
//! safeguarded Newton iteration on a sign-changing bracket, and the Thomas
//! algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Both real roots of `a x^2 + b x + c = 0`, larger first.
///
/// The larger-magnitude root comes from the usual formula and its partner
/// from the product identity `x1 x2 = c / a`, so neither root suffers
/// cancellation. Requires `a != 0` and a non-negative discriminant.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (x1, x2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if x1 >= x2 {
        (x1, x2)
    } else {
        (x2, x1)
    }
}

/// A root together with the sign-change interval that certifies it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketedRoot {
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl BracketedRoot {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

const MAX_ITERATIONS: usize = 400;

/// Finds the root of `f` on `[lo, hi]` where `f(lo)` and `f(hi)` have
/// opposite signs. `f` returns the value and the derivative.
///
/// Newton steps are taken while they stay inside the bracket and shrink it
/// fast enough; otherwise the step falls back to bisection (geometric when
/// the bracket spans orders of magnitude on the positive axis). Iteration
/// stops once the bracket is narrower than `rel_tol * |x|` (or hits an exact
/// zero).
pub fn safeguarded_newton<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<BracketedRoot>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(BracketedRoot { root: lo, lo, hi: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(BracketedRoot { root: hi, lo: hi, hi, iterations: 0 });
    }
    if !(f_lo.signum() * f_hi.signum() < 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let increasing = f_hi > 0.0;
    // `neg`/`pos` keep the endpoints where f is negative/positive.
    let (mut neg, mut pos) = if increasing { (lo, hi) } else { (hi, lo) };
    let (mut f_neg, mut f_pos) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };

    let mut x = midpoint(neg, pos);
    let mut last_width = (pos - neg).abs();
    for it in 1..=MAX_ITERATIONS {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(BracketedRoot { root: x, lo: x, hi: x, iterations: it });
        }
        if fx < 0.0 {
            neg = x;
            f_neg = fx;
        } else {
            pos = x;
            f_pos = fx;
        }
        let (a, b) = if neg < pos { (neg, pos) } else { (pos, neg) };
        let width = b - a;
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if width <= rel_tol * scale {
            let root = if f_neg.abs() <= f_pos.abs() { neg } else { pos };
            return Ok(BracketedRoot { root, lo: a, hi: b, iterations: it });
        }

        let mut next = if dfx != 0.0 && dfx.is_finite() { x - fx / dfx } else { f64::NAN };
        let slow = width > 0.5 * last_width;
        last_width = width;
        if !(next > a && next < b) || slow {
            next = midpoint(a, b);
        } else {
            // Step past the root by a hair so the next evaluation can close
            // the bracket from the other side.
            let min_step = 0.25 * rel_tol * scale;
            if (next - x).abs() < min_step {
                next = x + (next - x).signum() * min_step;
                if !(next > a && next < b) {
                    next = midpoint(a, b);
                }
            }
        }
        x = next;
    }
    let (a, b) = if neg < pos { (neg, pos) } else { (pos, neg) };
    Ok(BracketedRoot {
        root: if f_neg.abs() <= f_pos.abs() { neg } else { pos },
        lo: a,
        hi: b,
        iterations: MAX_ITERATIONS,
    })
}

fn midpoint(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo > 0.0 && hi / lo > 4.0 {
        (lo.ln() * 0.5 + hi.ln() * 0.5).exp()
    } else {
        lo + 0.5 * (hi - lo)
    }
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i+1]` (so the last entry is ignored). The
/// algorithm is stable for the diagonally dominant M-matrices produced by a
/// monotone scheme.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}
