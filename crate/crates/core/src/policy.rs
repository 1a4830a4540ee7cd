//! Feedback investment policies `w -> pi(w)`.
//!
//! The simulator calls a policy once per time step and path, so the closed
//! forms (which invert the dual numerically) are tabulated before use.

use crate::constant::ConstantSolution;
use crate::dual::Side;
use crate::error::{Error, Result};
use crate::hjb::ValueTable;
use crate::model::ValidatedProblem;
use crate::proportional::ProportionalSolution;

/// A feedback policy. Implementations must be pure.
pub trait Policy: Sync {
    fn amount(&self, w: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> Policy for F {
    fn amount(&self, w: f64) -> f64 {
        self(w)
    }
}

/// Linear interpolation on a uniform grid, flat outside it.
#[derive(Debug, Clone)]
pub struct UniformTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl UniformTable {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2 && hi > lo);
        let step = (hi - lo) / (values.len() - 1) as f64;
        UniformTable { lo, step, values }
    }

    pub fn eval(&self, w: f64) -> f64 {
        let pos = (w - self.lo) / self.step;
        if !(pos > 0.0) {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        let j = pos.floor() as usize;
        if j >= last {
            return self.values[last];
        }
        let t = pos - j as f64;
        self.values[j] + t * (self.values[j + 1] - self.values[j])
    }
}

/// Piecewise-linear interpolation through `(w, pi)` points with
/// non-decreasing `w`; a repeated `w` encodes a jump, and the later point
/// wins at the jump itself (the `d+` convention). Flat outside the points.
#[derive(Debug, Clone)]
pub struct TabulatedPolicy {
    w: Vec<f64>,
    pi: Vec<f64>,
}

impl TabulatedPolicy {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("policy table is empty".into()));
        }
        if points.iter().any(|(w, p)| !w.is_finite() || !p.is_finite()) {
            return Err(Error::Config("policy table contains non-finite entries".into()));
        }
        if points.windows(2).any(|p| p[1].0 < p[0].0) {
            return Err(Error::Config("policy table wealth must be non-decreasing".into()));
        }
        let (w, pi) = points.into_iter().unzip();
        Ok(TabulatedPolicy { w, pi })
    }

    pub fn from_table(table: &ValueTable) -> Result<Self> {
        TabulatedPolicy::new(table.policy_points())
    }
}

impl Policy for TabulatedPolicy {
    fn amount(&self, w: f64) -> f64 {
        let j = self.w.partition_point(|&x| x <= w);
        if j == 0 {
            return self.pi[0];
        }
        if j == self.w.len() {
            return self.pi[j - 1];
        }
        let (w0, w1) = (self.w[j - 1], self.w[j]);
        let t = (w - w0) / (w1 - w0);
        self.pi[j - 1] + t * (self.pi[j] - self.pi[j - 1])
    }
}

/// Tabulated closed-form policy below the poverty level, exact linear
/// formula above it.
#[derive(Debug, Clone)]
pub struct SplitPolicy {
    d: f64,
    below: UniformTable,
    slope: f64,
    anchor: f64,
}

/// Table size used by [`SplitPolicy`] on `[a, d]`.
pub const DEFAULT_TABLE_POINTS: usize = 20_001;

impl SplitPolicy {
    /// `pi(w) = slope (w - anchor)` above `d`.
    fn build(a: f64, d: f64, n: usize, slope: f64, anchor: f64, below: impl Fn(f64) -> f64) -> Self {
        let values = (0..n)
            .map(|i| below(a + (d - a) * i as f64 / (n - 1) as f64))
            .collect();
        SplitPolicy { d, below: UniformTable::new(a, d, values), slope, anchor }
    }

    pub fn from_constant(sol: &ConstantSolution, n: usize) -> Self {
        let p = sol.problem();
        let (a, d) = (p.ruin_level(), sol.poverty_level());
        let slope = -p.market().premium_over_variance() * (p.derived().beta1 - 1.0);
        SplitPolicy::build(a, d, n, slope, p.safe_level(), |w| {
            if w <= a {
                sol.pi_star_at_ruin()
            } else {
                sol.pi_star_sided(w, Side::Below).expect("inside the domain")
            }
        })
    }

    pub fn from_proportional(sol: &ProportionalSolution, n: usize) -> Self {
        let p = sol.problem();
        let (a, d) = (p.ruin_level(), sol.poverty_level());
        let g1 = p.derived().gamma1.expect("proportional regime");
        let slope = p.market().premium_over_variance() * (1.0 - g1);
        SplitPolicy::build(a, d, n, slope, sol.income_floor(), |w| {
            if w <= a {
                sol.pi_star_at_ruin()
            } else {
                sol.pi_star_sided(w, Side::Below).expect("inside the domain")
            }
        })
    }
}

impl Policy for SplitPolicy {
    fn amount(&self, w: f64) -> f64 {
        if w < self.d {
            self.below.eval(w)
        } else {
            self.slope * (w - self.anchor)
        }
    }
}

/// The ruin-probability strategy of the problem.
pub fn pi_zero_policy(problem: &ValidatedProblem) -> impl Policy + '_ {
    move |w: f64| problem.pi_zero(w)
}

/// A policy scaled by a constant factor.
pub struct Scaled<P> {
    pub inner: P,
    pub factor: f64,
}

impl<P: Policy> Policy for Scaled<P> {
    fn amount(&self, w: f64) -> f64 {
        self.factor * self.inner.amount(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_policy_takes_right_limit_at_jumps() {
        let p = TabulatedPolicy::new(vec![(0.0, 1.0), (1.0, 3.0), (1.0, 2.0), (2.0, 0.0)]).unwrap();
        assert_eq!(p.amount(-1.0), 1.0);
        assert_eq!(p.amount(0.5), 2.0);
        assert_eq!(p.amount(1.0), 2.0);
        assert_eq!(p.amount(1.5), 1.0);
        assert_eq!(p.amount(9.0), 0.0);
        assert!(TabulatedPolicy::new(vec![(1.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn uniform_table_interpolates() {
        let t = UniformTable::new(0.0, 2.0, vec![0.0, 1.0, 4.0]);
        assert_eq!(t.eval(0.5), 0.5);
        assert_eq!(t.eval(1.5), 2.5);
        assert_eq!(t.eval(3.0), 4.0);
        assert_eq!(t.eval(-1.0), 0.0);
    }
}
