//! Closed-form solution for constant consumption `c(w) = c`.
//!
//! The free boundaries are found from the scalar equation `g(y_da) = 0` on
//! `(0, 1)`; everything else follows in closed form. Wealth is mapped to the
//! dual variable numerically (see [`crate::dual`]).
//!
//! ```
//! use lifetime_poverty::model::*;
//! use lifetime_poverty::constant;
//!
//! let spec = ProblemSpec {
//!     market: MarketParams { r: 0.02, mu: 0.06, sigma: 0.2, lambda: 0.04, income: 0.0 },
//!     consumption: ConsumptionSpec::Constant { c: 1.0 },
//!     poverty: PovertySpec::step(0.0, 30.0, 0.5, 25.0),
//! };
//! let problem = validate(&spec).unwrap();
//! let sol = constant::assemble(&problem).unwrap();
//! assert!(sol.y_da() > 0.0 && sol.y_da() < 1.0);
//! assert_eq!(sol.value(0.0).unwrap(), 25.0);
//! assert_eq!(sol.value(50.0).unwrap(), 0.0);
//! ```

use serde::Serialize;

use crate::dual::{DualFunction, DualPoint, Side, ValuePoint};
use crate::error::{Error, Result};
use crate::model::{Regime, ValidatedProblem};
use crate::numeric::{safeguarded_newton, BracketedRoot};

/// Relative tolerance for the two independent expressions of `y_a` and of
/// each dual coefficient.
const CONSISTENCY_TOL: f64 = 1e-8;

/// Shape of the optimal policy on `(a, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PiMonotonicity {
    DecreasingOnAD,
    IncreasingOnAD,
    /// Decreasing on `(a, w0)`, increasing on `(w0, d)`.
    DownThenUp { w0: f64 },
}

/// The scalar function whose root in `(0, 1)` is `y_da = y_d / y_a`.
#[derive(Debug, Clone, Copy)]
pub struct GFunction {
    b1: f64,
    b2: f64,
    pa: f64,
    pd: f64,
    q: f64,
    excess: f64,
}

impl GFunction {
    fn new(problem: &ValidatedProblem, d: f64, l: f64) -> Self {
        let der = problem.derived();
        let ws = problem.safe_level();
        let q = l / problem.market().lambda;
        GFunction {
            b1: der.beta1,
            b2: der.beta2,
            pa: ws - problem.ruin_level(),
            pd: ws - d,
            q,
            excess: (problem.ruin_penalty() - q).max(0.0),
        }
    }

    fn terms(&self, y: f64) -> [f64; 5] {
        let (b1, b2, pa, pd, q, re) = (self.b1, self.b2, self.pa, self.pd, self.q, self.excess);
        let bb = b1 - b2;
        [
            b1 * (1.0 - b2) * pa * q * y.powf(b1 - b2),
            bb * pa * re * y.powf(b1),
            -bb * pd * q * y.powf(1.0 - b2),
            -bb * pd * re * y,
            b2 * (b1 - 1.0) * pa * q,
        ]
    }

    /// `g(y)` and `g'(y)`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let (b1, b2, pa, pd, q, re) = (self.b1, self.b2, self.pa, self.pd, self.q, self.excess);
        let g = self.terms(y).iter().sum();
        let dg = (b1 - b2) * ((1.0 - b2) * q * y.powf(-b2) + re) * (b1 * pa * y.powf(b1 - 1.0) - pd);
        (g, dg)
    }

    /// Sum of the magnitudes of the terms of `g`, the yardstick for "zero".
    pub fn scale(&self, y: f64) -> f64 {
        self.terms(y).iter().map(|t| t.abs()).sum()
    }

    /// `((w_s - d) / (w_s - a))^(1 / (beta1 - 1))`, a strict lower bound on
    /// the root.
    pub fn lower_bound(&self) -> f64 {
        (self.pd / self.pa).powf(1.0 / (self.b1 - 1.0))
    }
}

/// The assembled closed-form solution.
#[derive(Debug, Clone)]
pub struct ConstantSolution {
    problem: ValidatedProblem,
    g: GFunction,
    root: BracketedRoot,
    y_a: f64,
    dual: DualFunction,
}

/// Constants of a constant-consumption solution, as exported to JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantCoefficients {
    pub y_da: f64,
    pub y_a: f64,
    pub y_d: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

fn single_step_constant(problem: &ValidatedProblem) -> Result<(f64, f64)> {
    if !matches!(problem.regime(), Regime::Constant { .. }) {
        return Err(Error::Unsupported(format!(
            "constant-consumption closed form does not apply to {} consumption",
            problem.consumption().name()
        )));
    }
    problem
        .single_step()
        .ok_or_else(|| Error::Unsupported("closed form requires single-step poverty".into()))
}

/// Builds `g` for a single-step constant-consumption problem.
pub fn g_function(problem: &ValidatedProblem) -> Result<GFunction> {
    let (d, l) = single_step_constant(problem)?;
    Ok(GFunction::new(problem, d, l))
}

/// Solves `g(y) = 0` on `(0, 1)`.
///
/// The bracket starts at the analytic lower bound of the root, where `g` is
/// negative, and ends at 1, where `g = (beta1 - beta2)(d - a) rho > 0`.
pub fn solve_g_root(problem: &ValidatedProblem) -> Result<BracketedRoot> {
    let g = g_function(problem)?;
    let mut lo = g.lower_bound();
    if !(g.eval(lo).0 < 0.0) {
        lo = f64::MIN_POSITIVE;
    }
    safeguarded_newton(|y| g.eval(y), lo, 1.0, 1e-14)
}

/// Solves for `y_da` and assembles the dual coefficients, checking that the
/// redundant expressions for `y_a`, `k1` and `k2` agree.
pub fn assemble(problem: &ValidatedProblem) -> Result<ConstantSolution> {
    let g = g_function(problem)?;
    let root = solve_g_root(problem)?;
    let (b1, b2, pa, pd, q, re) = (g.b1, g.b2, g.pa, g.pd, g.q, g.excess);
    let bb = b1 - b2;
    let yda = root.root;
    let (d, _) = problem.single_step().expect("checked above");

    let y_a = b1 / (b1 - 1.0) * (q * yda.powf(-b2) + re) / pa;
    let y_a_alt = -b1 * b2 * (q + re * yda.powf(b1))
        / (-bb * pd * yda + b1 * (1.0 - b2) * pa * yda.powf(b1));
    check("y_a", y_a, y_a_alt, y_a.abs())?;

    let big1 = (-(1.0 - b2) * pa * y_a - b2 * re) / bb;
    let big2 = (-(b1 - 1.0) * pa * y_a + b1 * re) / bb;
    // The same coefficients from the fit at y_d instead of y_a.
    let big1_alt = -pd * y_a * yda.powf(1.0 - b1) / b1 + b2 / bb * q * yda.powf(-b1);
    let big2_alt = -b1 / bb * q * yda.powf(-b2);
    let scale = big1.abs().max(big2.abs()).max(pa * y_a).max(re);
    check("k1", big1, big1_alt, scale)?;
    check("k2", big2, big2_alt, scale)?;
    // Both fit-at-d forms are sums of same-signed terms, while the fit-at-a
    // forms can cancel to a tiny coefficient that s^beta2 then magnifies.
    let (big1, big2) = (big1_alt, big2_alt);

    let dual = DualFunction {
        e1: b1,
        e2: b2,
        offset: problem.safe_level(),
        q,
        a: problem.ruin_level(),
        d,
        rho: problem.ruin_penalty(),
        y_a,
        y_da: yda,
        big1,
        big2,
        w_max: problem.safe_level(),
    };
    let sol = ConstantSolution { problem: problem.clone(), g, root, y_a, dual };
    for y in [y_a, dual.y_d()] {
        let p = sol.dual.eval(y)?;
        if !(p.l_yy < 0.0) {
            return Err(Error::PropertyViolation(format!(
                "dual function is not concave at y = {y} (L_yy = {})",
                p.l_yy
            )));
        }
    }
    Ok(sol)
}

fn check(what: &'static str, x: f64, alt: f64, scale: f64) -> Result<()> {
    let gap = (x - alt).abs() / scale.max(f64::MIN_POSITIVE);
    if gap > CONSISTENCY_TOL || !gap.is_finite() {
        return Err(Error::Consistency { what, gap });
    }
    Ok(())
}

/// Minimum ruin probability times `rho`, the value function when the running
/// cost vanishes: `rho ((w_s - w) / (w_s - a))^(beta1 / (beta1 - 1))`.
pub fn ruin_value(problem: &ValidatedProblem, w: f64) -> Result<f64> {
    if !matches!(problem.regime(), Regime::Constant { .. }) {
        return Err(Error::Unsupported("ruin_value needs constant consumption".into()));
    }
    let (a, ws) = (problem.ruin_level(), problem.safe_level());
    if !(a..=ws).contains(&w) {
        return Err(Error::Domain { w, lo: a, hi: ws });
    }
    let b1 = problem.derived().beta1;
    Ok(problem.ruin_penalty() * ((ws - w) / (ws - a)).powf(b1 / (b1 - 1.0)))
}

/// Ruin-probability strategy `((mu - r) / sigma^2)(beta1 - 1)(w_s - w)`.
pub fn pi_zero(problem: &ValidatedProblem, w: f64) -> f64 {
    problem.pi_zero(w)
}

impl ConstantSolution {
    pub fn problem(&self) -> &ValidatedProblem {
        &self.problem
    }

    pub fn g(&self) -> &GFunction {
        &self.g
    }

    /// The root of `g` with its certifying bracket.
    pub fn root(&self) -> &BracketedRoot {
        &self.root
    }

    pub fn y_da(&self) -> f64 {
        self.root.root
    }

    pub fn y_a(&self) -> f64 {
        self.y_a
    }

    pub fn y_d(&self) -> f64 {
        self.dual.y_d()
    }

    pub fn poverty_level(&self) -> f64 {
        self.dual.d
    }

    pub fn safe_level(&self) -> f64 {
        self.dual.w_max
    }

    /// Unscaled dual coefficients `(k0, k1, k2)`. These involve powers of
    /// `y_a` and may over- or underflow for extreme parameters; evaluation
    /// never uses them.
    pub fn k(&self) -> (f64, f64, f64) {
        let (b1, b2) = (self.dual.e1, self.dual.e2);
        let pd = self.g.pd;
        let k0 = -pd / b1 * self.y_d().powf(1.0 - b1);
        (k0, self.dual.big1 * self.y_a.powf(-b1), self.dual.big2 * self.y_a.powf(-b2))
    }

    pub fn coefficients(&self) -> ConstantCoefficients {
        let (k0, k1, k2) = self.k();
        ConstantCoefficients {
            y_da: self.y_da(),
            y_a: self.y_a,
            y_d: self.y_d(),
            k0,
            k1,
            k2,
            beta1: self.dual.e1,
            beta2: self.dual.e2,
        }
    }

    /// The dual function at `y` in `[0, y_a]`.
    pub fn dual(&self, y: f64) -> Result<DualPoint> {
        self.dual.eval(y)
    }

    /// `y(w)`, the solution of `L_y(y) = w`, for `w` in `[a, w_s]`.
    pub fn invert_dual(&self, w: f64) -> Result<f64> {
        self.dual.invert(w)
    }

    /// `V(w)` for `w` in `[a, w_s]`.
    pub fn value(&self, w: f64) -> Result<f64> {
        self.dual.value(w)
    }

    /// `V` and its first two derivatives, computed through the dual.
    pub fn value_point(&self, w: f64, side: Side) -> Result<ValuePoint> {
        self.dual.value_point(w, side)
    }

    fn check_policy_domain(&self, w: f64) -> Result<()> {
        let (a, ws) = (self.dual.a, self.dual.w_max);
        if w > a && w <= ws {
            Ok(())
        } else {
            Err(Error::Domain { w, lo: a, hi: ws })
        }
    }

    /// Optimal amount in the risky asset at `w` in `(a, w_s]`, taking the
    /// `d+` limit at the poverty level.
    pub fn pi_star(&self, w: f64) -> Result<f64> {
        self.pi_star_sided(w, Side::Above)
    }

    pub fn pi_star_sided(&self, w: f64, side: Side) -> Result<f64> {
        self.check_policy_domain(w)?;
        let k = self.problem.market().premium_over_variance();
        Ok(k * self.dual.policy_factor(w, side))
    }

    /// `d pi* / dw`, analytic through the dual.
    pub fn pi_star_slope(&self, w: f64, side: Side) -> Result<f64> {
        self.check_policy_domain(w)?;
        let k = self.problem.market().premium_over_variance();
        Ok(k * self.dual.policy_factor_slope(w, side))
    }

    /// `lim pi*(w)` as `w -> a+`.
    pub fn pi_star_at_ruin(&self) -> f64 {
        self.problem.market().premium_over_variance() * self.dual.policy_factor_at_ruin()
    }

    /// Left-hand sides of the two inequalities that decide the shape of the
    /// optimal policy on `(a, d)`: the policy decreases iff the first is
    /// non-negative and increases iff the second is non-positive.
    pub fn monotonicity_criteria(&self) -> (f64, f64) {
        let (b1, b2, q, re) = (self.g.b1, self.g.b2, self.g.q, self.g.excess);
        let yda = self.y_da();
        let dec = (b1 - 1.0) * (b1 - b2) * re * yda.powf(b1)
            + (1.0 - b2) * q * (b1 * (b1 - 1.0) * yda.powf(b1 - b2) + b2 * (1.0 - b2));
        let inc = (b1 - 1.0) * re * yda.powf(b2) + (1.0 - b2) * (b1 + b2 - 1.0) * q;
        (dec, inc)
    }

    pub fn classify_pi_monotonicity(&self) -> PiMonotonicity {
        let (dec, inc) = self.monotonicity_criteria();
        if dec >= 0.0 {
            return PiMonotonicity::DecreasingOnAD;
        }
        if inc <= 0.0 {
            return PiMonotonicity::IncreasingOnAD;
        }
        // The slope of pi* has the sign of
        // K1 b1 (b1-1)^2 s^(b1-b2) + K2 b2 (b2-1)^2, which is monotone in s.
        let (b1, b2) = (self.dual.e1, self.dual.e2);
        let ratio = -self.dual.big2 * b2 * (b2 - 1.0).powi(2)
            / (self.dual.big1 * b1 * (b1 - 1.0).powi(2));
        let s0 = ratio.powf(1.0 / (b1 - b2)).clamp(self.y_da(), 1.0);
        PiMonotonicity::DownThenUp { w0: self.dual.wealth_at_s(s0) }
    }
}
