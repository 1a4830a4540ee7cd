//! Closed-form solution for proportional consumption `c(w) = kappa w`.
//!
//! Same structure as the constant-consumption solution with the exponent pair
//! `(gamma1, gamma2)`, the offset `B = A / (kappa - r)` in place of the safe
//! level, and an unbounded wealth domain `[a, inf)`.

use serde::Serialize;

use crate::dual::{DualFunction, DualPoint, Side, ValuePoint};
use crate::error::{Error, Result};
use crate::model::{Regime, ValidatedProblem};
use crate::numeric::{safeguarded_newton, BracketedRoot};

const CONSISTENCY_TOL: f64 = 1e-8;

/// Sample count per interval used by [`ProportionalSolution::classify_pi_monotonicity`].
const SLOPE_SAMPLES: usize = 1000;

/// The scalar function whose root in `(0, 1)` is `z_da = z_d / z_a`.
#[derive(Debug, Clone, Copy)]
pub struct HFunction {
    g1: f64,
    g2: f64,
    pa: f64,
    pd: f64,
    q: f64,
    excess: f64,
}

impl HFunction {
    fn terms(&self, z: f64) -> [f64; 5] {
        let (g1, g2, pa, pd, q, re) = (self.g1, self.g2, self.pa, self.pd, self.q, self.excess);
        let gg = g1 - g2;
        [
            -g1 * (1.0 - g2) * pa * q * z.powf(g1 - g2),
            -gg * pa * re * z.powf(g1),
            gg * pd * q * z.powf(1.0 - g2),
            gg * pd * re * z,
            -g2 * (g1 - 1.0) * pa * q,
        ]
    }

    /// `h(z)` and `h'(z)`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let (g1, g2, pa, pd, q, re) = (self.g1, self.g2, self.pa, self.pd, self.q, self.excess);
        let h = self.terms(z).iter().sum();
        let dh = (g1 - g2) * ((1.0 - g2) * q * z.powf(-g2) + re) * (pd - g1 * pa * z.powf(g1 - 1.0));
        (h, dh)
    }

    pub fn scale(&self, z: f64) -> f64 {
        self.terms(z).iter().map(|t| t.abs()).sum()
    }

    /// `((d - B) / (a - B))^(1 / (gamma1 - 1))`, a strict lower bound on the
    /// root.
    pub fn lower_bound(&self) -> f64 {
        (self.pd / self.pa).powf(1.0 / (self.g1 - 1.0))
    }
}

/// Result of the slope scan in [`ProportionalSolution::classify_pi_monotonicity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncreasingBothIntervals {
    /// Smallest finite-difference slope of `pi*` found on `(a, d)`.
    pub min_slope_below: f64,
    /// Smallest finite-difference slope of `pi*` found on `(d, 100 d)`.
    pub min_slope_above: f64,
}

#[derive(Debug, Clone)]
pub struct ProportionalSolution {
    problem: ValidatedProblem,
    h: HFunction,
    root: BracketedRoot,
    dual: DualFunction,
}

/// Constants of a proportional-consumption solution, as exported to JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionalCoefficients {
    pub z_da: f64,
    pub z_a: f64,
    pub z_d: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Builds `h` for a single-step proportional-consumption problem.
pub fn h_function(problem: &ValidatedProblem) -> Result<HFunction> {
    if !matches!(problem.regime(), Regime::Proportional { .. }) {
        return Err(Error::Unsupported(format!(
            "proportional-consumption closed form does not apply to {} consumption",
            problem.consumption().name()
        )));
    }
    let (d, l) = problem
        .single_step()
        .ok_or_else(|| Error::Unsupported("closed form requires single-step poverty".into()))?;
    let der = problem.derived();
    let b = problem.income_floor().expect("proportional regime");
    let q = l / problem.market().lambda;
    Ok(HFunction {
        g1: der.gamma1.expect("proportional regime"),
        g2: der.gamma2.expect("proportional regime"),
        pa: problem.ruin_level() - b,
        pd: d - b,
        q,
        excess: (problem.ruin_penalty() - q).max(0.0),
    })
}

/// Solves `h(z) = 0` on `(0, 1)`, bracketing from the analytic lower bound.
pub fn solve_h_root(problem: &ValidatedProblem) -> Result<BracketedRoot> {
    let h = h_function(problem)?;
    let mut lo = h.lower_bound();
    if !(h.eval(lo).0 < 0.0) {
        lo = f64::MIN_POSITIVE;
    }
    safeguarded_newton(|z| h.eval(z), lo, 1.0, 1e-14)
}

pub fn assemble(problem: &ValidatedProblem) -> Result<ProportionalSolution> {
    let h = h_function(problem)?;
    let root = solve_h_root(problem)?;
    let (g1, g2, pa, pd, q, re) = (h.g1, h.g2, h.pa, h.pd, h.q, h.excess);
    let gg = g1 - g2;
    let zda = root.root;
    let (d, _) = problem.single_step().expect("checked above");

    let z_a = g1 / (1.0 - g1) * (q * zda.powf(-g2) + re) / pa;
    let big5 = ((1.0 - g2) * pa * z_a - g2 * re) / gg;
    let big6 = (-(1.0 - g1) * pa * z_a + g1 * re) / gg;
    // Fit at z_d: M(z_d+) = M(z_d-) and M_z(z_d) = d.
    let big5_alt = pd * z_a * zda.powf(1.0 - g1) / g1 + g2 / gg * q * zda.powf(-g1);
    let big6_alt = -g1 / gg * q * zda.powf(-g2);
    let scale = big5.abs().max(big6.abs()).max(pa * z_a).max(re);
    check("k5", big5, big5_alt, scale)?;
    check("k6", big6, big6_alt, scale)?;
    // k5 from the fit at a has same-signed terms, k6 from the fit at d is a
    // single product; the other forms can cancel badly.
    let big6 = big6_alt;

    let dual = DualFunction {
        e1: g1,
        e2: g2,
        offset: problem.income_floor().expect("proportional regime"),
        q,
        a: problem.ruin_level(),
        d,
        rho: problem.ruin_penalty(),
        y_a: z_a,
        y_da: zda,
        big1: big5,
        big2: big6,
        w_max: f64::INFINITY,
    };
    for z in [z_a, dual.y_d()] {
        let p = dual.eval(z)?;
        if !(p.l_yy < 0.0) {
            return Err(Error::PropertyViolation(format!(
                "dual function is not concave at z = {z} (M_zz = {})",
                p.l_yy
            )));
        }
    }
    Ok(ProportionalSolution { problem: problem.clone(), h, root, dual })
}

fn check(what: &'static str, x: f64, alt: f64, scale: f64) -> Result<()> {
    let gap = (x - alt).abs() / scale.max(f64::MIN_POSITIVE);
    if gap > CONSISTENCY_TOL || !gap.is_finite() {
        return Err(Error::Consistency { what, gap });
    }
    Ok(())
}

/// `rho` times the minimum ruin probability:
/// `rho ((w - B) / (a - B))^(-gamma1 / (1 - gamma1))`.
pub fn ruin_value(problem: &ValidatedProblem, w: f64) -> Result<f64> {
    let Some(b) = problem.income_floor() else {
        return Err(Error::Unsupported("ruin_value needs proportional consumption".into()));
    };
    let a = problem.ruin_level();
    if !(w >= a) {
        return Err(Error::Domain { w, lo: a, hi: f64::INFINITY });
    }
    let g1 = problem.derived().gamma1.expect("proportional regime");
    Ok(problem.ruin_penalty() * ((w - b) / (a - b)).powf(-g1 / (1.0 - g1)))
}

/// Ruin-probability strategy `((mu - r) / sigma^2)(1 - gamma1)(w - B)`.
pub fn pi_zero(problem: &ValidatedProblem, w: f64) -> f64 {
    problem.pi_zero(w)
}

impl ProportionalSolution {
    pub fn problem(&self) -> &ValidatedProblem {
        &self.problem
    }

    pub fn h(&self) -> &HFunction {
        &self.h
    }

    pub fn root(&self) -> &BracketedRoot {
        &self.root
    }

    pub fn z_da(&self) -> f64 {
        self.root.root
    }

    pub fn z_a(&self) -> f64 {
        self.dual.y_a
    }

    pub fn z_d(&self) -> f64 {
        self.dual.y_d()
    }

    pub fn poverty_level(&self) -> f64 {
        self.dual.d
    }

    /// `B = A / (kappa - r)`.
    pub fn income_floor(&self) -> f64 {
        self.dual.offset
    }

    /// Unscaled dual coefficients `(k4, k5, k6)`; see
    /// [`ConstantSolution::k`](crate::constant::ConstantSolution::k).
    pub fn k(&self) -> (f64, f64, f64) {
        let (g1, g2) = (self.dual.e1, self.dual.e2);
        let k4 = self.h.pd / g1 * self.z_d().powf(1.0 - g1);
        let za = self.z_a();
        (k4, self.dual.big1 * za.powf(-g1), self.dual.big2 * za.powf(-g2))
    }

    pub fn coefficients(&self) -> ProportionalCoefficients {
        let (k4, k5, k6) = self.k();
        ProportionalCoefficients {
            z_da: self.z_da(),
            z_a: self.z_a(),
            z_d: self.z_d(),
            k4,
            k5,
            k6,
            gamma1: self.dual.e1,
            gamma2: self.dual.e2,
        }
    }

    /// The dual function `M` at `z` in `[0, z_a]`.
    pub fn dual(&self, z: f64) -> Result<DualPoint> {
        self.dual.eval(z)
    }

    /// `z(w)`, the solution of `M_z(z) = w`, for `w >= a`.
    pub fn invert_dual(&self, w: f64) -> Result<f64> {
        self.dual.invert(w)
    }

    pub fn value(&self, w: f64) -> Result<f64> {
        self.dual.value(w)
    }

    pub fn value_point(&self, w: f64, side: Side) -> Result<ValuePoint> {
        self.dual.value_point(w, side)
    }

    fn check_policy_domain(&self, w: f64) -> Result<()> {
        if w > self.dual.a && w < f64::INFINITY {
            Ok(())
        } else {
            Err(Error::Domain { w, lo: self.dual.a, hi: f64::INFINITY })
        }
    }

    /// Optimal amount in the risky asset for `w > a`, with the `d+` limit at
    /// the poverty level.
    pub fn pi_star(&self, w: f64) -> Result<f64> {
        self.pi_star_sided(w, Side::Above)
    }

    pub fn pi_star_sided(&self, w: f64, side: Side) -> Result<f64> {
        self.check_policy_domain(w)?;
        let k = self.problem.market().premium_over_variance();
        Ok(k * self.dual.policy_factor(w, side))
    }

    pub fn pi_star_slope(&self, w: f64, side: Side) -> Result<f64> {
        self.check_policy_domain(w)?;
        let k = self.problem.market().premium_over_variance();
        Ok(k * self.dual.policy_factor_slope(w, side))
    }

    pub fn pi_star_at_ruin(&self) -> f64 {
        self.problem.market().premium_over_variance() * self.dual.policy_factor_at_ruin()
    }

    /// The optimal policy increases on `(a, d)` and on `(d, inf)`. This
    /// confirms it with centred finite differences of `pi*` on 1000 points
    /// per interval and reports the smallest slope seen.
    pub fn classify_pi_monotonicity(&self) -> Result<IncreasingBothIntervals> {
        let (a, d) = (self.dual.a, self.dual.d);
        let scan = |lo: f64, hi: f64, log: bool| -> Result<f64> {
            let mut min = f64::INFINITY;
            for i in 0..SLOPE_SAMPLES {
                let f = (i as f64 + 0.5) / SLOPE_SAMPLES as f64;
                let w = if log { lo * (hi / lo).powf(f) } else { lo + (hi - lo) * f };
                let h = 1e-4 * (hi - lo) / SLOPE_SAMPLES as f64;
                let h = h.min(0.25 * (w - lo)).min(0.25 * (hi - w));
                let slope = (self.pi_star(w + h)? - self.pi_star(w - h)?) / (2.0 * h);
                min = min.min(slope);
            }
            Ok(min)
        };
        let below = scan(a, d, false)?;
        let above = scan(d, 100.0 * d, d > 0.0)?;
        let tol = 1e-8 * (1.0 + self.problem.market().premium_over_variance());
        for (where_, slope) in [("(a, d)", below), ("(d, 100 d)", above)] {
            if slope < -tol {
                return Err(Error::PropertyViolation(format!(
                    "pi* decreases on {where_}: slope {slope:e}"
                )));
            }
        }
        Ok(IncreasingBothIntervals { min_slope_below: below, min_slope_above: above })
    }
}
