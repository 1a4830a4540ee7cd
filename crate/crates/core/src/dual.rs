//! The two-piece dual function shared by both closed-form regimes.
//!
//! Writing `y` for the dual variable (`-V_w`), the dual of the value function
//! is, with `s = y / y_a` and `t = y / y_d`,
//!
//! ```text
//! upper piece, y in [y_d, y_a]:  K1 s^e1 + K2 s^e2 + o y + q
//! lower piece, y in [0, y_d):    (d - o) y_d t^e1 / e1 + o y
//! ```
//!
//! where `o` is the wealth at which the riskless drift vanishes (the safe
//! level for constant consumption, `A / (kappa - r)` for proportional
//! consumption), `q = l / lambda`, and `(e1, e2)` is the relevant exponent
//! pair. The coefficients `K1`, `K2` are the published dual coefficients
//! scaled by `y_a^e1` and `y_a^e2`; keeping them scaled means no power of a
//! possibly huge or tiny `y_a` is ever formed.
//!
//! Wealth maps to the dual variable through `L_y(y) = w`. The map is
//! strictly decreasing, `y(a) = y_a` and `y(d) = y_d`.

use crate::error::{Error, Result};
use crate::numeric::safeguarded_newton;

/// Which one-sided limit to use at the poverty level, where the second
/// derivative of the value function (and hence the optimal policy) jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    /// Limit from below, `w -> d-`.
    Below,
    /// Limit from above, `w -> d+`. The default.
    #[default]
    Above,
}

/// Dual function value and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub l: f64,
    pub l_y: f64,
    pub l_yy: f64,
    pub l_yyy: f64,
}

/// Value function and its first two derivatives at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuePoint {
    pub v: f64,
    pub v_w: f64,
    pub v_ww: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualFunction {
    pub(crate) e1: f64,
    pub(crate) e2: f64,
    pub(crate) offset: f64,
    pub(crate) q: f64,
    pub(crate) a: f64,
    pub(crate) d: f64,
    pub(crate) rho: f64,
    pub(crate) y_a: f64,
    pub(crate) y_da: f64,
    pub(crate) big1: f64,
    pub(crate) big2: f64,
    /// Largest admissible wealth (the safe level, or infinity).
    pub(crate) w_max: f64,
}

impl DualFunction {
    pub fn y_d(&self) -> f64 {
        self.y_a * self.y_da
    }

    /// The dual function on the upper piece as a function of `s = y / y_a`.
    fn upper(&self, s: f64) -> DualPoint {
        let (e1, e2, ya) = (self.e1, self.e2, self.y_a);
        // p_i = K_i s^e_i; each derivative in y costs one factor (e - k) / y.
        let p1 = self.big1 * s.powf(e1);
        let p2 = self.big2 * s.powf(e2);
        let y = s * ya;
        DualPoint {
            l: p1 + p2 + self.offset * y + self.q,
            l_y: (e1 * p1 + e2 * p2) / y + self.offset,
            l_yy: (e1 * (e1 - 1.0) * p1 + e2 * (e2 - 1.0) * p2) / (y * y),
            l_yyy: (e1 * (e1 - 1.0) * (e1 - 2.0) * p1 + e2 * (e2 - 1.0) * (e2 - 2.0) * p2)
                / (y * y * y),
        }
    }

    /// The dual function on the lower piece as a function of `t = y / y_d`.
    fn lower(&self, t: f64) -> DualPoint {
        let (e1, yd) = (self.e1, self.y_d());
        let c = self.d - self.offset;
        DualPoint {
            l: c * yd * t.powf(e1) / e1 + self.offset * t * yd,
            l_y: c * t.powf(e1 - 1.0) + self.offset,
            l_yy: c * (e1 - 1.0) * t.powf(e1 - 2.0) / yd,
            l_yyy: c * (e1 - 1.0) * (e1 - 2.0) * t.powf(e1 - 3.0) / (yd * yd),
        }
    }

    /// Evaluates the dual function at `y` in `[0, y_a]`. At `y_d` the upper
    /// piece is used (its second derivative is the `d-` limit).
    pub fn eval(&self, y: f64) -> Result<DualPoint> {
        if !(0.0..=self.y_a).contains(&y) {
            return Err(Error::Domain { w: y, lo: 0.0, hi: self.y_a });
        }
        let yd = self.y_d();
        Ok(if y >= yd { self.upper(y / self.y_a) } else { self.lower(y / yd) })
    }

    fn check_wealth(&self, w: f64) -> Result<()> {
        if w >= self.a && w <= self.w_max {
            Ok(())
        } else {
            Err(Error::Domain { w, lo: self.a, hi: self.w_max })
        }
    }

    /// Solves `L_y(y) = w` for `w` in `[a, d]`, returning `s = y / y_a` in
    /// `[y_da, 1]`.
    fn invert_upper(&self, w: f64) -> f64 {
        if w <= self.a {
            return 1.0;
        }
        if w >= self.d {
            return self.y_da;
        }
        let f = |s: f64| {
            let p = self.upper(s);
            (p.l_y - w, p.l_yy * self.y_a)
        };
        // L_y is decreasing in s, so f(y_da) > 0 > f(1) up to rounding at
        // the ends; clamp to the nearer endpoint when rounding wins.
        let root = match safeguarded_newton(f, self.y_da, 1.0, 1e-14) {
            Ok(r) => r.root,
            Err(_) => {
                if (self.upper(self.y_da).l_y - w).abs() < (self.upper(1.0).l_y - w).abs() {
                    return self.y_da;
                }
                return 1.0;
            }
        };
        let (fx, dfx) = f(root);
        let polished = root - fx / dfx;
        if polished.is_finite() && (self.y_da..=1.0).contains(&polished) {
            let (fp, _) = f(polished);
            if fp.abs() <= fx.abs() {
                return polished;
            }
        }
        root
    }

    /// The dual variable `y(w) = -V_w(w)` for `w` in `[a, w_max]`.
    pub fn invert(&self, w: f64) -> Result<f64> {
        self.check_wealth(w)?;
        Ok(if w <= self.d {
            self.y_a * self.invert_upper(w)
        } else {
            self.y_d() * self.lower_t(w)
        })
    }

    /// `t = y / y_d` above the poverty level, in closed form.
    fn lower_t(&self, w: f64) -> f64 {
        ((w - self.offset) / (self.d - self.offset)).powf(1.0 / (self.e1 - 1.0))
    }

    fn dual_at(&self, w: f64, side: Side) -> (f64, DualPoint) {
        let below = w < self.d || (w == self.d && side == Side::Below);
        if below {
            let s = self.invert_upper(w);
            (s * self.y_a, self.upper(s))
        } else {
            let t = self.lower_t(w);
            (t * self.y_d(), self.lower(t))
        }
    }

    /// `V(w)`. The two branches agree at `d`; the branch above `d` is used
    /// there.
    pub fn value(&self, w: f64) -> Result<f64> {
        self.check_wealth(w)?;
        if w == self.a {
            return Ok(self.rho);
        }
        if w == self.w_max {
            return Ok(0.0);
        }
        Ok(if w < self.d { self.value_below(w) } else { self.value_above(w) })
    }

    pub(crate) fn value_below(&self, w: f64) -> f64 {
        let s = self.invert_upper(w);
        let (e1, e2) = (self.e1, self.e2);
        self.big1 * (1.0 - e1) * s.powf(e1) + self.big2 * (1.0 - e2) * s.powf(e2) + self.q
    }

    pub(crate) fn value_above(&self, w: f64) -> f64 {
        let t = self.lower_t(w);
        let c = self.d - self.offset;
        c * self.y_d() * t.powf(self.e1) * (1.0 - self.e1) / self.e1
    }

    /// `V`, `V_w = -y` and `V_ww = -1 / L_yy(y)`.
    pub fn value_point(&self, w: f64, side: Side) -> Result<ValuePoint> {
        self.check_wealth(w)?;
        let (y, p) = self.dual_at(w, side);
        let v = if w == self.a {
            self.rho
        } else if w < self.d || (w == self.d && side == Side::Below) {
            self.value_below(w)
        } else {
            self.value_above(w)
        };
        Ok(ValuePoint { v, v_w: -y, v_ww: -1.0 / p.l_yy })
    }

    /// `-y L_yy(y)`, the optimal policy divided by `(mu - r) / sigma^2`.
    pub(crate) fn policy_factor(&self, w: f64, side: Side) -> f64 {
        if self.is_above(w, side) {
            // -y L_yy collapses to a linear function of wealth on the lower piece.
            return -(self.e1 - 1.0) * (w - self.offset);
        }
        let (y, p) = self.dual_at(w, side);
        -y * p.l_yy
    }

    fn is_above(&self, w: f64, side: Side) -> bool {
        w > self.d || (w == self.d && side == Side::Above)
    }

    /// Derivative in `w` of [`policy_factor`](Self::policy_factor):
    /// `-(1 + y L_yyy / L_yy)`.
    pub(crate) fn policy_factor_slope(&self, w: f64, side: Side) -> f64 {
        if self.is_above(w, side) {
            return -(self.e1 - 1.0);
        }
        let (y, p) = self.dual_at(w, side);
        -(1.0 + y * p.l_yyy / p.l_yy)
    }

    /// The limit of the policy factor at `a+`.
    pub(crate) fn policy_factor_at_ruin(&self) -> f64 {
        let p = self.upper(1.0);
        -self.y_a * p.l_yy
    }

    /// Maps a point of the upper piece to wealth.
    pub(crate) fn wealth_at_s(&self, s: f64) -> f64 {
        self.upper(s).l_y
    }
}
