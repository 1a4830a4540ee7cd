//! Market parameters, consumption and poverty functions, and the feasibility
//! gate every solver goes through.
//!
//! All rates are per year and wealth is a plain number; nothing here carries
//! currency semantics.
//!
//! A [`ProblemSpec`] is the raw, serializable description of a problem (this
//! is the JSON document read by the command-line tool). [`validate`] turns it
//! into a [`ValidatedProblem`], the only type the solvers accept, or returns
//! the complete list of violated constraints.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numeric::quadratic_roots;

/// Smallest running poverty cost accepted outside ruin-probability mode.
pub const MIN_POVERTY_COST: f64 = 1e-12;

/// Relative slack used when comparing the ruin penalty against `l / lambda`,
/// so that the boundary case `rho = l / lambda` survives rounding.
const SUICIDE_SLACK: f64 = 1e-12;

/// Black-Scholes market plus mortality and income.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Riskless rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Hazard rate of the exponential lifetime.
    pub lambda: f64,
    /// Income rate.
    #[serde(rename = "A")]
    pub income: f64,
}

impl MarketParams {
    /// `m = (1/2) ((mu - r) / sigma)^2`.
    pub fn sharpe_constant(&self) -> f64 {
        let s = (self.mu - self.r) / self.sigma;
        0.5 * s * s
    }

    /// `(mu - r) / sigma^2`, the factor in front of every feedback formula.
    pub fn premium_over_variance(&self) -> f64 {
        (self.mu - self.r) / (self.sigma * self.sigma)
    }
}

/// Consumption rate as a function of wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConsumptionSpec {
    /// `c(w) = c`.
    Constant { c: f64 },
    /// `c(w) = kappa * w`.
    Proportional { kappa: f64 },
    /// Continuous, non-decreasing, linear between `[w, c]` knots and flat
    /// outside them. Only the finite-difference solver accepts it.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

impl ConsumptionSpec {
    pub fn rate(&self, w: f64) -> f64 {
        match self {
            ConsumptionSpec::Constant { c } => *c,
            ConsumptionSpec::Proportional { kappa } => kappa * w,
            ConsumptionSpec::PiecewiseLinear { knots } => piecewise_linear(knots, w),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConsumptionSpec::Constant { .. } => "constant",
            ConsumptionSpec::Proportional { .. } => "proportional",
            ConsumptionSpec::PiecewiseLinear { .. } => "piecewise_linear",
        }
    }
}

fn piecewise_linear(knots: &[[f64; 2]], w: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if w <= first[0] {
        return first[1];
    }
    if w >= last[0] {
        return last[1];
    }
    let j = knots.partition_point(|k| k[0] <= w);
    let [w0, c0] = knots[j - 1];
    let [w1, c1] = knots[j];
    c0 + (c1 - c0) * (w - w0) / (w1 - w0)
}

/// One step of a staircase poverty function: `increment` is charged while
/// wealth is at or below `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovertyStep {
    pub level: f64,
    pub increment: f64,
}

/// `l(w) = base + sum_i increment_i * 1{w <= level_i}` for wealth above the
/// ruin level. Non-negative and non-increasing by construction once
/// validated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StaircasePoverty {
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub steps: Vec<PovertyStep>,
}

impl StaircasePoverty {
    /// Single step of height `l` up to `d`.
    pub fn single(d: f64, l: f64) -> Self {
        StaircasePoverty { base: 0.0, steps: vec![PovertyStep { level: d, increment: l }] }
    }

    /// The zero function (ruin-probability mode).
    pub fn zero() -> Self {
        StaircasePoverty::default()
    }

    /// Left-continuous value: steps are charged up to and including their level.
    pub fn value(&self, w: f64) -> f64 {
        self.base + self.steps.iter().filter(|s| w <= s.level).map(|s| s.increment).sum::<f64>()
    }

    /// Right limit `l(w+)`.
    pub fn value_right(&self, w: f64) -> f64 {
        self.base + self.steps.iter().filter(|s| w < s.level).map(|s| s.increment).sum::<f64>()
    }

    /// `l(a+)`, the largest value the function takes.
    pub fn peak(&self) -> f64 {
        self.base + self.steps.iter().map(|s| s.increment).sum::<f64>()
    }

    /// Levels where the function jumps, increasing.
    pub fn levels(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.level).collect()
    }

    fn as_single_step(&self) -> Option<(f64, f64)> {
        match self.steps.as_slice() {
            [s] if self.base == 0.0 => Some((s.level, s.increment)),
            _ => None,
        }
    }
}

/// Poverty function and ruin data as they appear in a problem file. Exactly
/// one shape must be given: the single step `d`/`l`, a `staircase`, or
/// `ruin_probability_mode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovertySpec {
    /// Ruin level.
    pub a: f64,
    /// Poverty level of the single step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Running poverty cost of the single step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// Ruin penalty.
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staircase: Option<StaircasePoverty>,
    /// Drop the running cost entirely: the value function becomes `rho`
    /// times the minimum probability of lifetime ruin.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ruin_probability_mode: bool,
}

impl PovertySpec {
    pub fn step(a: f64, d: f64, l: f64, rho: f64) -> Self {
        PovertySpec { a, d: Some(d), l: Some(l), rho, staircase: None, ruin_probability_mode: false }
    }
}

/// Raw problem description; see [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub market: MarketParams,
    pub consumption: ConsumptionSpec,
    pub poverty: PovertySpec,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem specs always serialize")
    }
}

/// One violated feasibility constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityError {
    NonFinite(&'static str),
    NonPositiveRate(&'static str),
    NegativeIncome,
    NoRiskPremium { mu: f64, r: f64 },
    ConsumptionNotAboveIncome { c: f64, income: f64 },
    ConsumptionRateNotAboveRiskless { kappa: f64, r: f64 },
    BadConsumptionKnots(String),
    NoSafeLevel,
    PovertyShape(String),
    PovertyLevelNotAboveRuin { d: f64, a: f64 },
    PovertyCostTooSmall { l: f64 },
    BadStaircase(String),
    FinancialSuicide { rho: f64, threshold: f64 },
    NonPositivePenalty { rho: f64 },
    PovertyLevelAboveSafeLevel { d: f64, safe: f64 },
    RuinLevelAboveSafeLevel { a: f64, safe: f64 },
    RuinLevelBelowIncomeFloor { a: f64, floor: f64 },
    PovertyOnUnboundedDomain,
}

impl fmt::Display for FeasibilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FeasibilityError::*;
        match self {
            NonFinite(what) => write!(f, "{what} is not a finite number"),
            NonPositiveRate(what) => write!(f, "{what} must be positive"),
            NegativeIncome => write!(f, "income rate A must be non-negative"),
            NoRiskPremium { mu, r } => write!(f, "no risk premium: mu = {mu} <= r = {r}"),
            ConsumptionNotAboveIncome { c, income } => {
                write!(f, "consumption c = {c} must exceed income A = {income}")
            }
            ConsumptionRateNotAboveRiskless { kappa, r } => {
                write!(f, "consumption rate kappa = {kappa} must exceed r = {r}")
            }
            BadConsumptionKnots(msg) => write!(f, "piecewise-linear consumption: {msg}"),
            NoSafeLevel => write!(f, "consumption has no unique safe level above the ruin level"),
            PovertyShape(msg) => write!(f, "poverty function: {msg}"),
            PovertyLevelNotAboveRuin { d, a } => {
                write!(f, "poverty level d = {d} must exceed ruin level a = {a}")
            }
            PovertyCostTooSmall { l } => write!(
                f,
                "running poverty cost {l} is below {MIN_POVERTY_COST:e}; use ruin_probability_mode instead"
            ),
            BadStaircase(msg) => write!(f, "staircase poverty: {msg}"),
            FinancialSuicide { rho, threshold } => write!(
                f,
                "financial suicide: ruin penalty rho = {rho} is below l(a+)/lambda = {threshold}"
            ),
            NonPositivePenalty { rho } => write!(f, "ruin penalty rho = {rho} must be positive"),
            PovertyLevelAboveSafeLevel { d, safe } => {
                write!(f, "poverty level above safe level: d = {d} >= w_s = {safe}")
            }
            RuinLevelAboveSafeLevel { a, safe } => {
                write!(f, "ruin level a = {a} must lie below the safe level w_s = {safe}")
            }
            RuinLevelBelowIncomeFloor { a, floor } => {
                write!(f, "ruin level a = {a} must exceed A/(kappa - r) = {floor}")
            }
            PovertyOnUnboundedDomain => write!(
                f,
                "a positive staircase base never vanishes when the safe level is infinite"
            ),
        }
    }
}

/// Exponents of the power solutions of the dual equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub m: f64,
    /// Roots of `m b^2 - (r - lambda + m) b - lambda = 0`; `beta1 > 1`, `beta2 < 0`.
    pub beta1: f64,
    pub beta2: f64,
    /// Roots of `m g^2 - (r - kappa - lambda + m) g - lambda = 0`, present
    /// for proportional consumption; `0 < gamma1 < 1`, `gamma2 < 0`.
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

/// Computes `m` and the exponent pairs. Assumes a validated market.
pub fn exponents(market: &MarketParams, consumption: &ConsumptionSpec) -> DerivedConstants {
    let m = market.sharpe_constant();
    let (beta1, beta2) = quadratic_roots(m, -(market.r - market.lambda + m), -market.lambda);
    let (gamma1, gamma2) = match consumption {
        ConsumptionSpec::Proportional { kappa } => {
            let (g1, g2) =
                quadratic_roots(m, -(market.r - kappa - market.lambda + m), -market.lambda);
            (Some(g1), Some(g2))
        }
        _ => (None, None),
    };
    DerivedConstants { m, beta1, beta2, gamma1, gamma2 }
}

/// Consumption regime after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    Constant { c: f64 },
    Proportional { kappa: f64 },
    PiecewiseLinear,
}

/// A problem that passed [`validate`]. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    spec: ProblemSpec,
    poverty: StaircasePoverty,
    derived: DerivedConstants,
    safe_level: f64,
}

impl ValidatedProblem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn market(&self) -> &MarketParams {
        &self.spec.market
    }

    pub fn consumption(&self) -> &ConsumptionSpec {
        &self.spec.consumption
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn regime(&self) -> Regime {
        match self.spec.consumption {
            ConsumptionSpec::Constant { c } => Regime::Constant { c },
            ConsumptionSpec::Proportional { kappa } => Regime::Proportional { kappa },
            ConsumptionSpec::PiecewiseLinear { .. } => Regime::PiecewiseLinear,
        }
    }

    /// Ruin level `a`.
    pub fn ruin_level(&self) -> f64 {
        self.spec.poverty.a
    }

    /// Ruin penalty `rho`.
    pub fn ruin_penalty(&self) -> f64 {
        self.spec.poverty.rho
    }

    /// The poverty function in staircase form (a single step for the
    /// closed-form problems, empty in ruin-probability mode).
    pub fn poverty(&self) -> &StaircasePoverty {
        &self.poverty
    }

    /// `(d, l)` when the poverty function is a single step.
    pub fn single_step(&self) -> Option<(f64, f64)> {
        self.poverty.as_single_step()
    }

    pub fn is_ruin_probability_mode(&self) -> bool {
        self.spec.poverty.ruin_probability_mode
    }

    /// `l(w)`, zero above the safe level.
    pub fn poverty_cost(&self, w: f64) -> f64 {
        if w > self.safe_level {
            0.0
        } else {
            self.poverty.value(w)
        }
    }

    /// Net savings drift without investment, `r w - c(w) + A`.
    pub fn riskless_drift(&self, w: f64) -> f64 {
        let m = &self.spec.market;
        m.r * w - self.spec.consumption.rate(w) + m.income
    }

    /// Safe level `w_s`; `+inf` for proportional consumption.
    pub fn safe_level(&self) -> f64 {
        self.safe_level
    }

    /// `A / (kappa - r)` for proportional consumption, the wealth at which
    /// the riskless drift vanishes.
    pub fn income_floor(&self) -> Option<f64> {
        match self.spec.consumption {
            ConsumptionSpec::Proportional { kappa } => {
                Some(self.spec.market.income / (kappa - self.spec.market.r))
            }
            _ => None,
        }
    }

    /// Ruin-probability strategy: the optimal amount in the risky asset when
    /// the running cost is zero. Linear in wealth in both closed-form
    /// regimes; for piecewise-linear consumption the constant-consumption
    /// formula with the same safe level is used as an approximation.
    pub fn pi_zero(&self, w: f64) -> f64 {
        let k = self.spec.market.premium_over_variance();
        match self.spec.consumption {
            ConsumptionSpec::Proportional { .. } => {
                let g1 = self.derived.gamma1.expect("proportional regime carries gamma1");
                k * (1.0 - g1) * (w - self.income_floor().unwrap_or(0.0))
            }
            _ => k * (self.derived.beta1 - 1.0) * (self.safe_level - w),
        }
    }

    /// Returns a copy with the market replaced and revalidated.
    pub fn with_spec(&self, spec: ProblemSpec) -> Result<ValidatedProblem, Vec<FeasibilityError>> {
        validate(&spec)
    }
}

/// Safe level of a validated problem.
pub fn safe_level(problem: &ValidatedProblem) -> f64 {
    problem.safe_level()
}

/// Checks every feasibility constraint and returns the validated problem,
/// or all violations at once.
pub fn validate(spec: &ProblemSpec) -> Result<ValidatedProblem, Vec<FeasibilityError>> {
    use FeasibilityError::*;
    let mut errors = Vec::new();
    let mk = &spec.market;
    let pv = &spec.poverty;

    for (name, v) in [
        ("r", mk.r),
        ("mu", mk.mu),
        ("sigma", mk.sigma),
        ("lambda", mk.lambda),
        ("A", mk.income),
        ("a", pv.a),
        ("rho", pv.rho),
    ] {
        if !v.is_finite() {
            errors.push(NonFinite(name));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    if mk.r <= 0.0 {
        errors.push(NonPositiveRate("riskless rate r"));
    }
    if mk.sigma <= 0.0 {
        errors.push(NonPositiveRate("volatility sigma"));
    }
    if mk.lambda <= 0.0 {
        errors.push(NonPositiveRate("hazard rate lambda"));
    }
    if mk.income < 0.0 {
        errors.push(NegativeIncome);
    }
    if mk.mu <= mk.r {
        errors.push(NoRiskPremium { mu: mk.mu, r: mk.r });
    }
    if pv.rho <= 0.0 {
        errors.push(NonPositivePenalty { rho: pv.rho });
    }

    // Safe level, consumption-specific constraints.
    let safe = match &spec.consumption {
        ConsumptionSpec::Constant { c } => {
            if !c.is_finite() {
                errors.push(NonFinite("c"));
                None
            } else {
                if *c <= mk.income {
                    errors.push(ConsumptionNotAboveIncome { c: *c, income: mk.income });
                }
                (mk.r > 0.0).then(|| (c - mk.income) / mk.r)
            }
        }
        ConsumptionSpec::Proportional { kappa } => {
            if !kappa.is_finite() {
                errors.push(NonFinite("kappa"));
                None
            } else {
                if *kappa <= mk.r {
                    errors.push(ConsumptionRateNotAboveRiskless { kappa: *kappa, r: mk.r });
                } else {
                    let floor = mk.income / (kappa - mk.r);
                    if pv.a <= floor {
                        errors.push(RuinLevelBelowIncomeFloor { a: pv.a, floor });
                    }
                }
                Some(f64::INFINITY)
            }
        }
        ConsumptionSpec::PiecewiseLinear { knots } => match check_knots(knots) {
            Err(msg) => {
                errors.push(BadConsumptionKnots(msg));
                None
            }
            Ok(()) if mk.r > 0.0 => match piecewise_safe_level(knots, mk.r, mk.income, pv.a) {
                Some(s) => Some(s),
                None => {
                    errors.push(NoSafeLevel);
                    None
                }
            },
            Ok(()) => None,
        },
    };
    if let Some(s) = safe {
        if s.is_finite() && pv.a >= s {
            errors.push(RuinLevelAboveSafeLevel { a: pv.a, safe: s });
        }
    }

    // Poverty function.
    let shapes = [
        pv.d.is_some() || pv.l.is_some(),
        pv.staircase.is_some(),
        pv.ruin_probability_mode,
    ];
    let mut poverty = StaircasePoverty::zero();
    match shapes {
        [true, false, false] => match (pv.d, pv.l) {
            (Some(d), Some(l)) if d.is_finite() && l.is_finite() => {
                if d <= pv.a {
                    errors.push(PovertyLevelNotAboveRuin { d, a: pv.a });
                }
                if l < MIN_POVERTY_COST {
                    errors.push(PovertyCostTooSmall { l });
                }
                poverty = StaircasePoverty::single(d, l);
            }
            (Some(_), Some(_)) => errors.push(NonFinite("d or l")),
            _ => errors.push(PovertyShape("single step needs both d and l".into())),
        },
        [false, true, false] => {
            let st = pv.staircase.clone().unwrap_or_default();
            if let Err(msg) = check_staircase(&st, pv.a) {
                errors.push(BadStaircase(msg));
            } else if st.peak() < MIN_POVERTY_COST {
                errors.push(PovertyCostTooSmall { l: st.peak() });
            }
            if st.base > 0.0 && safe == Some(f64::INFINITY) {
                errors.push(PovertyOnUnboundedDomain);
            }
            poverty = st;
        }
        [false, false, true] => {}
        [true, _, true] if pv.l.unwrap_or(0.0) == 0.0 && pv.staircase.is_none() => {}
        _ => errors.push(PovertyShape(
            "give exactly one of d/l, staircase, or ruin_probability_mode".into(),
        )),
    }

    let peak = poverty.peak();
    if mk.lambda > 0.0 && peak > 0.0 {
        let threshold = peak / mk.lambda;
        if pv.rho < threshold * (1.0 - SUICIDE_SLACK) {
            errors.push(FinancialSuicide { rho: pv.rho, threshold });
        }
    }
    if let Some(s) = safe {
        if let Some(top) = poverty.levels().into_iter().reduce(f64::max) {
            if top >= s {
                errors.push(PovertyLevelAboveSafeLevel { d: top, safe: s });
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let derived = exponents(mk, &spec.consumption);
    Ok(ValidatedProblem {
        spec: spec.clone(),
        poverty,
        derived,
        safe_level: safe.expect("safe level is known when validation passes"),
    })
}

fn check_knots(knots: &[[f64; 2]]) -> Result<(), String> {
    if knots.is_empty() {
        return Err("at least one knot is required".into());
    }
    if knots.iter().flatten().any(|v| !v.is_finite()) {
        return Err("knots must be finite".into());
    }
    if knots.iter().any(|k| k[1] < 0.0) {
        return Err("consumption must be non-negative".into());
    }
    for pair in knots.windows(2) {
        if pair[1][0] <= pair[0][0] {
            return Err("knot wealth levels must be strictly increasing".into());
        }
        if pair[1][1] < pair[0][1] {
            return Err("consumption must be non-decreasing".into());
        }
    }
    Ok(())
}

/// The unique sign change of `r w - c(w) + A` above `a`, if there is one.
/// The function is piecewise linear, so checking the knots and the flat
/// tails is exhaustive.
fn piecewise_safe_level(knots: &[[f64; 2]], r: f64, income: f64, a: f64) -> Option<f64> {
    let f = |w: f64| r * w - piecewise_linear(knots, w) + income;
    let mut pts: Vec<f64> = knots.iter().map(|k| k[0]).filter(|&w| w > a).collect();
    pts.insert(0, a);
    // Past the last knot c is flat and r > 0, so f eventually turns positive.
    let last = pts[pts.len() - 1];
    let tail = (piecewise_linear(knots, last) - income) / r;
    pts.push(last.max(tail) + 1.0);
    let vals: Vec<f64> = pts.iter().map(|&w| f(w)).collect();
    if vals[0] >= 0.0 {
        return None;
    }
    let mut crossing = None;
    for j in 1..pts.len() {
        let (f0, f1) = (vals[j - 1], vals[j]);
        if f0 < 0.0 && f1 >= 0.0 {
            if crossing.is_some() {
                return None;
            }
            crossing = Some(pts[j - 1] + (pts[j] - pts[j - 1]) * (-f0) / (f1 - f0));
        } else if f0 >= 0.0 && f1 < 0.0 {
            return None;
        }
    }
    crossing
}

fn check_staircase(st: &StaircasePoverty, a: f64) -> Result<(), String> {
    if !st.base.is_finite() || st.base < 0.0 {
        return Err("base must be finite and non-negative".into());
    }
    let mut prev = a;
    for s in &st.steps {
        if !s.level.is_finite() || !s.increment.is_finite() {
            return Err("steps must be finite".into());
        }
        if s.level <= prev {
            return Err("step levels must be strictly increasing and above the ruin level".into());
        }
        if s.increment <= 0.0 {
            return Err("step increments must be positive".into());
        }
        prev = s.level;
    }
    Ok(())
}
