//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use lifetime_poverty::model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn market() -> MarketParams {
    MarketParams { r: 0.02, mu: 0.06, sigma: 0.2, lambda: 0.04, income: 0.0 }
}

pub fn constant_spec(l: f64, rho: f64) -> ProblemSpec {
    ProblemSpec {
        market: market(),
        consumption: ConsumptionSpec::Constant { c: 1.0 },
        poverty: PovertySpec::step(0.0, 30.0, l, rho),
    }
}

pub fn proportional_spec(l: f64, rho: f64) -> ProblemSpec {
    ProblemSpec {
        market: market(),
        consumption: ConsumptionSpec::Proportional { kappa: 0.05 },
        poverty: PovertySpec::step(10.0, 30.0, l, rho),
    }
}

pub fn problem(spec: &ProblemSpec) -> ValidatedProblem {
    validate(spec).unwrap_or_else(|e| panic!("invalid test spec {spec:?}: {e:?}"))
}

fn random_market(rng: &mut ChaCha8Rng) -> MarketParams {
    let r = rng.random_range(0.01..0.05);
    MarketParams {
        r,
        mu: r + rng.random_range(0.02..0.08),
        sigma: rng.random_range(0.1..0.35),
        lambda: rng.random_range(0.02..0.08),
        income: rng.random_range(0.0..0.5),
    }
}

fn random_poverty(rng: &mut ChaCha8Rng, lambda: f64, a: f64, d: f64) -> PovertySpec {
    let l = rng.random_range(0.05..1.0);
    let rho = l / lambda * rng.random_range(1.0..3.0);
    PovertySpec::step(a, d, l, rho)
}

/// Valid constant-consumption specs with parameters spread over a few
/// orders of magnitude.
pub fn random_constant_specs(n: usize, seed: u64) -> Vec<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let market = random_market(&mut rng);
            let ws = rng.random_range(20.0..100.0);
            let c = market.income + market.r * ws;
            let a = ws * rng.random_range(0.0..0.3);
            let d = a + (ws - a) * rng.random_range(0.2..0.8);
            let poverty = random_poverty(&mut rng, market.lambda, a, d);
            ProblemSpec { market, consumption: ConsumptionSpec::Constant { c }, poverty }
        })
        .collect()
}

pub fn random_proportional_specs(n: usize, seed: u64) -> Vec<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let market = random_market(&mut rng);
            let kappa = market.r + rng.random_range(0.01..0.06);
            let floor = market.income / (kappa - market.r);
            let a = floor + rng.random_range(1.0..20.0);
            let d = a * rng.random_range(1.5..4.0);
            let poverty = random_poverty(&mut rng, market.lambda, a, d);
            ProblemSpec { market, consumption: ConsumptionSpec::Proportional { kappa }, poverty }
        })
        .collect()
}

/// Scans `f` on `n` uniform interior points of `(lo, hi)`, requires exactly
/// one sign change and bisects it to machine precision.
pub fn sign_scan_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let x = |i: usize| lo + (hi - lo) * i as f64 / (n + 1) as f64;
    let mut changes = Vec::new();
    let mut prev = f(x(1));
    for i in 2..=n {
        let cur = f(x(i));
        if prev.signum() != cur.signum() {
            changes.push(i);
        }
        prev = cur;
    }
    assert_eq!(changes.len(), 1, "expected one sign change, found {changes:?}");
    bisect(f, x(changes[0] - 1), x(changes[0]))
}

/// Plain bisection on a bracketing interval.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no bracket on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Central finite-difference first and second derivatives.
pub fn fd_derivatives(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}

/// Evenly spaced interior points of `(lo, hi)`.
pub fn interior(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
}

/// Log-spaced points of `(lo, hi)` measured from `origin`.
pub fn log_interior(origin: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (x0, x1) = ((lo - origin).ln(), (hi - origin).ln());
    interior(x0, x1, n).into_iter().map(|x| origin + x.exp()).collect()
}

/// The same problem on a clock running `s` times faster: every rate is
/// multiplied by `s` and the volatility by `sqrt(s)`. The value function is
/// unchanged, so closed-form references still apply while paths need `s`
/// times fewer steps.
pub fn rescaled(spec: &ProblemSpec, s: f64) -> ProblemSpec {
    let mut out = spec.clone();
    let m = &mut out.market;
    m.r *= s;
    m.mu *= s;
    m.sigma *= s.sqrt();
    m.lambda *= s;
    m.income *= s;
    out.consumption = match spec.consumption.clone() {
        ConsumptionSpec::Constant { c } => ConsumptionSpec::Constant { c: c * s },
        ConsumptionSpec::Proportional { kappa } => ConsumptionSpec::Proportional { kappa: kappa * s },
        ConsumptionSpec::PiecewiseLinear { knots } => {
            ConsumptionSpec::PiecewiseLinear { knots: knots.into_iter().map(|[w, c]| [w, c * s]).collect() }
        }
    };
    if let Some(l) = out.poverty.l.as_mut() {
        *l *= s;
    }
    if let Some(st) = out.poverty.staircase.as_mut() {
        st.base *= s;
        for step in &mut st.steps {
            step.increment *= s;
        }
    }
    out
}
