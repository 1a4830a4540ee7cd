//! Monte Carlo estimate of the expected cost of a feedback policy.
//!
//! Death is integrated out: each path accumulates
//! `int_0^{tau_a} e^{-lambda t} l(W_t) dt + rho e^{-lambda tau_a}` along an
//! Euler-Maruyama discretization of the wealth equation, so no death time
//! is drawn. A path stops at ruin, on reaching the safe level (no further
//! cost can occur there), or at the horizon `t_cap`.
//!
//! Every path owns a ChaCha8 stream selected by its index, so results do not
//! depend on the number of worker threads. Running two policies with the same
//! seed gives common random numbers.
//!
//! ```
//! use lifetime_poverty::model::*;
//! use lifetime_poverty::monte_carlo::{simulate_cost, SimConfig};
//!
//! let spec = ProblemSpec {
//!     market: MarketParams { r: 0.02, mu: 0.06, sigma: 0.2, lambda: 0.04, income: 0.0 },
//!     consumption: ConsumptionSpec::Constant { c: 1.0 },
//!     poverty: PovertySpec::step(0.0, 30.0, 0.5, 25.0),
//! };
//! let problem = validate(&spec).unwrap();
//! // Without investment, wealth above the safe level only grows.
//! let cfg = SimConfig { dt: 1e-2, n_paths: 100, seed: 7, t_cap: 500.0, ..SimConfig::default() };
//! let est = simulate_cost(&problem, &|_w: f64| 0.0, 60.0, &cfg).unwrap();
//! assert_eq!(est.mean, 0.0);
//! assert_eq!(est.ruin_fraction, 0.0);
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ValidatedProblem;
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_cap: f64,
    /// Kill paths with the Brownian-bridge probability of having crossed the
    /// ruin level between grid points.
    #[serde(default)]
    pub brownian_bridge: bool,
    /// Largest factor by which a step is subdivided next to a poverty level,
    /// where the policy and the running cost jump. 1 disables refinement.
    #[serde(default = "default_refinement")]
    pub level_refinement: u32,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            n_paths: 100_000,
            seed: 0,
            t_cap: 500.0,
            brownian_bridge: false,
            level_refinement: default_refinement(),
            workers: None,
        }
    }
}

fn default_refinement() -> u32 {
    256
}

/// A step is shortened while the distance to the nearest poverty level is
/// below this many standard deviations of the wealth increment.
const REFINE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub ruin_fraction: f64,
    /// Bound on the cost ignored by stopping at `t_cap`:
    /// `max(rho, l(a+)/lambda) e^{-lambda t_cap}`.
    pub truncation_bound: f64,
}

/// Cost of one path and whether (or, with the bridge correction, with what
/// probability) it was ruined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub cost: f64,
    pub ruined: f64,
}

fn check_config(problem: &ValidatedProblem, w0: f64, cfg: &SimConfig) -> Result<()> {
    let lambda = problem.market().lambda;
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {}", cfg.dt)));
    }
    if cfg.n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    if !(cfg.t_cap * lambda >= 20.0) || !cfg.t_cap.is_finite() {
        return Err(Error::Config(format!(
            "t_cap * lambda must be at least 20, got {}",
            cfg.t_cap * lambda
        )));
    }
    if cfg.level_refinement == 0 {
        return Err(Error::Config("level_refinement must be at least 1".into()));
    }
    if cfg.workers == Some(0) {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    if !(w0 > problem.ruin_level()) || !w0.is_finite() {
        return Err(Error::Domain { w: w0, lo: problem.ruin_level(), hi: problem.safe_level() });
    }
    Ok(())
}

fn stream(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Simulates a single path.
fn run_path(
    problem: &ValidatedProblem,
    policy: &dyn Policy,
    w0: f64,
    cfg: &SimConfig,
    path: usize,
) -> Result<PathOutcome> {
    let market = problem.market();
    let (a, ws, rho) = (problem.ruin_level(), problem.safe_level(), problem.ruin_penalty());
    let lambda = market.lambda;
    let excess = market.mu - market.r;
    let sqrt_dt = cfg.dt.sqrt();
    let mut rng = stream(cfg.seed, path);

    let poverty = problem.poverty();
    let min_dt = cfg.dt / cfg.level_refinement.max(1) as f64;
    // Most steps are full steps; their exponentials are computed once.
    let em_dt = (-lambda * cfg.dt).exp_m1();
    let mid_dt = (-0.5 * lambda * cfg.dt).exp();

    let mut w = w0;
    let mut t = 0.0;
    let mut disc = 1.0;
    let mut alive = 1.0;
    let mut cost = 0.0;
    while t < cfg.t_cap {
        if w >= ws {
            break;
        }
        let pi = policy.amount(w);
        if !pi.is_finite() {
            return Err(Error::Policy { w, amount: pi });
        }
        let vol = market.sigma * pi;
        // Running cost and distance to the nearest poverty level in one pass.
        let mut dist = f64::INFINITY;
        let mut charged = 0.0;
        for step in &poverty.steps {
            dist = dist.min((w - step.level).abs());
            if w <= step.level {
                charged += step.increment;
            }
        }
        let l = if w > ws { 0.0 } else { poverty.base + charged };
        let h = if vol != 0.0 && dist < REFINE_SIGMAS * vol.abs() * sqrt_dt {
            (dist / (REFINE_SIGMAS * vol)).powi(2).clamp(min_dt, cfg.dt)
        } else {
            cfg.dt
        };
        let z: f64 = StandardNormal.sample(&mut rng);
        let full = h == cfg.dt;
        let sqrt_h = if full { sqrt_dt } else { h.sqrt() };
        let next = w + (problem.riskless_drift(w) + excess * pi) * h + vol * sqrt_h * z;
        if next <= a {
            // Ruin inside the step; locate it by linear interpolation.
            let theta = (w - a) / (w - next);
            let partial = (-lambda * theta * h).exp();
            cost += alive * disc * (l * -(-lambda * theta * h).exp_m1() / lambda + rho * partial);
            return Ok(PathOutcome { cost, ruined: 1.0 });
        }
        let em = if full { em_dt } else { (-lambda * h).exp_m1() };
        cost += alive * l * disc * -em / lambda;
        if cfg.brownian_bridge && vol != 0.0 {
            let x = 2.0 * (w - a) * (next - a) / (vol * vol * h);
            // exp(-x) underflows to zero beyond this.
            if x < 746.0 {
                let p = (-x).exp();
                // Killed somewhere inside the step; charge the penalty at its midpoint.
                let mid = if full { mid_dt } else { (-0.5 * lambda * h).exp() };
                cost += alive * p * disc * mid * (rho - l * (1.0 - mid) / lambda);
                alive *= 1.0 - p;
            }
        }
        w = next;
        t += h;
        disc *= 1.0 + em;
    }
    Ok(PathOutcome { cost, ruined: 1.0 - alive })
}

/// Per-path outcomes, in path order.
pub fn simulate_paths(
    problem: &ValidatedProblem,
    policy: &dyn Policy,
    w0: f64,
    cfg: &SimConfig,
) -> Result<Vec<PathOutcome>> {
    check_config(problem, w0, cfg)?;
    let work = || -> Result<Vec<PathOutcome>> {
        (0..cfg.n_paths).into_par_iter().map(|i| run_path(problem, policy, w0, cfg, i)).collect()
    };
    match cfg.workers {
        None => work(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(work),
    }
}

/// Mean and standard error of a sample, summed in order.
fn mean_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(problem: &ValidatedProblem, cfg: &SimConfig, paths: &[PathOutcome]) -> CostEstimate {
    let (mean, stderr) = mean_stderr(paths.iter().map(|p| p.cost));
    let ruin_fraction = paths.iter().map(|p| p.ruined).sum::<f64>() / paths.len() as f64;
    let lambda = problem.market().lambda;
    let worst = problem.ruin_penalty().max(problem.poverty().peak() / lambda);
    CostEstimate { mean, stderr, ruin_fraction, truncation_bound: worst * (-lambda * cfg.t_cap).exp() }
}

/// Estimates the expected cost of `policy` starting from `w0`.
pub fn simulate_cost(
    problem: &ValidatedProblem,
    policy: &dyn Policy,
    w0: f64,
    cfg: &SimConfig,
) -> Result<CostEstimate> {
    let paths = simulate_paths(problem, policy, w0, cfg)?;
    Ok(summarize(problem, cfg, &paths))
}

/// One entry of a [`policy_comparison`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEstimate {
    pub label: String,
    pub estimate: CostEstimate,
    /// Mean and standard error of `J(reference) - J(this)` over paired paths.
    pub diff_mean: f64,
    pub diff_stderr: f64,
}

/// Runs the reference and each alternative on the same random numbers and
/// returns all estimates sorted by mean cost. Fails with
/// [`Error::OptimalityViolation`] if an alternative beats the reference by
/// more than three paired standard errors.
pub fn policy_comparison(
    problem: &ValidatedProblem,
    w0: f64,
    cfg: &SimConfig,
    reference: (&str, &dyn Policy),
    alternatives: &[(&str, &dyn Policy)],
) -> Result<Vec<RankedEstimate>> {
    let base = simulate_paths(problem, reference.1, w0, cfg)?;
    let mut ranked = vec![RankedEstimate {
        label: reference.0.to_string(),
        estimate: summarize(problem, cfg, &base),
        diff_mean: 0.0,
        diff_stderr: 0.0,
    }];
    for &(label, policy) in alternatives {
        let paths = simulate_paths(problem, policy, w0, cfg)?;
        let (diff_mean, diff_stderr) =
            mean_stderr(base.iter().zip(&paths).map(|(b, p)| b.cost - p.cost));
        if diff_mean > 3.0 * diff_stderr {
            return Err(Error::OptimalityViolation {
                label: label.to_string(),
                margin: diff_mean - 3.0 * diff_stderr,
            });
        }
        ranked.push(RankedEstimate {
            label: label.to_string(),
            estimate: summarize(problem, cfg, &paths),
            diff_mean,
            diff_stderr,
        });
    }
    ranked.sort_by(|x, y| x.estimate.mean.total_cmp(&y.estimate.mean));
    Ok(ranked)
}
