//! Finite-difference solver for the HJB boundary-value problem
//!
//! ```text
//! inf_pi { (r w + (mu - r) pi - c(w) + A) V_w + (1/2) sigma^2 pi^2 V_ww - lambda V + l(w) } = 0,
//! V(a) = rho,   V(w_s) = 0,
//! ```
//!
//! for staircase poverty functions and any admissible consumption function.
//! The nonlinearity is handled by Howard policy iteration: for a fixed policy
//! the equation is a linear tridiagonal system, and the policy is then
//! updated to the feedback `-((mu - r) / sigma^2) V_w / V_ww`.
//!
//! The grid is uniform in a coordinate `x` on each segment between
//! consecutive poverty levels, so every level is a node. `x = w` when the
//! safe level is finite (the grid ends exactly there); `x = ln(w - B)` for
//! proportional consumption, where the domain is cut at `W_max` with a Robin
//! condition matching the known power decay of `V`.
//!
//! Interior nodes use central differences whenever both off-diagonal
//! coefficients are non-negative and fall back to upwinding otherwise, so the
//! matrix is always an M-matrix. At a poverty level the one-sided equations
//! are coupled through ghost values that enforce continuity of `V` and `V_w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Regime, ValidatedProblem};
use crate::numeric::solve_tridiagonal;

pub const MIN_NODES: usize = 201;
const PI_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_nodes")]
    pub n: usize,
    /// Upper end of the grid. Only used for proportional consumption; the
    /// default is `1000` times the highest poverty level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_max: Option<f64>,
}

fn default_nodes() -> usize {
    1001
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: default_nodes(), w_max: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when the sup-norm change of `V` between iterations is below
    /// `tol * rho`.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iters() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-12
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: default_max_iters(), tol: default_tol() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CoordMap {
    Identity,
    Log { offset: f64 },
}

impl CoordMap {
    fn x(&self, w: f64) -> f64 {
        match *self {
            CoordMap::Identity => w,
            CoordMap::Log { offset } => (w - offset).ln(),
        }
    }

    fn w(&self, x: f64) -> f64 {
        match *self {
            CoordMap::Identity => x,
            CoordMap::Log { offset } => offset + x.exp(),
        }
    }

    /// `dw/dx` and `d^2w/dx^2` at wealth `w`.
    fn jacobian(&self, w: f64) -> (f64, f64) {
        match *self {
            CoordMap::Identity => (1.0, 0.0),
            CoordMap::Log { offset } => (w - offset, w - offset),
        }
    }
}

/// Wealth nodes from `a` to `W_max`, with every poverty level among them.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthGrid {
    nodes: Vec<f64>,
    x: Vec<f64>,
    /// Spacing in `x` to the left and right of each node.
    h_left: Vec<f64>,
    h_right: Vec<f64>,
    breaks: Vec<usize>,
    map: CoordMap,
}

impl WealthGrid {
    pub fn build(problem: &ValidatedProblem, cfg: &GridConfig) -> Result<WealthGrid> {
        if cfg.n < MIN_NODES {
            return Err(Error::Config(format!("grid needs at least {MIN_NODES} nodes, got {}", cfg.n)));
        }
        let a = problem.ruin_level();
        let levels = problem.poverty().levels();
        let ws = problem.safe_level();
        let (top, map) = if ws.is_finite() {
            if let Some(w) = cfg.w_max {
                if (w - ws).abs() > 1e-12 * ws.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "w_max = {w} must equal the safe level {ws} when it is finite"
                    )));
                }
            }
            (ws, CoordMap::Identity)
        } else {
            let offset = problem.income_floor().unwrap_or(0.0);
            let highest = levels.iter().copied().fold(a, f64::max);
            let top = cfg.w_max.unwrap_or(1e3 * highest);
            if !(top > highest) || !top.is_finite() {
                return Err(Error::Config(format!(
                    "w_max = {top} must be finite and exceed every poverty level and the ruin level"
                )));
            }
            (top, CoordMap::Log { offset })
        };

        let mut anchors = vec![a];
        anchors.extend(levels.iter().copied());
        anchors.push(top);
        let xs: Vec<f64> = anchors.iter().map(|&w| map.x(w)).collect();
        let segments = anchors.len() - 1;
        let intervals = cfg.n - 1;
        if intervals < 2 * segments {
            return Err(Error::Config(format!(
                "{} nodes cannot resolve {segments} poverty segments",
                cfg.n
            )));
        }
        let total = xs[segments] - xs[0];
        let mut counts: Vec<usize> = (0..segments)
            .map(|j| (((xs[j + 1] - xs[j]) / total * intervals as f64).round() as usize).max(2))
            .collect();
        // Fix the rounding on the longest segment.
        let assigned: usize = counts.iter().sum();
        let longest = (0..segments)
            .max_by(|&i, &j| (xs[i + 1] - xs[i]).total_cmp(&(xs[j + 1] - xs[j])))
            .expect("at least one segment");
        let adjusted = counts[longest] as isize + intervals as isize - assigned as isize;
        if adjusted < 2 {
            return Err(Error::Config("grid too coarse for the poverty segments".into()));
        }
        counts[longest] = adjusted as usize;

        let mut nodes = vec![a];
        let mut x = vec![xs[0]];
        let mut h_left = vec![f64::NAN];
        let mut h_right = Vec::with_capacity(cfg.n);
        let mut breaks = Vec::new();
        for j in 0..segments {
            let h = (xs[j + 1] - xs[j]) / counts[j] as f64;
            for k in 1..=counts[j] {
                h_right.push(h);
                let (xi, wi) = if k == counts[j] {
                    (xs[j + 1], anchors[j + 1])
                } else {
                    let xi = xs[j] + h * k as f64;
                    (xi, map.w(xi))
                };
                x.push(xi);
                nodes.push(wi);
                h_left.push(h);
            }
            if j + 1 < segments {
                breaks.push(nodes.len() - 1);
            }
        }
        h_right.push(f64::NAN);
        Ok(WealthGrid { nodes, x, h_left, h_right, breaks, map })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Indices of the nodes sitting on poverty levels.
    pub fn discontinuities(&self) -> &[usize] {
        &self.breaks
    }

    /// Whether the grid uses the logarithmic coordinate.
    pub fn is_logarithmic(&self) -> bool {
        matches!(self.map, CoordMap::Log { .. })
    }

    fn is_break(&self, i: usize) -> bool {
        self.breaks.binary_search(&i).is_ok()
    }

    /// Largest spacing in wealth.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
    }
}

/// How the drift term was discretized at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Boundary,
    Central,
    Upwind,
    Discontinuity,
}

/// Converged solution of the boundary-value problem on a grid.
#[derive(Debug, Clone)]
pub struct ValueTable {
    problem: ValidatedProblem,
    pub grid: WealthGrid,
    pub values: Vec<f64>,
    /// Optimal policy at each node, the `d+` limit at poverty levels.
    pub policy: Vec<f64>,
    /// Same as `policy` except at poverty levels, where it holds the `d-`
    /// limit.
    pub policy_below: Vec<f64>,
    /// HJB residual at nodes with a central stencil and an unclipped policy;
    /// `None` elsewhere.
    pub residuals: Vec<Option<f64>>,
    pub stencils: Vec<Stencil>,
    pub iterations: usize,
    /// Number of interior nodes with a negative second difference after
    /// each policy-evaluation step.
    pub convexity_history: Vec<usize>,
}

/// Summary of [`residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// `max |F| / (1 + |lambda V|)`.
    pub max_rel: f64,
    pub nodes: usize,
}

struct Operator<'a> {
    problem: &'a ValidatedProblem,
    grid: &'a WealthGrid,
    k: f64,
    half_var: f64,
    excess: f64,
    lambda: f64,
}

/// Tridiagonal row `alpha V[i-1] + beta V[i] + gamma V[i+1]` for a fixed
/// policy at a node with spacing `h` in `x`.
#[derive(Debug, Clone, Copy)]
struct Row {
    alpha: f64,
    beta: f64,
    gamma: f64,
    upwind: bool,
}

impl<'a> Operator<'a> {
    fn new(problem: &'a ValidatedProblem, grid: &'a WealthGrid) -> Self {
        let m = problem.market();
        Operator {
            problem,
            grid,
            k: m.premium_over_variance(),
            half_var: 0.5 * m.sigma * m.sigma,
            excess: m.mu - m.r,
            lambda: m.lambda,
        }
    }

    /// Diffusion and drift coefficients in `x` at wealth `w` under `pi`.
    fn coefficients(&self, w: f64, pi: f64) -> (f64, f64) {
        let (j1, j2) = self.grid.map.jacobian(w);
        let b = self.problem.riskless_drift(w) + self.excess * pi;
        let diff = self.half_var * pi * pi;
        (diff / (j1 * j1), b / j1 - diff * j2 / (j1 * j1 * j1))
    }

    fn row(&self, w: f64, pi: f64, h: f64) -> Row {
        let (dx, bx) = self.coefficients(w, pi);
        let dd = dx / (h * h);
        let mut alpha = dd - bx / (2.0 * h);
        let mut gamma = dd + bx / (2.0 * h);
        let upwind = alpha < 0.0 || gamma < 0.0;
        if upwind {
            if bx > 0.0 {
                alpha = dd;
                gamma = dd + bx / h;
            } else {
                alpha = dd - bx / h;
                gamma = dd;
            }
        }
        Row { alpha, beta: -(alpha + gamma) - self.lambda, gamma, upwind }
    }

    /// `V_w` and `V_ww` from derivatives in `x`.
    fn to_wealth(&self, w: f64, vx: f64, vxx: f64) -> (f64, f64) {
        let (j1, j2) = self.grid.map.jacobian(w);
        (vx / j1, (vxx - j2 / j1 * vx) / (j1 * j1))
    }

    fn feedback(&self, v_w: f64, v_ww: f64, pi_max: f64) -> (f64, bool) {
        if !(v_ww > 0.0) {
            return (pi_max, true);
        }
        let pi = -self.k * v_w / v_ww;
        if pi < PI_MIN {
            (PI_MIN, true)
        } else if pi > pi_max {
            (pi_max, true)
        } else {
            (pi, false)
        }
    }
}

/// Decay exponent `gamma1 / (1 - gamma1)` of `V` for proportional consumption.
fn decay_exponent(problem: &ValidatedProblem) -> Option<f64> {
    problem.derived().gamma1.map(|g1| g1 / (1.0 - g1))
}

struct Policies {
    right: Vec<f64>,
    left: Vec<f64>,
    clipped: Vec<bool>,
}

/// Solves the boundary-value problem by policy iteration.
pub fn solve_bvp(
    problem: &ValidatedProblem,
    grid_cfg: &GridConfig,
    solver: &SolverConfig,
) -> Result<ValueTable> {
    if solver.max_iters == 0 || !(solver.tol > 0.0) {
        return Err(Error::Config("max_iters must be positive and tol > 0".into()));
    }
    let grid = WealthGrid::build(problem, grid_cfg)?;
    let op = Operator::new(problem, &grid);
    let n = grid.len();
    let rho = problem.ruin_penalty();
    let pi_max = 10.0 * grid.nodes.iter().map(|&w| problem.pi_zero(w)).fold(0.0, f64::max);
    let top_policy = problem.pi_zero(grid.nodes[n - 1]).max(0.0);

    let init: Vec<f64> = grid.nodes.iter().map(|&w| problem.pi_zero(w).clamp(PI_MIN, pi_max)).collect();
    let mut pol = Policies { right: init.clone(), left: init, clipped: vec![false; n] };
    let mut values = vec![f64::INFINITY; n];
    let mut history = Vec::new();
    let mut stencils = vec![Stencil::Central; n];
    let mut converged = None;
    let mut change = f64::INFINITY;

    for it in 1..=solver.max_iters {
        let next = evaluate(&op, &pol, top_policy, &mut stencils);
        change = next.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        values = next;
        history.push(concavity_violations(&op, &values).len());
        if change <= solver.tol * rho {
            converged = Some(it);
            break;
        }
        pol = improve(&op, &values, &pol, pi_max, top_policy);
    }
    let Some(iterations) = converged else {
        return Err(Error::NonConvergence { iterations: solver.max_iters, change });
    };
    let bad = concavity_violations(&op, &values);
    if let Some(&first) = bad.first() {
        return Err(Error::ConvexityLoss { first_w: grid.nodes[first], nodes: bad });
    }
    let pol = improve(&op, &values, &pol, pi_max, top_policy);
    let mask: Vec<bool> =
        (0..n).map(|i| stencils[i] == Stencil::Central && !pol.clipped[i]).collect();
    let residuals = centered_residuals(problem, &grid, &values, &mask);
    Ok(ValueTable {
        problem: problem.clone(),
        values,
        policy: pol.right,
        policy_below: pol.left,
        residuals,
        stencils,
        iterations,
        convexity_history: history,
        grid,
    })
}

/// Policy evaluation: solves the linear system for the given policy.
fn evaluate(op: &Operator, pol: &Policies, top_policy: f64, stencils: &mut [Stencil]) -> Vec<f64> {
    let grid = op.grid;
    let problem = op.problem;
    let n = grid.len();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    diag[0] = 1.0;
    rhs[0] = problem.ruin_penalty();
    stencils[0] = Stencil::Boundary;

    for i in 1..n - 1 {
        let w = grid.nodes[i];
        if grid.is_break(i) {
            let (hl, hr) = (grid.h_left[i], grid.h_right[i]);
            let left = op.row(w, pol.left[i], hl);
            let right = op.row(w, pol.right[i], hr);
            let l_minus = problem.poverty().value(w);
            let l_plus = problem.poverty().value_right(w);
            let ratio = hr / hl;
            lower[i] = right.alpha * ratio * (left.alpha + left.gamma);
            diag[i] = right.alpha * ratio * left.beta + right.beta * left.gamma;
            upper[i] = left.gamma * (right.alpha + right.gamma);
            rhs[i] = -(left.gamma * l_plus + right.alpha * ratio * l_minus);
            stencils[i] = Stencil::Discontinuity;
        } else {
            let row = op.row(w, pol.right[i], grid.h_left[i]);
            lower[i] = row.alpha;
            diag[i] = row.beta;
            upper[i] = row.gamma;
            rhs[i] = -problem.poverty_cost(w);
            stencils[i] = if row.upwind { Stencil::Upwind } else { Stencil::Central };
        }
    }

    let last = n - 1;
    stencils[last] = Stencil::Boundary;
    match decay_exponent(problem) {
        None => {
            diag[last] = 1.0;
            rhs[last] = 0.0;
        }
        Some(p) => {
            // V_x = -p V at the far end; the ghost value eliminates V_{N+1}.
            let w = grid.nodes[last];
            let h = grid.h_left[last];
            let (dx, bx) = op.coefficients(w, top_policy);
            lower[last] = 2.0 * dx / (h * h);
            diag[last] = -2.0 * dx / (h * h) - 2.0 * dx * p / h - bx * p - op.lambda;
            rhs[last] = -problem.poverty_cost(w);
        }
    }
    solve_tridiagonal(&lower, &diag, &upper, &rhs)
}

/// Ghost values on both sides of a discontinuity node `i`, consistent with
/// the left equation and continuity of `V_x`.
fn ghosts(op: &Operator, values: &[f64], pol: &Policies, i: usize) -> (f64, f64) {
    let grid = op.grid;
    let w = grid.nodes[i];
    let (hl, hr) = (grid.h_left[i], grid.h_right[i]);
    let left = op.row(w, pol.left[i], hl);
    let l_minus = op.problem.poverty().value(w);
    let g_plus = -(l_minus + left.alpha * values[i - 1] + left.beta * values[i]) / left.gamma;
    let g_minus = values[i + 1] - hr / hl * (g_plus - values[i - 1]);
    (g_plus, g_minus)
}

/// Policy improvement.
fn improve(op: &Operator, values: &[f64], prev: &Policies, pi_max: f64, top_policy: f64) -> Policies {
    let grid = op.grid;
    let n = grid.len();
    let mut right = vec![0.0; n];
    let mut left = vec![0.0; n];
    let mut clipped = vec![false; n];
    for i in 1..n - 1 {
        let w = grid.nodes[i];
        if grid.is_break(i) {
            let (hl, hr) = (grid.h_left[i], grid.h_right[i]);
            let (gp, gm) = ghosts(op, values, prev, i);
            let vx = (gp - values[i - 1]) / (2.0 * hl);
            let vxx_l = (values[i - 1] - 2.0 * values[i] + gp) / (hl * hl);
            let vxx_r = (gm - 2.0 * values[i] + values[i + 1]) / (hr * hr);
            let (vw, vww_l) = op.to_wealth(w, vx, vxx_l);
            let (_, vww_r) = op.to_wealth(w, vx, vxx_r);
            let (pl, cl) = op.feedback(vw, vww_l, pi_max);
            let (pr, cr) = op.feedback(vw, vww_r, pi_max);
            left[i] = pl;
            right[i] = pr;
            clipped[i] = cl || cr;
        } else {
            let h = grid.h_left[i];
            let vx = (values[i + 1] - values[i - 1]) / (2.0 * h);
            let vxx = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
            let (vw, vww) = op.to_wealth(w, vx, vxx);
            let (p, c) = op.feedback(vw, vww, pi_max);
            right[i] = p;
            left[i] = p;
            clipped[i] = c;
        }
    }
    // Ends: second-order one-sided differences at a, the known far-field
    // policy at the top.
    let h = grid.h_right[0];
    let vx = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    let vxx = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / (h * h);
    let (vw, vww) = op.to_wealth(grid.nodes[0], vx, vxx);
    let (p0, c0) = op.feedback(vw, vww, pi_max);
    right[0] = p0;
    left[0] = p0;
    clipped[0] = c0;
    right[n - 1] = top_policy;
    left[n - 1] = top_policy;
    Policies { right, left, clipped }
}

/// Interior nodes (away from poverty levels) where the discrete second
/// derivative in wealth is negative beyond rounding.
fn concavity_violations(op: &Operator, values: &[f64]) -> Vec<usize> {
    let grid = op.grid;
    let rho = op.problem.ruin_penalty();
    let mut bad = Vec::new();
    for i in 1..grid.len() - 1 {
        if grid.is_break(i) {
            continue;
        }
        let h = grid.h_left[i];
        let vx = (values[i + 1] - values[i - 1]) / (2.0 * h);
        let vxx = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        let (_, vww) = op.to_wealth(grid.nodes[i], vx, vxx);
        let (j1, _) = grid.map.jacobian(grid.nodes[i]);
        let tol = 1e-10 * rho / (h * h * j1 * j1);
        if vww < -tol {
            bad.push(i);
        }
    }
    bad
}

/// `F = lambda V - (r w - c + A) V_w + m V_w^2 / V_ww - l` with centred
/// differences at the nodes selected by `mask`; `None` elsewhere or where
/// `V_ww <= 0`.
pub fn centered_residuals(
    problem: &ValidatedProblem,
    grid: &WealthGrid,
    values: &[f64],
    mask: &[bool],
) -> Vec<Option<f64>> {
    let op = Operator::new(problem, grid);
    let m = problem.derived().m;
    let lambda = problem.market().lambda;
    (0..grid.len())
        .map(|i| {
            if i == 0 || i + 1 == grid.len() || grid.is_break(i) || !mask[i] {
                return None;
            }
            let w = grid.nodes[i];
            let h = grid.h_left[i];
            let vx = (values[i + 1] - values[i - 1]) / (2.0 * h);
            let vxx = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
            let (vw, vww) = op.to_wealth(w, vx, vxx);
            if !(vww > 0.0) {
                return None;
            }
            Some(
                lambda * values[i] - problem.riskless_drift(w) * vw + m * vw * vw / vww
                    - problem.poverty_cost(w),
            )
        })
        .collect()
}

/// Re-evaluates the HJB residual of a solved table with centred
/// differences, independently of the stencils used by the solver. Poverty
/// levels, upwinded nodes and nodes with a clipped policy are excluded.
pub fn residual(table: &ValueTable) -> ResidualReport {
    let lambda = table.problem.market().lambda;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0;
    let mask: Vec<bool> = table.residuals.iter().map(Option::is_some).collect();
    let fresh = centered_residuals(&table.problem, &table.grid, &table.values, &mask);
    for (i, r) in fresh.iter().enumerate() {
        if let Some(f) = r {
            max_abs = max_abs.max(f.abs());
            max_rel = max_rel.max(f.abs() / (1.0 + (lambda * table.values[i]).abs()));
            sum += f.abs();
            count += 1;
        }
    }
    ResidualReport {
        max_abs,
        mean_abs: if count > 0 { sum / count as f64 } else { 0.0 },
        max_rel,
        nodes: count,
    }
}

/// Checks `u <= v` node-wise (up to `1e-10` times the larger ruin penalty)
/// and returns the largest `u - v`.
pub fn comparison_check(u: &ValueTable, v: &ValueTable) -> Result<f64> {
    if u.grid.len() != v.grid.len()
        || u.grid.nodes.iter().zip(&v.grid.nodes).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::Config("comparison needs two tables on the same grid".into()));
    }
    let tol = 1e-10 * u.problem.ruin_penalty().max(v.problem.ruin_penalty());
    let mut nodes = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (i, (a, b)) in u.values.iter().zip(&v.values).enumerate() {
        let gap = a - b;
        worst = worst.max(gap);
        if gap > tol {
            nodes.push(i);
        }
    }
    if nodes.is_empty() {
        Ok(worst)
    } else {
        Err(Error::OrderingViolation { nodes, worst })
    }
}

impl ValueTable {
    pub fn problem(&self) -> &ValidatedProblem {
        &self.problem
    }

    /// Interpolated value at `w` (quadratic through the three nearest nodes
    /// of the same segment).
    pub fn value_at(&self, w: f64) -> Result<f64> {
        let nodes = &self.grid.nodes;
        let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
        if !(lo..=hi).contains(&w) {
            return Err(Error::Domain { w, lo, hi });
        }
        let j = nodes.partition_point(|&x| x <= w).clamp(1, nodes.len() - 1);
        if nodes[j - 1] == w {
            return Ok(self.values[j - 1]);
        }
        // Interval [j-1, j]; add the neighbour that stays within the segment.
        let third = if j + 1 < nodes.len() && !self.grid.is_break(j) {
            j + 1
        } else if j >= 2 && !self.grid.is_break(j - 1) {
            j - 2
        } else {
            let t = (w - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
            return Ok(self.values[j - 1] + t * (self.values[j] - self.values[j - 1]));
        };
        let idx = [j - 1, j, third];
        let x = self.grid.map.x(w);
        let mut acc = 0.0;
        for &p in &idx {
            let mut basis = 1.0;
            for &q in &idx {
                if q != p {
                    basis *= (x - self.grid.x[q]) / (self.grid.x[p] - self.grid.x[q]);
                }
            }
            acc += basis * self.values[p];
        }
        Ok(acc)
    }

    /// `(w, pi)` pairs for building a tabulated policy; poverty levels
    /// appear twice, `d-` first.
    pub fn policy_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.grid.len() + self.grid.breaks.len());
        for (i, &w) in self.grid.nodes.iter().enumerate() {
            if self.grid.is_break(i) {
                pts.push((w, self.policy_below[i]));
            }
            pts.push((w, self.policy[i]));
        }
        pts
    }

    pub fn is_constant_regime(&self) -> bool {
        matches!(self.problem.regime(), Regime::Constant { .. })
    }
}
