use thiserror::Error;

use crate::model::FeasibilityError;

/// Errors raised by the solvers, the simulator and the file-format helpers.
#[derive(Debug, Error)]
pub enum Error {
    /// The problem failed validation; every violated constraint is listed.
    #[error("infeasible problem: {}", join_violations(.0))]
    Infeasible(Vec<FeasibilityError>),

    #[error("root is not bracketed on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("inconsistent free boundary: {what} (relative gap {gap:e})")]
    Consistency { what: &'static str, gap: f64 },

    #[error("wealth {w} outside the domain [{lo}, {hi}]")]
    Domain { w: f64, lo: f64, hi: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("property violated: {0}")]
    PropertyViolation(String),

    #[error("policy iteration did not converge after {iterations} iterations (last change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("discrete convexity lost at {} interior node(s), first at w = {first_w}", .nodes.len())]
    ConvexityLoss { nodes: Vec<usize>, first_w: f64 },

    #[error("ordering violated at {} node(s), worst excess {worst:e}", .nodes.len())]
    OrderingViolation { nodes: Vec<usize>, worst: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("policy returned a non-finite amount {amount} at wealth {w}")]
    Policy { w: f64, amount: f64 },

    #[error("policy '{label}' beats the reference by {margin:e} (beyond three standard errors)")]
    OptimalityViolation { label: String, margin: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[FeasibilityError]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
