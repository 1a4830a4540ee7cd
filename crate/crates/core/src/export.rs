//! CSV and JSON output shapes.
//!
//! Floats in CSV files are written in scientific notation with 17
//! significant digits, which round-trips every `f64`. JSON numbers use
//! serde_json's shortest round-trip representation.

use std::io::Write;

use serde::Serialize;

use crate::constant::ConstantSolution;
use crate::dual::Side;
use crate::error::Result;
use crate::hjb::{GridConfig, ValueTable, WealthGrid};
use crate::proportional::ProportionalSolution;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// One row of a closed-form curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub w: f64,
    pub value: f64,
    pub policy: f64,
}

/// Samples a constant-consumption solution on the nodes the finite-difference
/// solver would use for the same grid configuration. The policy at `a` is
/// its `a+` limit; at `d` it is the `d+` limit.
pub fn sample_constant(sol: &ConstantSolution, grid: &GridConfig) -> Result<Vec<CurvePoint>> {
    let nodes = WealthGrid::build(sol.problem(), grid)?;
    let a = sol.problem().ruin_level();
    nodes
        .nodes()
        .iter()
        .map(|&w| {
            let policy = if w <= a { sol.pi_star_at_ruin() } else { sol.pi_star_sided(w, Side::Above)? };
            Ok(CurvePoint { w, value: sol.value(w)?, policy })
        })
        .collect()
}

/// Proportional counterpart of [`sample_constant`]; nodes are log-spaced up
/// to `W_max`.
pub fn sample_proportional(sol: &ProportionalSolution, grid: &GridConfig) -> Result<Vec<CurvePoint>> {
    let nodes = WealthGrid::build(sol.problem(), grid)?;
    let a = sol.problem().ruin_level();
    nodes
        .nodes()
        .iter()
        .map(|&w| {
            let policy = if w <= a { sol.pi_star_at_ruin() } else { sol.pi_star_sided(w, Side::Above)? };
            Ok(CurvePoint { w, value: sol.value(w)?, policy })
        })
        .collect()
}

/// Writes `w,value,policy`.
pub fn write_curve_csv<W: Write>(mut out: W, points: &[CurvePoint]) -> Result<()> {
    writeln!(out, "w,value,policy")?;
    for p in points {
        writeln!(out, "{},{},{}", fmt_f64(p.w), fmt_f64(p.value), fmt_f64(p.policy))?;
    }
    Ok(())
}

/// Writes `w,value,policy,residual`; the residual is `NaN` where it is not
/// defined (boundaries, poverty levels, upwinded or clipped nodes).
pub fn write_table_csv<W: Write>(mut out: W, table: &ValueTable) -> Result<()> {
    writeln!(out, "w,value,policy,residual")?;
    for (i, &w) in table.grid.nodes().iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(w),
            fmt_f64(table.values[i]),
            fmt_f64(table.policy[i]),
            fmt_f64(table.residuals[i].unwrap_or(f64::NAN))
        )?;
    }
    Ok(())
}

/// Pretty-printed JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
