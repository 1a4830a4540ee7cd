//! Settings resolution: flags, then the `--config` file, then defaults.

use std::path::Path;

use anyhow::Context;
use lifetime_poverty::hjb::{GridConfig, SolverConfig};
use lifetime_poverty::monte_carlo::SimConfig;
use lifetime_poverty::ValidatedProblem;
use serde::Deserialize;

use crate::GridArgs;

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub t_cap: Option<f64>,
    pub brownian_bridge: Option<bool>,
    pub level_refinement: Option<u32>,
    pub workers: Option<usize>,
    pub nodes: Option<usize>,
    pub w_max: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

impl FileSettings {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileSettings> {
        let Some(path) = path else { return Ok(FileSettings::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}

pub fn grid(flags: &GridArgs, file: &FileSettings) -> (GridConfig, SolverConfig) {
    let (g, s) = (GridConfig::default(), SolverConfig::default());
    (
        GridConfig { n: flags.nodes.or(file.nodes).unwrap_or(g.n), w_max: flags.w_max.or(file.w_max).or(g.w_max) },
        SolverConfig {
            max_iters: flags.max_iters.or(file.max_iters).unwrap_or(s.max_iters),
            tol: flags.tol.or(file.tol).unwrap_or(s.tol),
        },
    )
}

/// Monte Carlo flags as given on the command line.
pub struct SimFlags {
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub t_cap: Option<f64>,
    pub bridge: bool,
    pub level_refinement: Option<u32>,
    pub workers: Option<usize>,
}

/// The default horizon is the shortest one the estimator accepts,
/// `20 / lambda`.
pub fn sim(flags: &SimFlags, file: &FileSettings, problem: &ValidatedProblem) -> SimConfig {
    let d = SimConfig::default();
    SimConfig {
        dt: flags.dt.or(file.dt).unwrap_or(d.dt),
        n_paths: flags.n_paths.or(file.n_paths).unwrap_or(d.n_paths),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        t_cap: flags.t_cap.or(file.t_cap).unwrap_or(20.0 / problem.market().lambda),
        brownian_bridge: flags.bridge || file.brownian_bridge.unwrap_or(d.brownian_bridge),
        level_refinement: flags.level_refinement.or(file.level_refinement).unwrap_or(d.level_refinement),
        workers: flags.workers.or(file.workers),
    }
}
