use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use lifetime_poverty::export::{self, fmt_f64, CurvePoint};
use lifetime_poverty::hjb::{self, GridConfig, SolverConfig, WealthGrid};
use lifetime_poverty::model::{validate as validate_spec, ConsumptionSpec, ProblemSpec, Regime, ValidatedProblem};
use lifetime_poverty::monte_carlo::{simulate_cost, SimConfig};
use lifetime_poverty::policy::{pi_zero_policy, Policy, SplitPolicy, TabulatedPolicy, DEFAULT_TABLE_POINTS};
use lifetime_poverty::{constant, proportional, Error};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::{self, Outputs, RunManifest};
use crate::settings::{self, FileSettings, SimFlags};
use crate::{Method, Observable, PolicyChoice, SimulateArgs, SolveArgs, SweepArgs};

/// Bad user input that the library does not know about (exit status 2).
#[derive(Debug)]
pub struct InvalidInput(pub String);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    InvalidInput(msg.into()).into()
}

/// A `--policy-file` and the digest of its contents at the time of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub path: String,
    pub sha256: String,
}

/// Fully resolved inputs of a command; stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Resolved {
    Solve {
        spec: ProblemSpec,
        method: Method,
        grid: GridConfig,
        solver: SolverConfig,
    },
    Simulate {
        spec: ProblemSpec,
        w0: f64,
        policy: PolicyChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        policy_file: Option<PolicyFile>,
        sim: SimConfig,
        grid: GridConfig,
        solver: SolverConfig,
    },
    Sweep {
        spec: ProblemSpec,
        param: String,
        values: Vec<f64>,
        observable: Observable,
        at_w: Vec<f64>,
        method: Method,
        grid: GridConfig,
        solver: SolverConfig,
    },
}

impl Resolved {
    pub fn command_name(&self) -> &'static str {
        match self {
            Resolved::Solve { .. } => "solve",
            Resolved::Simulate { .. } => "simulate",
            Resolved::Sweep { .. } => "sweep",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Resolved::Simulate { sim, .. } => Some(sim.seed),
            _ => None,
        }
    }
}

fn load_spec(path: &Path) -> anyhow::Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ProblemSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn checked(spec: &ProblemSpec) -> Result<ValidatedProblem, Error> {
    validate_spec(spec).map_err(Error::Infeasible)
}

pub fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let file = FileSettings::load(args.config.as_deref())?;
    let (grid, solver) = settings::grid(&args.grid, &file);
    let config = Resolved::Solve { spec: load_spec(&args.spec)?, method: args.method, grid, solver };
    let m = run(config, &args.out)?;
    println!("wrote {} to {}", files(&m), args.out.display());
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let file = FileSettings::load(args.config.as_deref())?;
    let spec = load_spec(&args.spec)?;
    let problem = checked(&spec)?;
    let flags = SimFlags {
        dt: args.dt,
        n_paths: args.n_paths,
        seed: args.seed,
        t_cap: args.t_cap,
        bridge: args.bridge,
        level_refinement: args.level_refinement,
        workers: args.workers,
    };
    let sim = settings::sim(&flags, &file, &problem);
    let (grid, solver) = settings::grid(&args.grid, &file);
    let policy_file = match (args.policy, &args.policy_file) {
        (PolicyChoice::File, Some(path)) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Some(PolicyFile { path: path.display().to_string(), sha256: manifest::sha256_hex(&bytes) })
        }
        (PolicyChoice::File, None) => return Err(invalid("--policy file needs --policy-file")),
        (_, Some(_)) => return Err(invalid("--policy-file is only used with --policy file")),
        (_, None) => None,
    };
    let config = Resolved::Simulate { spec, w0: args.w0, policy: args.policy, policy_file, sim, grid, solver };
    run(config, &args.out)?;
    print!("{}", std::fs::read_to_string(args.out.join(ESTIMATE))?);
    Ok(())
}

pub fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let file = FileSettings::load(args.config.as_deref())?;
    let (grid, solver) = settings::grid(&args.grid, &file);
    let config = Resolved::Sweep {
        spec: load_spec(&args.spec)?,
        param: args.param,
        values: args.values,
        observable: args.observable,
        at_w: args.at_w,
        method: args.method,
        grid,
        solver,
    };
    let m = run(config, &args.out)?;
    println!("wrote {} to {}", files(&m), args.out.display());
    Ok(())
}

pub fn validate(path: &Path) -> anyhow::Result<()> {
    let spec = load_spec(path)?;
    let problem = checked(&spec)?;
    let d = problem.derived();
    println!("valid {} problem", spec.consumption.name());
    println!("ruin level a = {}", problem.ruin_level());
    println!("safe level w_s = {}", problem.safe_level());
    println!("m = {}", d.m);
    println!("beta1 = {}, beta2 = {}", d.beta1, d.beta2);
    if let (Some(g1), Some(g2)) = (d.gamma1, d.gamma2) {
        println!("gamma1 = {g1}, gamma2 = {g2}");
    }
    if problem.single_step().is_some() {
        match problem.regime() {
            Regime::Constant { .. } => println!("y_da = {}", constant::assemble(&problem)?.y_da()),
            Regime::Proportional { .. } => println!("z_da = {}", proportional::assemble(&problem)?.z_da()),
            Regime::PiecewiseLinear => {}
        }
    }
    Ok(())
}

pub fn replay(path: &Path, out: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let recorded: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if recorded.library_version != lifetime_poverty::VERSION {
        eprintln!(
            "note: manifest was written by library version {}, this is {}",
            recorded.library_version,
            lifetime_poverty::VERSION
        );
    }
    let fresh = run(recorded.config.clone(), out)?;
    let mut differing = Vec::new();
    for old in &recorded.outputs {
        match fresh.outputs.iter().find(|n| n.file == old.file) {
            Some(new) if new.sha256 == old.sha256 => println!("identical {}", old.file),
            _ => {
                println!("differs   {}", old.file);
                differing.push(old.file.clone());
            }
        }
    }
    if !differing.is_empty() || fresh.outputs.len() != recorded.outputs.len() {
        bail!("replay did not reproduce: {}", differing.join(", "));
    }
    Ok(())
}

fn files(m: &RunManifest) -> String {
    let mut names: Vec<&str> = m.outputs.iter().map(|o| o.file.as_str()).collect();
    names.push(manifest::FILE_NAME);
    names.join(", ")
}

const SOLUTION_CSV: &str = "solution.csv";
const SOLUTION_JSON: &str = "solution.json";
const ESTIMATE: &str = "estimate.json";
const SWEEP_CSV: &str = "sweep.csv";

/// Executes a resolved command, writing its outputs and manifest to `out`.
pub fn run(config: Resolved, out: &Path) -> anyhow::Result<RunManifest> {
    let started = manifest::now();
    let mut outputs = Outputs::new(out)?;
    match &config {
        Resolved::Solve { spec, method, grid, solver } => {
            let problem = checked(spec)?;
            let (points, info) = match method {
                Method::Closed => closed_curve(&problem, grid)?,
                Method::Fd => fd_curve(&problem, grid, solver)?,
            };
            let mut csv = Vec::new();
            export::write_curve_csv(&mut csv, &points)?;
            outputs.write(SOLUTION_CSV, &csv)?;
            outputs.write(SOLUTION_JSON, export::to_json(&info)?.as_bytes())?;
        }
        Resolved::Simulate { spec, w0, policy, policy_file, sim, grid, solver } => {
            let problem = checked(spec)?;
            let policy = build_policy(&problem, *policy, policy_file.as_ref(), grid, solver)?;
            let estimate = simulate_cost(&problem, policy.as_ref(), *w0, sim)?;
            outputs.write(ESTIMATE, export::to_json(&estimate)?.as_bytes())?;
        }
        Resolved::Sweep { spec, param, values, observable, at_w, method, grid, solver } => {
            let csv = sweep_csv(spec, param, values, *observable, at_w, *method, grid, solver)?;
            outputs.write(SWEEP_CSV, &csv)?;
        }
    }
    outputs.finish(config, started)
}

/// Closed-form curve on the nodes the FD solver would use, with the
/// solution constants.
fn closed_curve(problem: &ValidatedProblem, grid: &GridConfig) -> anyhow::Result<(Vec<CurvePoint>, serde_json::Value)> {
    let regime = problem.spec().consumption.name();
    if problem.is_ruin_probability_mode() {
        let nodes = WealthGrid::build(problem, grid)?;
        let value = |w: f64| match problem.regime() {
            Regime::Constant { .. } => constant::ruin_value(problem, w),
            _ => proportional::ruin_value(problem, w),
        };
        let points = nodes
            .nodes()
            .iter()
            .map(|&w| Ok(CurvePoint { w, value: value(w)?, policy: problem.pi_zero(w) }))
            .collect::<lifetime_poverty::Result<Vec<_>>>()?;
        let info = json!({
            "method": "closed",
            "regime": regime,
            "mode": "ruin_probability",
            "ruin_level": problem.ruin_level(),
            "safe_level": finite_or_null(problem.safe_level()),
            "rho": problem.ruin_penalty(),
            "derived": problem.derived(),
        });
        return Ok((points, info));
    }
    match problem.regime() {
        Regime::Constant { .. } => {
            let sol = constant::assemble(problem)?;
            let info = json!({
                "method": "closed",
                "regime": regime,
                "ruin_level": problem.ruin_level(),
                "poverty_level": sol.poverty_level(),
                "safe_level": sol.safe_level(),
                "rho": problem.ruin_penalty(),
                "derived": problem.derived(),
                "y_da": sol.y_da(),
                "coefficients": sol.coefficients(),
                "pi_star_at_ruin": sol.pi_star_at_ruin(),
                "pi_monotonicity": sol.classify_pi_monotonicity(),
            });
            Ok((export::sample_constant(&sol, grid)?, info))
        }
        Regime::Proportional { .. } => {
            let sol = proportional::assemble(problem)?;
            let info = json!({
                "method": "closed",
                "regime": regime,
                "ruin_level": problem.ruin_level(),
                "poverty_level": sol.poverty_level(),
                "income_floor": sol.income_floor(),
                "rho": problem.ruin_penalty(),
                "derived": problem.derived(),
                "z_da": sol.z_da(),
                "coefficients": sol.coefficients(),
                "pi_star_at_ruin": sol.pi_star_at_ruin(),
                "pi_monotonicity": sol.classify_pi_monotonicity()?,
            });
            Ok((export::sample_proportional(&sol, grid)?, info))
        }
        Regime::PiecewiseLinear => {
            Err(Error::Unsupported("closed form requires constant or proportional consumption".into()).into())
        }
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn fd_curve(
    problem: &ValidatedProblem,
    grid: &GridConfig,
    solver: &SolverConfig,
) -> anyhow::Result<(Vec<CurvePoint>, serde_json::Value)> {
    let table = hjb::solve_bvp(problem, grid, solver)?;
    let points = table
        .grid
        .nodes()
        .iter()
        .zip(table.values.iter().zip(&table.policy))
        .map(|(&w, (&value, &policy))| CurvePoint { w, value, policy })
        .collect();
    let info = json!({
        "method": "fd",
        "regime": problem.spec().consumption.name(),
        "nodes": table.grid.len(),
        "iterations": table.iterations,
        "residual": hjb::residual(&table),
        "convexity_history": table.convexity_history,
    });
    Ok((points, info))
}

fn build_policy<'a>(
    problem: &'a ValidatedProblem,
    choice: PolicyChoice,
    file: Option<&PolicyFile>,
    grid: &GridConfig,
    solver: &SolverConfig,
) -> anyhow::Result<Box<dyn Policy + 'a>> {
    Ok(match choice {
        PolicyChoice::Star if problem.is_ruin_probability_mode() => Box::new(pi_zero_policy(problem)),
        PolicyChoice::Star => match (problem.regime(), problem.single_step()) {
            (Regime::Constant { .. }, Some(_)) => {
                Box::new(SplitPolicy::from_constant(&constant::assemble(problem)?, DEFAULT_TABLE_POINTS))
            }
            (Regime::Proportional { .. }, Some(_)) => {
                Box::new(SplitPolicy::from_proportional(&proportional::assemble(problem)?, DEFAULT_TABLE_POINTS))
            }
            _ => Box::new(TabulatedPolicy::from_table(&hjb::solve_bvp(problem, grid, solver)?)?),
        },
        PolicyChoice::Zero => Box::new(pi_zero_policy(problem)),
        PolicyChoice::None => Box::new(|_w: f64| 0.0),
        PolicyChoice::File => {
            let file = file.ok_or_else(|| invalid("--policy file needs --policy-file"))?;
            Box::new(read_policy_csv(file)?)
        }
    })
}

/// Reads a `w,pi` CSV with a header row and checks it is the file that was
/// recorded.
fn read_policy_csv(file: &PolicyFile) -> anyhow::Result<TabulatedPolicy> {
    let bytes = std::fs::read(&file.path).with_context(|| format!("reading {}", file.path))?;
    if manifest::sha256_hex(&bytes) != file.sha256 {
        bail!("policy file {} changed since the run was recorded", file.path);
    }
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{} row {}", file.path, i + 2))?;
        let field = |j: usize| -> anyhow::Result<f64> {
            let s = record.get(j).ok_or_else(|| invalid(format!("{} row {}: need two columns", file.path, i + 2)))?;
            s.trim().parse().map_err(|_| invalid(format!("{} row {}: '{s}' is not a number", file.path, i + 2)))
        };
        points.push((field(0)?, field(1)?));
    }
    TabulatedPolicy::new(points).map_err(|e| invalid(format!("{}: {e}", file.path)))
}

const PARAMS: &str = "l, rho, lambda, mu, sigma, c, kappa";

fn set_param(spec: &mut ProblemSpec, param: &str, v: f64) -> anyhow::Result<()> {
    match (param, &mut spec.consumption) {
        ("l", _) => match spec.poverty.l.as_mut() {
            Some(l) => *l = v,
            None => return Err(invalid("sweeping l needs a single-step poverty function")),
        },
        ("rho", _) => spec.poverty.rho = v,
        ("lambda", _) => spec.market.lambda = v,
        ("mu", _) => spec.market.mu = v,
        ("sigma", _) => spec.market.sigma = v,
        ("c", ConsumptionSpec::Constant { c }) => *c = v,
        ("kappa", ConsumptionSpec::Proportional { kappa }) => *kappa = v,
        ("c" | "kappa", other) => {
            return Err(invalid(format!("cannot sweep {param} with {} consumption", other.name())));
        }
        _ => return Err(invalid(format!("unknown parameter '{param}'; expected one of {PARAMS}"))),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep_csv(
    base: &ProblemSpec,
    param: &str,
    values: &[f64],
    observable: Observable,
    at_w: &[f64],
    method: Method,
    grid: &GridConfig,
    solver: &SolverConfig,
) -> anyhow::Result<Vec<u8>> {
    set_param(&mut base.clone(), param, values.first().copied().unwrap_or(0.0))?;
    let pointwise = matches!(observable, Observable::Value | Observable::Policy);
    if pointwise && at_w.is_empty() {
        return Err(invalid("--observable value and policy need --at-w"));
    }
    if !pointwise && method == Method::Fd {
        return Err(invalid("y_da and z_da exist only for the closed form"));
    }
    let label = match observable {
        Observable::Value => "value",
        Observable::Policy => "policy",
        Observable::YDa => "y_da",
        Observable::ZDa => "z_da",
    };
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["param", "param_value", "w", "observable", "value"])?;
    for &v in values {
        let mut spec = base.clone();
        set_param(&mut spec, param, v)?;
        let problem = validate_spec(&spec).map_err(|errors| {
            let list: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
            invalid(format!("{param} = {v}: {}", list.join("; ")))
        })?;
        let rows: Vec<(String, f64)> = match observable {
            Observable::YDa => match problem.regime() {
                Regime::Constant { .. } => vec![(String::new(), constant::assemble(&problem)?.y_da())],
                _ => return Err(invalid("y_da needs constant consumption")),
            },
            Observable::ZDa => match problem.regime() {
                Regime::Proportional { .. } => vec![(String::new(), proportional::assemble(&problem)?.z_da())],
                _ => return Err(invalid("z_da needs proportional consumption")),
            },
            _ => {
                let eval = pointwise_evaluator(&problem, observable, method, grid, solver)?;
                at_w.iter().map(|&w| Ok((fmt_f64(w), eval(w)?))).collect::<anyhow::Result<_>>()?
            }
        };
        for (w, x) in rows {
            out.write_record([param, &fmt_f64(v), &w, label, &fmt_f64(x)])?;
        }
    }
    Ok(out.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

type Evaluator<'a> = Box<dyn Fn(f64) -> anyhow::Result<f64> + 'a>;

fn pointwise_evaluator<'a>(
    problem: &'a ValidatedProblem,
    observable: Observable,
    method: Method,
    grid: &GridConfig,
    solver: &SolverConfig,
) -> anyhow::Result<Evaluator<'a>> {
    let value = observable == Observable::Value;
    if method == Method::Fd {
        let table = hjb::solve_bvp(problem, grid, solver)?;
        let policy = TabulatedPolicy::from_table(&table)?;
        return Ok(Box::new(move |w| if value { Ok(table.value_at(w)?) } else { Ok(policy.amount(w)) }));
    }
    if problem.is_ruin_probability_mode() {
        return Ok(Box::new(move |w| {
            if !value {
                return Ok(problem.pi_zero(w));
            }
            Ok(match problem.regime() {
                Regime::Constant { .. } => constant::ruin_value(problem, w)?,
                _ => proportional::ruin_value(problem, w)?,
            })
        }));
    }
    Ok(match problem.regime() {
        Regime::Constant { .. } => {
            let sol = constant::assemble(problem)?;
            Box::new(move |w| Ok(if value { sol.value(w)? } else { sol.pi_star(w)? }))
        }
        Regime::Proportional { .. } => {
            let sol = proportional::assemble(problem)?;
            Box::new(move |w| Ok(if value { sol.value(w)? } else { sol.pi_star(w)? }))
        }
        Regime::PiecewiseLinear => {
            return Err(Error::Unsupported("closed form requires constant or proportional consumption".into()).into())
        }
    })
}
