use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cvr_core::devices::TapSet;
use cvr_core::experiments::{first_window_model, sweep_price_b, validate_pf, voltvar_table};
use cvr_core::feeder::{load_feeder, DeviceFleet, Feeder, FeederError};
use cvr_core::horizon::{build_horizon_problem, HorizonConfig, Objective};
use cvr_core::mpc::{run_day, MpcConfig, RunError, SimulationResult};
use cvr_core::oracle::{certify, EnumerationSpec};
use cvr_core::profiles::{load_profiles, Noise, Profiles};
use cvr_core::report;
use cvr_milp::lp_format;

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER_LIMIT: u8 = 3;

/// Relative objective tolerance for `--oracle` certification.
const ORACLE_REL_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "cvr-mpc", version, about = "Receding-horizon CVR and battery scheduling on radial feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one day and write steps.csv, summary.json and solver_stats.jsonl.
    Run(Scenario),
    /// Run the revenue objective once per depreciation price.
    SweepPriceB {
        #[command(flatten)]
        scenario: Scenario,
        /// Depreciation prices, cents/kWh.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Compare linear and nonlinear power flow at every step with devices idle.
    ValidatePf {
        #[arg(long)]
        feeder: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        /// Extra multiplier on every step's load.
        #[arg(long, default_value_t = 1.0)]
        load_scale: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Single-step device settings at the lightest and heaviest loaded steps.
    VoltvarTable(Scenario),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Energy,
    Revenue,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    /// Built-in branch and bound.
    Builtin,
    /// Write the first window in LP format and stop.
    Export,
}

#[derive(Args, Clone)]
struct Scenario {
    #[arg(long)]
    feeder: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long, value_enum, default_value = "energy")]
    objective: ObjectiveArg,
    /// Prediction window, steps.
    #[arg(long, default_value_t = 8)]
    window: usize,
    /// Battery depreciation price, cents/kWh discharged.
    #[arg(long, default_value_t = 0.0)]
    price_b: f64,
    #[arg(long, value_enum, default_value = "builtin")]
    solver: SolverArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Check every window small enough to enumerate against brute force.
    #[arg(long)]
    oracle: bool,
    /// Require each window to end at or above the initial state of charge.
    #[arg(long)]
    terminal_soc: bool,
    /// Tap positions offered per regulator, evenly spread over the range; 0 offers all.
    #[arg(long, default_value_t = 9)]
    tap_positions: usize,
    /// Plant-side forecast error as SEED,LOAD_SIGMA,PV_SIGMA.
    #[arg(long, value_parser = parse_noise)]
    noise: Option<Noise>,
}

fn parse_noise(s: &str) -> Result<Noise, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected SEED,LOAD_SIGMA,PV_SIGMA".into());
    }
    let seed = parts[0].trim().parse().map_err(|_| format!("bad seed `{}`", parts[0]))?;
    let sigma = |p: &str| -> Result<f64, String> {
        let v: f64 = p.trim().parse().map_err(|_| format!("bad sigma `{p}`"))?;
        if (0.0..1.0).contains(&v) {
            Ok(v)
        } else {
            Err(format!("sigma {v} must lie in [0, 1)"))
        }
    };
    Ok(Noise { seed, load_sigma: sigma(parts[1])?, pv_sigma: sigma(parts[2])? })
}

/// A failure with its exit code and machine-readable description.
struct Failure {
    code: u8,
    body: serde_json::Value,
}

impl Failure {
    fn input(kind: &str, message: impl ToString, path: Option<&Path>) -> Self {
        let mut body = json!({ "error": kind, "message": message.to_string() });
        if let Some(p) = path {
            body["path"] = json!(p.display().to_string());
        }
        Failure { code: EXIT_INPUT, body }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::input("io", e, Some(path))
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(s) => cmd_run(&s),
        Command::SweepPriceB { scenario, values } => cmd_sweep(&scenario, &values),
        Command::ValidatePf { feeder, profiles, load_scale, out } => cmd_validate_pf(&feeder, &profiles, load_scale, &out),
        Command::VoltvarTable(s) => cmd_voltvar(&s),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.body);
            ExitCode::from(f.code)
        }
    }
}

fn load_inputs(feeder: &Path, profiles: &Path) -> Result<(Feeder, DeviceFleet, Profiles), Failure> {
    let (f, fleet) = load_feeder(feeder).map_err(|e| {
        let kind = if matches!(e, FeederError::Io { .. }) { "io" } else { "feeder" };
        Failure::input(kind, e, Some(feeder))
    })?;
    let p = load_profiles(profiles).map_err(|e| {
        let kind = if matches!(e, cvr_core::profiles::ProfileError::Io { .. }) { "io" } else { "profiles" };
        Failure::input(kind, e, Some(profiles))
    })?;
    p.check(&f, &fleet).map_err(|e| Failure::input("profiles", e, Some(profiles)))?;
    Ok((f, fleet, p))
}

fn config(s: &Scenario) -> Result<MpcConfig, Failure> {
    if s.window == 0 {
        return Err(Failure::input("argument", "--window must be at least 1", None));
    }
    if !(s.price_b.is_finite() && s.price_b >= 0.0) {
        return Err(Failure::input("argument", "--price-b must be a non-negative number", None));
    }
    let mut cfg = MpcConfig {
        horizon: HorizonConfig {
            objective: match s.objective {
                ObjectiveArg::Energy => Objective::Energy,
                ObjectiveArg::Revenue => Objective::Revenue,
            },
            window: s.window,
            price_b: s.price_b,
            taps: match s.tap_positions {
                0 => TapSet::All,
                n => TapSet::Evenly(n),
            },
            terminal_soc: s.terminal_soc,
            force_bigm: false,
        },
        noise: s.noise,
        ..MpcConfig::default()
    };
    if let Ok(raw) = std::env::var("CVR_MPC_NODE_LIMIT") {
        cfg.milp.node_limit = raw
            .trim()
            .parse()
            .map_err(|_| Failure::input("argument", format!("CVR_MPC_NODE_LIMIT `{raw}` is not a node count"), None))?;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Failure::io(&path, e))
}

fn run_failure(e: &RunError, out: &Path) -> Failure {
    let (kind, code) = match e {
        RunError::Build { .. } => ("model", EXIT_INPUT),
        RunError::Infeasible { .. } => ("infeasible", EXIT_INFEASIBLE),
        RunError::Unbounded { .. } => ("unbounded", EXIT_INFEASIBLE),
        RunError::SolverLimit { .. } => ("solver-limit", EXIT_SOLVER_LIMIT),
        RunError::Plant { .. } => ("plant", EXIT_INFEASIBLE),
    };
    let mut body = json!({ "error": kind, "message": e.to_string(), "step": e.step() });
    if let Some(lp) = e.lp_dump() {
        let name = format!("failed_step{}.lp", e.step());
        if write(out, &name, lp).is_ok() {
            body["lp"] = json!(out.join(name).display().to_string());
        }
    }
    Failure { code, body }
}

fn write_run(out: &Path, result: &SimulationResult, feeder: &Feeder, fleet: &DeviceFleet) -> CliResult {
    write(out, "steps.csv", &report::steps_csv(result, feeder, fleet))?;
    write(out, "summary.json", &report::summary_json(result))?;
    write(out, "solver_stats.jsonl", &report::solver_stats_jsonl(result))
}

fn cmd_run(s: &Scenario) -> CliResult {
    let (feeder, fleet, profiles) = load_inputs(&s.feeder, &s.profiles)?;
    let mut cfg = config(s)?;
    if s.solver == SolverArg::Export {
        // Exported windows carry the full tap range; the reduction is a builtin-solver aid.
        cfg.horizon.taps = TapSet::All;
        let model = first_window_model(&feeder, &fleet, &profiles, &cfg.horizon)
            .map_err(|e| Failure::input("model", e, None))?;
        let lp = lp_format::to_lp_string(&model).map_err(|e| Failure::input("export", e, None))?;
        write(&s.out, "window_m0.lp", &lp)?;
        println!("{}", s.out.join("window_m0.lp").display());
        return Ok(());
    }
    let result = match run_day(&feeder, &fleet, &profiles, &cfg) {
        Ok(r) => r,
        Err(f) => {
            write_run(&s.out, &f.partial, &feeder, &fleet)?;
            return Err(run_failure(&f.error, &s.out));
        }
    };
    write_run(&s.out, &result, &feeder, &fleet)?;
    if s.oracle {
        let certs = certify_run(&feeder, &fleet, &profiles, &cfg, &result)?;
        let body = serde_json::to_string_pretty(&certs).expect("certifications serialize");
        write(&s.out, "certification.json", &(body + "\n"))?;
        if certs.iter().any(|c| c.agrees == Some(false)) {
            eprintln!("{}", json!({ "warning": "oracle disagrees with the MILP on at least one window" }));
        }
    }
    print!("{}", report::summary_json(&result));
    Ok(())
}

/// Re-solves each window by enumeration where that is within the limit.
fn certify_run(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    profiles: &Profiles,
    cfg: &MpcConfig,
    result: &SimulationResult,
) -> Result<Vec<cvr_core::oracle::Certification>, Failure> {
    let spec = EnumerationSpec::default();
    let mut soc = result.soc0;
    let mut out = Vec::with_capacity(result.records.len());
    for r in &result.records {
        let m = r.step;
        let w = cfg.horizon.window.min(profiles.steps() - m);
        let problem = build_horizon_problem(feeder, fleet, profiles, &cfg.horizon, m, w, soc)
            .map_err(|e| Failure::input("model", e, None))?;
        out.push(certify(&problem.model, r.objective, m, w, &spec, ORACLE_REL_TOL));
        soc = r.soc;
    }
    Ok(out)
}

fn cmd_sweep(s: &Scenario, values: &[f64]) -> CliResult {
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Failure::input("argument", format!("depreciation price {v} must be a non-negative number"), None));
    }
    let (feeder, fleet, profiles) = load_inputs(&s.feeder, &s.profiles)?;
    let cfg = config(s)?;
    let rep = sweep_price_b(&feeder, &fleet, &profiles, &cfg, values);
    if !rep.duplicates.is_empty() {
        eprintln!("{}", json!({ "warning": "duplicate values dropped", "values": rep.duplicates }));
    }
    if !rep.monotone {
        eprintln!("{}", json!({ "warning": "discharged energy is not non-increasing in price_b" }));
    }
    write(&s.out, "sweep.csv", &report::sweep_csv(&rep))?;
    let body = serde_json::to_string_pretty(&rep).expect("sweep serializes");
    write(&s.out, "sweep.json", &(body + "\n"))?;
    print!("{}", report::sweep_csv(&rep));
    Ok(())
}

fn cmd_validate_pf(feeder: &Path, profiles: &Path, load_scale: f64, out: &Path) -> CliResult {
    if !(load_scale.is_finite() && load_scale >= 0.0) {
        return Err(Failure::input("argument", "--load-scale must be a non-negative number", None));
    }
    let (f, fleet, p) = load_inputs(feeder, profiles)?;
    let rows = validate_pf(&f, &fleet, &p, load_scale);
    write(out, "validate_pf.csv", &report::validate_pf_csv(&rows))?;
    let max = rows.iter().filter_map(|r| r.max_error).fold(0.0, f64::max);
    let failed: Vec<usize> = rows.iter().filter(|r| r.error.is_some()).map(|r| r.step).collect();
    println!("{}", json!({ "steps": rows.len(), "max_error_pu": max, "failed_steps": failed }));
    Ok(())
}

fn cmd_voltvar(s: &Scenario) -> CliResult {
    let (feeder, fleet, profiles) = load_inputs(&s.feeder, &s.profiles)?;
    let cfg = config(s)?;
    let table = voltvar_table(&feeder, &fleet, &profiles, &cfg).map_err(|e| run_failure(&e, &s.out))?;
    write(&s.out, "voltvar.csv", &report::voltvar_csv(&table, &fleet))?;
    let body = serde_json::to_string_pretty(&table).expect("table serializes");
    write(&s.out, "voltvar.json", &(body + "\n"))?;
    if !table.identical {
        eprintln!("{}", json!({ "warning": "energy and revenue settings differ" }));
    }
    print!("{}", report::voltvar_csv(&table, &fleet));
    Ok(())
}
