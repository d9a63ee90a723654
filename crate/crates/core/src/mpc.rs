//! Receding-horizon loop: solve the window, apply its first step to the
//! nonlinear plant, advance the battery, shift.
//!
//! The plant is the branch-flow sweep with voltage-dependent loads, capacitor
//! output proportional to squared voltage and the realized PV. Only the battery
//! state carries over between steps; it is advanced from the commanded power.

use cvr_milp::{lp_format, solve_milp_with, MilpOptions, SolveStats, Status};
use serde::Serialize;
use thiserror::Error;

use crate::bess::soc_update;
use crate::devices::inverter_q_bounds;
use crate::feeder::{DeviceFleet, Feeder};
use crate::horizon::{build_horizon_problem, BuildError, ControlAction, HorizonConfig, Objective, WindowPlan};
use crate::powerflow::{solve_nonlinear_sweep, BusInjection, Operating, PfError, SweepOptions};
use crate::profiles::{Noise, Profiles, StepInputs};

#[derive(Clone, Debug)]
pub struct MpcConfig {
    pub horizon: HorizonConfig,
    pub milp: MilpOptions,
    pub sweep: SweepOptions,
    /// When set, the plant sees a perturbed day while the controller keeps the forecast.
    pub noise: Option<Noise>,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self { horizon: HorizonConfig::default(), milp: MilpOptions::default(), sweep: SweepOptions::default(), noise: None }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("step {step}: {source}")]
    Build { step: usize, source: BuildError },
    #[error("step {step}: window problem is infeasible")]
    Infeasible { step: usize, lp: Option<String> },
    #[error("step {step}: window problem is unbounded")]
    Unbounded { step: usize, lp: Option<String> },
    #[error("step {step}: branch-and-bound node limit reached")]
    SolverLimit { step: usize, lp: Option<String> },
    #[error("step {step}: plant power flow failed: {source}")]
    Plant { step: usize, source: PfError },
}

impl RunError {
    pub fn step(&self) -> usize {
        match self {
            RunError::Build { step, .. }
            | RunError::Infeasible { step, .. }
            | RunError::Unbounded { step, .. }
            | RunError::SolverLimit { step, .. }
            | RunError::Plant { step, .. } => *step,
        }
    }

    /// The failing window in LP format, when one was built.
    pub fn lp_dump(&self) -> Option<&str> {
        match self {
            RunError::Infeasible { lp, .. } | RunError::Unbounded { lp, .. } | RunError::SolverLimit { lp, .. } => lp.as_deref(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub action: ControlAction,
    /// Controls for every step of the window.
    pub trajectory: Vec<ControlAction>,
    pub plan: WindowPlan,
    pub objective: f64,
    pub stats: SolveStats,
    /// Squared voltages of the first window step in the model.
    pub model_v: Vec<f64>,
    pub model_p_t_kw: f64,
}

/// Solves the window starting at `m` (shortened at the end of the day) and
/// returns its first-step controls.
pub fn mpc_step(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    forecast: &Profiles,
    cfg: &MpcConfig,
    m: usize,
    soc: f64,
) -> Result<StepOutcome, RunError> {
    let w = cfg.horizon.window.min(forecast.steps() - m);
    let problem = build_horizon_problem(feeder, fleet, forecast, &cfg.horizon, m, w, soc)
        .map_err(|source| RunError::Build { step: m, source })?;
    let sol = solve_milp_with(&problem.model, &cfg.milp);
    let dump = || lp_format::to_lp_string(&problem.model).ok();
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(RunError::Infeasible { step: m, lp: dump() }),
        Status::Unbounded => return Err(RunError::Unbounded { step: m, lp: dump() }),
        Status::IterationLimit => return Err(RunError::SolverLimit { step: m, lp: dump() }),
    }
    let trajectory: Vec<_> = (0..w).map(|k| problem.action(&sol.values, k)).collect();
    Ok(StepOutcome {
        action: trajectory[0].clone(),
        trajectory,
        plan: problem.plan(&sol.values),
        objective: sol.objective,
        stats: sol.stats,
        model_v: problem.voltages(&sol.values, 0),
        model_p_t_kw: problem.purchase_kw(&sol.values, 0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlantMeasurement {
    /// Substation injection, kW.
    pub p_s_kw: f64,
    /// Purchase including the battery, kW.
    pub p_t_kw: f64,
    /// Voltage magnitudes, per-unit.
    pub v: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub losses_kw: f64,
    pub iterations: usize,
}

/// Solves the nonlinear plant with `action` applied under the realized inputs.
///
/// Inverter setpoints are clipped to the capability at the realized PV output.
pub fn apply_to_plant(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    action: &ControlAction,
    realized: &StepInputs,
    sweep: &SweepOptions,
) -> Result<PlantMeasurement, PfError> {
    let mut op = Operating::nominal(feeder, realized.load_mult);
    for inj in &mut op.injections {
        inj.cvr_p = realized.cvr_p.unwrap_or(inj.cvr_p);
        inj.cvr_q = realized.cvr_q.unwrap_or(inj.cvr_q);
    }
    for (g, dg) in fleet.dgs.iter().enumerate() {
        let p = realized.pv[g].min(dg.s_rated);
        let (lo, hi) = inverter_q_bounds(dg.s_rated, p).expect("p clipped to rating");
        let inj: &mut BusInjection = &mut op.injections[dg.bus];
        inj.p_gen += p;
        inj.q_gen += action.q_dg[g].clamp(lo, hi);
    }
    for (c, cap) in fleet.capacitors.iter().enumerate() {
        if action.caps[c] {
            op.injections[cap.bus].q_cap_rated += cap.q_rated;
        }
    }
    for (r, reg) in fleet.regulators.iter().enumerate() {
        op.ratios[reg.edge] = reg.ratio(action.taps[r]);
    }
    let sol = solve_nonlinear_sweep(feeder, &op, sweep)?;
    let s_base = feeder.s_base_kva();
    let p_s_kw = s_base * sol.substation_p(feeder);
    let v = sol.magnitudes();
    Ok(PlantMeasurement {
        p_s_kw,
        p_t_kw: p_s_kw + action.p_cd,
        v_min: v.iter().copied().fold(f64::INFINITY, f64::min),
        v_max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        v,
        losses_kw: s_base * sol.losses(feeder),
        iterations: sol.iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub load_mult: f64,
    pub price: f64,
    pub p_t_kw: f64,
    pub p_s_kw: f64,
    pub p_cd_kw: f64,
    pub p_d_kw: f64,
    /// `price·P_T·τ`, cents.
    pub cost_cents: f64,
    /// State of charge after the step.
    pub soc: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub model_v_min: f64,
    pub model_v_max: f64,
    pub model_p_t_kw: f64,
    pub action: ControlAction,
    pub objective: f64,
    pub stats: SolveStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DayTotals {
    pub energy_kwh: f64,
    pub cost_cents: f64,
    pub cost_dollars: f64,
    pub discharged_kwh: f64,
    pub charged_kwh: f64,
    pub depreciation_cents: f64,
    /// Discharged energy over the usable capacity.
    pub battery_cycles: f64,
    pub final_soc: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub model_v_min: f64,
    pub model_v_max: f64,
    pub nodes: u64,
    pub lp_solves: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub objective: Objective,
    pub window: usize,
    pub price_b: f64,
    pub tau_h: f64,
    pub soc0: f64,
    pub records: Vec<StepRecord>,
    pub plans: Vec<WindowPlan>,
    pub totals: DayTotals,
    /// False when the run stopped early.
    pub complete: bool,
}

#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: RunError,
    /// Steps completed before the failure.
    pub partial: SimulationResult,
}

pub fn run_day(feeder: &Feeder, fleet: &DeviceFleet, profiles: &Profiles, cfg: &MpcConfig) -> Result<SimulationResult, Box<RunFailure>> {
    let realized = match &cfg.noise {
        Some(n) => profiles.realize(n, feeder, fleet),
        None => profiles.clone(),
    };
    let tau_h = profiles.tau_h();
    let params = fleet.battery.as_ref().map(|b| crate::bess::BessParams { tau_h, ..b.clone() });
    let soc0 = params.as_ref().map_or(0.0, |p| p.soc_initial());
    let mut result = SimulationResult {
        objective: cfg.horizon.objective,
        window: cfg.horizon.window,
        price_b: cfg.horizon.price_b,
        tau_h,
        soc0,
        records: Vec::with_capacity(profiles.steps()),
        plans: Vec::with_capacity(profiles.steps()),
        totals: DayTotals::default(),
        complete: false,
    };
    let mut soc = soc0;
    for m in 0..profiles.steps() {
        let out = match mpc_step(feeder, fleet, profiles, cfg, m, soc) {
            Ok(o) => o,
            Err(error) => return Err(fail(error, result, fleet)),
        };
        let inputs = realized.step_inputs(m, feeder, fleet);
        let plant = match apply_to_plant(feeder, fleet, &out.action, &inputs, &cfg.sweep) {
            Ok(p) => p,
            Err(source) => return Err(fail(RunError::Plant { step: m, source }, result, fleet)),
        };
        if let Some(p) = &params {
            soc = soc_update(soc, out.action.p_cd, p);
            // Rounding can leave the state a hair outside its band.
            if (soc - p.e_minus).abs() < 1e-9 {
                soc = p.e_minus;
            } else if (soc - p.e_plus).abs() < 1e-9 {
                soc = p.e_plus;
            }
        }
        let model_v: Vec<f64> = out.model_v.iter().map(|v| v.sqrt()).collect();
        result.records.push(StepRecord {
            step: m,
            load_mult: inputs.load_mult,
            price: inputs.price,
            p_t_kw: plant.p_t_kw,
            p_s_kw: plant.p_s_kw,
            p_cd_kw: out.action.p_cd,
            p_d_kw: (-out.action.p_cd).max(0.0),
            cost_cents: inputs.price * plant.p_t_kw * tau_h,
            soc,
            v_min: plant.v_min,
            v_max: plant.v_max,
            model_v_min: model_v.iter().copied().fold(f64::INFINITY, f64::min),
            model_v_max: model_v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            model_p_t_kw: out.model_p_t_kw,
            action: out.action,
            objective: out.objective,
            stats: out.stats,
        });
        result.plans.push(out.plan);
    }
    result.complete = true;
    result.totals = totals(&result, fleet);
    Ok(result)
}

fn fail(error: RunError, mut partial: SimulationResult, fleet: &DeviceFleet) -> Box<RunFailure> {
    partial.totals = totals(&partial, fleet);
    Box::new(RunFailure { error, partial })
}

fn totals(r: &SimulationResult, fleet: &DeviceFleet) -> DayTotals {
    let tau = r.tau_h;
    let mut t = DayTotals {
        v_min: f64::INFINITY,
        v_max: f64::NEG_INFINITY,
        model_v_min: f64::INFINITY,
        model_v_max: f64::NEG_INFINITY,
        final_soc: r.records.last().map_or(r.soc0, |x| x.soc),
        ..Default::default()
    };
    for x in &r.records {
        t.energy_kwh += x.p_t_kw * tau;
        t.cost_cents += x.cost_cents;
        t.discharged_kwh += x.p_d_kw * tau;
        t.charged_kwh += x.p_cd_kw.max(0.0) * tau;
        t.v_min = t.v_min.min(x.v_min);
        t.v_max = t.v_max.max(x.v_max);
        t.model_v_min = t.model_v_min.min(x.model_v_min);
        t.model_v_max = t.model_v_max.max(x.model_v_max);
        t.nodes += x.stats.nodes;
        t.lp_solves += x.stats.lp_solves;
    }
    t.cost_dollars = t.cost_cents / 100.0;
    t.depreciation_cents = r.price_b * t.discharged_kwh;
    if let Some(b) = &fleet.battery {
        t.battery_cycles = t.discharged_kwh / (b.q_bat_kwh * (b.e_plus - b.e_minus));
    }
    t
}
