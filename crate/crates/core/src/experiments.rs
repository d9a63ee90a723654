//! Studies built on top of the controller: depreciation-price sweep,
//! linearization check over a day, and the Volt-VAr settings table.

use rayon::prelude::*;
use serde::Serialize;

use crate::feeder::{DeviceFleet, Feeder};
use crate::horizon::{build_horizon_problem, HorizonConfig, Objective};
use crate::mpc::{mpc_step, run_day, MpcConfig, RunError, SimulationResult};
use crate::powerflow::{compare_pf, Operating};
use crate::profiles::Profiles;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub price_b: f64,
    pub discharged_kwh: Option<f64>,
    pub energy_kwh: Option<f64>,
    pub cost_cents: Option<f64>,
    pub depreciation_cents: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    /// One row per distinct value, in the order first given.
    pub rows: Vec<SweepRow>,
    /// Values dropped because they repeat an earlier one.
    pub duplicates: Vec<f64>,
    /// Discharged energy is non-increasing in `price_b` over the successful runs.
    pub monotone: bool,
}

/// One day run per depreciation price. Runs are independent and may execute in
/// parallel; a failing run is reported in its row and the others continue.
pub fn sweep_price_b(feeder: &Feeder, fleet: &DeviceFleet, profiles: &Profiles, cfg: &MpcConfig, values: &[f64]) -> SweepReport {
    let mut distinct: Vec<f64> = Vec::new();
    let mut duplicates = Vec::new();
    for &v in values {
        if distinct.contains(&v) {
            duplicates.push(v);
        } else {
            distinct.push(v);
        }
    }
    let rows: Vec<SweepRow> = distinct
        .par_iter()
        .map(|&price_b| {
            let mut cfg = cfg.clone();
            cfg.horizon.objective = Objective::Revenue;
            cfg.horizon.price_b = price_b;
            match run_day(feeder, fleet, profiles, &cfg) {
                Ok(r) => SweepRow {
                    price_b,
                    discharged_kwh: Some(r.totals.discharged_kwh),
                    energy_kwh: Some(r.totals.energy_kwh),
                    cost_cents: Some(r.totals.cost_cents),
                    depreciation_cents: Some(r.totals.depreciation_cents),
                    error: None,
                },
                Err(f) => SweepRow {
                    price_b,
                    discharged_kwh: None,
                    energy_kwh: None,
                    cost_cents: None,
                    depreciation_cents: None,
                    error: Some(f.error.to_string()),
                },
            }
        })
        .collect();
    let mut ok: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.discharged_kwh.map(|d| (r.price_b, d))).collect();
    ok.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = ok.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    SweepReport { rows, duplicates, monotone }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PfRow {
    pub step: usize,
    pub load_mult: f64,
    pub max_error: Option<f64>,
    pub mean_error: Option<f64>,
    pub sweep_iterations: Option<usize>,
    pub error: Option<String>,
}

/// Linear-vs-nonlinear voltage error at every step of the day, with the PV of
/// the profile injected, devices idle and loads scaled by `load_scale`.
pub fn validate_pf(feeder: &Feeder, fleet: &DeviceFleet, profiles: &Profiles, load_scale: f64) -> Vec<PfRow> {
    (0..profiles.steps())
        .map(|t| {
            let inputs = profiles.step_inputs(t, feeder, fleet);
            let load_mult = inputs.load_mult * load_scale;
            let mut op = Operating::nominal(feeder, load_mult);
            for inj in &mut op.injections {
                inj.cvr_p = inputs.cvr_p.unwrap_or(inj.cvr_p);
                inj.cvr_q = inputs.cvr_q.unwrap_or(inj.cvr_q);
            }
            for (g, dg) in fleet.dgs.iter().enumerate() {
                op.injections[dg.bus].p_gen += inputs.pv[g];
            }
            match compare_pf(feeder, &op) {
                Ok(c) => PfRow {
                    step: t,
                    load_mult,
                    max_error: Some(c.max_error),
                    mean_error: Some(c.mean_error),
                    sweep_iterations: Some(c.sweep_iterations),
                    error: None,
                },
                Err(e) => PfRow { step: t, load_mult, max_error: None, mean_error: None, sweep_iterations: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoltVarRow {
    /// `min` or `max`.
    pub loading: &'static str,
    pub step: usize,
    pub objective: Objective,
    pub taps: Vec<i32>,
    pub caps: Vec<bool>,
    /// Reactive setpoint per DG, kvar.
    pub q_dg_kvar: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoltVarTable {
    pub rows: Vec<VoltVarRow>,
    /// Energy and revenue rows agree at both loadings (taps and switches
    /// exactly, reactive setpoints within 1e-6 kvar).
    pub identical: bool,
}

/// Single-step optima at the lightest and heaviest loaded steps, for both
/// objectives. Empty when the feeder has no controllable devices.
pub fn voltvar_table(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    profiles: &Profiles,
    cfg: &MpcConfig,
) -> Result<VoltVarTable, RunError> {
    if fleet.regulators.is_empty() && fleet.capacitors.is_empty() && fleet.dgs.is_empty() {
        return Ok(VoltVarTable { rows: Vec::new(), identical: true });
    }
    let lm = &profiles.load_mult;
    let mut min_t = 0;
    let mut max_t = 0;
    for t in 1..lm.len() {
        if lm[t] < lm[min_t] {
            min_t = t;
        }
        if lm[t] > lm[max_t] {
            max_t = t;
        }
    }
    let soc = fleet.battery.as_ref().map_or(0.0, |b| b.soc_initial());
    let mut rows = Vec::new();
    for (loading, t) in [("min", min_t), ("max", max_t)] {
        for objective in [Objective::Energy, Objective::Revenue] {
            let mut c = cfg.clone();
            c.horizon = HorizonConfig { objective, window: 1, ..cfg.horizon.clone() };
            let out = mpc_step(feeder, fleet, profiles, &c, t, soc)?;
            rows.push(VoltVarRow {
                loading,
                step: t,
                objective,
                taps: out.action.taps,
                caps: out.action.caps,
                q_dg_kvar: out.action.q_dg.iter().map(|q| q * feeder.s_base_kva()).collect(),
            });
        }
    }
    let same = |a: &VoltVarRow, b: &VoltVarRow| {
        a.taps == b.taps && a.caps == b.caps && a.q_dg_kvar.iter().zip(&b.q_dg_kvar).all(|(x, y)| (x - y).abs() <= 1e-6)
    };
    let identical = same(&rows[0], &rows[1]) && same(&rows[2], &rows[3]);
    Ok(VoltVarTable { rows, identical })
}

/// Energy and revenue runs on the same inputs.
pub fn compare_objectives(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    profiles: &Profiles,
    cfg: &MpcConfig,
) -> Result<(SimulationResult, SimulationResult), Box<crate::mpc::RunFailure>> {
    let run = |objective| {
        let mut c = cfg.clone();
        c.horizon.objective = objective;
        run_day(feeder, fleet, profiles, &c)
    };
    Ok((run(Objective::Energy)?, run(Objective::Revenue)?))
}

/// The first window of the day as a standalone model, for export.
pub fn first_window_model(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    profiles: &Profiles,
    cfg: &HorizonConfig,
) -> Result<cvr_milp::MilpModel, crate::horizon::BuildError> {
    let w = cfg.window.min(profiles.steps());
    let soc = fleet.battery.as_ref().map_or(0.0, |b| b.soc_initial());
    Ok(build_horizon_problem(feeder, fleet, profiles, cfg, 0, w, soc)?.model)
}
