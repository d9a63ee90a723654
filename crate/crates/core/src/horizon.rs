//! The scheduling MILP for one prediction window.
//!
//! For each step of the window: linear power flow, CVR loads, inverter,
//! capacitor and regulator blocks, the voltage band, and the substation
//! purchase `P_T = s_base·Σ P_root + p_cd` (kW). The battery block couples the
//! steps. Objectives:
//!
//! - energy: `Σ P_T` (kW summed over steps);
//! - revenue: `Σ price·P_T·τ + price_b·p_d·τ` (cents).
//!
//! Both add `1e-6·Σ|p_cd|` so that among equal-cost battery schedules the one
//! with the least cycling is returned.

use cvr_milp::{LinExpr, MilpModel, Sense, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bess::{bess_constraints, BessOptions, BessVars};
use crate::devices::{
    capacitor_constraints, cvr_load_constraints, inverter_q_bounds, regulator_constraints, CapVars, DeviceError, RegulatorVars,
    TapSet,
};
use crate::feeder::{DeviceFleet, Feeder};
use crate::powerflow::{linear_pf_constraints, NetworkVars};
use crate::profiles::{Profiles, StepInputs};
use crate::{V_MAX, V_MIN};

/// Weight of `Σ|p_cd|` (per kW) in either objective.
pub const CYCLING_WEIGHT: f64 = 1e-6;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Energy,
    Revenue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonConfig {
    pub objective: Objective,
    /// Prediction window length in steps.
    pub window: usize,
    /// Battery depreciation price, cents per kWh discharged.
    pub price_b: f64,
    pub taps: TapSet,
    /// Require the state of charge after each window to be at least the day's initial state.
    pub terminal_soc: bool,
    /// Include the discharge-magnitude block under the energy objective too
    /// (it is always present under the revenue objective).
    pub force_bigm: bool,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Energy,
            window: 8,
            price_b: 0.0,
            taps: TapSet::Evenly(9),
            terminal_soc: false,
            force_bigm: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("window [{m}, {end}) runs past the {steps}-step profile")]
    Window { m: usize, end: usize, steps: usize },
    #[error("initial state of charge {soc} outside [{lo}, {hi}]")]
    Soc { soc: f64, lo: f64, hi: f64 },
    #[error("step {step}: {source}")]
    Device { step: usize, source: DeviceError },
    #[error(transparent)]
    Model(#[from] cvr_milp::ModelError),
}

/// Handles of one step of the window.
#[derive(Clone, Debug)]
pub struct StepVars {
    pub t: usize,
    pub inputs: StepInputs,
    pub net: NetworkVars,
    pub regs: Vec<RegulatorVars>,
    pub caps: Vec<CapVars>,
    pub q_dg: Vec<VarId>,
    /// Substation purchase, kW.
    pub p_t: VarId,
}

#[derive(Clone, Debug)]
pub struct HorizonProblem {
    pub model: MilpModel,
    pub m: usize,
    pub steps: Vec<StepVars>,
    pub bess: Option<BessVars>,
    pub objective: Objective,
    pub tau_h: f64,
}

/// Applied controls for one step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlAction {
    /// Tap per regulator.
    pub taps: Vec<i32>,
    /// Switch state per capacitor.
    pub caps: Vec<bool>,
    /// Reactive setpoint per DG, per-unit.
    pub q_dg: Vec<f64>,
    /// Battery power, kW (charge positive).
    pub p_cd: f64,
}

/// Battery trajectory of a solved window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowPlan {
    pub m: usize,
    pub p_cd: Vec<f64>,
    /// Only present when the discharge-magnitude block was in the model.
    pub p_d: Option<Vec<f64>>,
    pub soc: Vec<f64>,
}

pub fn build_horizon_problem(
    feeder: &Feeder,
    fleet: &DeviceFleet,
    profiles: &Profiles,
    cfg: &HorizonConfig,
    m: usize,
    w: usize,
    soc_m: f64,
) -> Result<HorizonProblem, BuildError> {
    let steps = profiles.steps();
    if w == 0 || m + w > steps {
        return Err(BuildError::Window { m, end: m + w, steps });
    }
    let tau_h = profiles.tau_h();
    if let Some(b) = &fleet.battery {
        if !(b.e_minus..=b.e_plus).contains(&soc_m) {
            return Err(BuildError::Soc { soc: soc_m, lo: b.e_minus, hi: b.e_plus });
        }
    }
    let mut model = MilpModel::new(format!("window_m{m}_w{w}"));

    let tap_sets = fleet
        .regulators
        .iter()
        .map(|r| cfg.taps.positions(r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| BuildError::Device { step: m, source })?;

    let topo = feeder.topology();
    let mut step_vars = Vec::with_capacity(w);
    for k in 0..w {
        let t = m + k;
        let inputs = profiles.step_inputs(t, feeder, fleet);
        let mut net = NetworkVars::allocate(&mut model, feeder, t, V_MIN, V_MAX)?;
        for j in feeder.load_buses() {
            let b = &feeder.buses()[j];
            let cvr_p = inputs.cvr_p.unwrap_or(b.cvr_p);
            let cvr_q = inputs.cvr_q.unwrap_or(b.cvr_q);
            let (pl, ql) = cvr_load_constraints(
                &mut model,
                &format!("b{}_t{t}", b.id),
                b.p0 * inputs.load_mult,
                b.q0 * inputs.load_mult,
                cvr_p,
                cvr_q,
                net.v[j],
            )?;
            net.p_load[j] = Some(pl);
            net.q_load[j] = Some(ql);
        }
        let mut q_dg = Vec::with_capacity(fleet.dgs.len());
        for (g, dg) in fleet.dgs.iter().enumerate() {
            let (lo, hi) = inverter_q_bounds(dg.s_rated, inputs.pv[g]).map_err(|source| BuildError::Device { step: t, source })?;
            let q = model.add_continuous(format!("qdg_{}_t{t}", dg.id), lo, hi)?;
            net.q_gen[dg.bus].push(q);
            net.p_gen[dg.bus] += inputs.pv[g];
            q_dg.push(q);
        }
        let mut caps = Vec::with_capacity(fleet.capacitors.len());
        for (c, cap) in fleet.capacitors.iter().enumerate() {
            let cv = capacitor_constraints(&mut model, &format!("c{c}_t{t}"), cap.q_rated, net.v[cap.bus])?;
            net.q_cap[cap.bus].push(cv.q);
            caps.push(cv);
        }
        let mut regs = Vec::with_capacity(fleet.regulators.len());
        for (r, reg) in fleet.regulators.iter().enumerate() {
            let (i, j) = topo.ends[reg.edge];
            regs.push(regulator_constraints(&mut model, &format!("r{r}_t{t}"), reg, &tap_sets[r], net.v[i], net.v[j])?);
        }
        linear_pf_constraints(&mut model, feeder, &net, t)?;

        let p_t = model.add_continuous(format!("PT_t{t}"), f64::NEG_INFINITY, f64::INFINITY)?;
        step_vars.push(StepVars { t, inputs, net, regs, caps, q_dg, p_t });
    }

    // The battery comes after the network so that branching, which takes the
    // lowest-index fractional binary, settles taps and switches first.
    let include_bigm = cfg.objective == Objective::Revenue || cfg.force_bigm;
    let bess = match &fleet.battery {
        Some(params) => {
            let params = crate::bess::BessParams { tau_h, ..params.clone() };
            let opts = BessOptions { include_bigm, terminal_soc: cfg.terminal_soc.then(|| params.soc_initial()) };
            Some(bess_constraints(&mut model, &params, m, w, soc_m, &opts)?)
        }
        None => None,
    };

    for (k, s) in step_vars.iter().enumerate() {
        let mut purchase = LinExpr::term(s.p_t, 1.0);
        for &e in &topo.children[feeder.root()] {
            purchase.add(s.net.p[e], -feeder.s_base_kva());
        }
        if let Some(b) = &bess {
            purchase.add(b.p_cd[k], -1.0);
        }
        model.add_constraint(format!("purchase_t{}", s.t), purchase, Sense::Eq, 0.0)?;
    }

    let mut obj = LinExpr::new();
    for (k, s) in step_vars.iter().enumerate() {
        match cfg.objective {
            Objective::Energy => obj.add(s.p_t, 1.0),
            Objective::Revenue => obj.add(s.p_t, s.inputs.price * tau_h),
        };
        if let Some(b) = &bess {
            obj.add(b.abs[k], CYCLING_WEIGHT);
            if cfg.objective == Objective::Revenue && cfg.price_b != 0.0 {
                let pd = b.big_m.as_ref().expect("revenue windows carry the Big-M block").p_d[k];
                obj.add(pd, cfg.price_b * tau_h);
            }
        }
    }
    model.set_objective(obj)?;
    Ok(HorizonProblem { model, m, steps: step_vars, bess, objective: cfg.objective, tau_h })
}

impl HorizonProblem {
    pub fn window(&self) -> usize {
        self.steps.len()
    }

    /// Controls at window step `k` of a solution.
    pub fn action(&self, values: &[f64], k: usize) -> ControlAction {
        let s = &self.steps[k];
        ControlAction {
            taps: s.regs.iter().map(|r| r.selected(values)).collect(),
            caps: s.caps.iter().map(|c| values[c.u.index()] > 0.5).collect(),
            q_dg: s.q_dg.iter().map(|q| values[q.index()]).collect(),
            p_cd: self.bess.as_ref().map_or(0.0, |b| values[b.p_cd[k].index()]),
        }
    }

    pub fn plan(&self, values: &[f64]) -> WindowPlan {
        let get = |vs: &[VarId]| vs.iter().map(|v| values[v.index()]).collect::<Vec<_>>();
        match &self.bess {
            Some(b) => WindowPlan {
                m: self.m,
                p_cd: get(&b.p_cd),
                p_d: b.big_m.as_ref().map(|bm| get(&bm.p_d)),
                soc: get(&b.soc),
            },
            None => WindowPlan { m: self.m, p_cd: vec![0.0; self.window()], p_d: None, soc: Vec::new() },
        }
    }

    /// Squared voltages of window step `k`.
    pub fn voltages(&self, values: &[f64], k: usize) -> Vec<f64> {
        self.steps[k].net.v.iter().map(|v| values[v.index()]).collect()
    }

    pub fn purchase_kw(&self, values: &[f64], k: usize) -> f64 {
        values[self.steps[k].p_t.index()]
    }
}
