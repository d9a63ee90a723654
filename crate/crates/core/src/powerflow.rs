//! Branch-flow power flow on radial feeders.
//!
//! Voltages are squared magnitudes (`v`), flows are sending-end `P`, `Q`, and
//! `l` is the squared current, all per-unit. The linear model drops the loss
//! terms; the nonlinear sweep keeps them:
//!
//! ```text
//! P_ij = p_j + Σ_k P_jk + r_ij·l_ij
//! v_j  = v_i − 2(r_ij·P_ij + x_ij·Q_ij) + (r_ij² + x_ij²)·l_ij
//! l_ij = (P_ij² + Q_ij²) / v_i
//! ```
//!
//! Regulator edges have no impedance and scale voltage by their squared ratio.
//! Voltage-dependent injections (loads, capacitors) are re-evaluated at the
//! current voltages each pass, so both solvers return self-consistent points.

use cvr_milp::{ConId, LinExpr, MilpModel, ModelError, Sense, VarId};
use serde::Serialize;
use thiserror::Error;

use crate::devices::cvr_load_eval;
use crate::feeder::{EdgeKind, Feeder};

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize)]
pub struct BusInjection {
    /// Load at nominal voltage.
    pub p_load: f64,
    pub q_load: f64,
    pub cvr_p: f64,
    pub cvr_q: f64,
    pub p_gen: f64,
    pub q_gen: f64,
    /// Switched-in capacitor rating; injects `q_cap_rated·v`.
    pub q_cap_rated: f64,
}

impl BusInjection {
    /// Net withdrawal `(p, q)` at squared voltage `v`, plus the load itself.
    fn at(&self, v: f64) -> ((f64, f64), (f64, f64)) {
        let (pl, ql) = cvr_load_eval(self.p_load, self.q_load, self.cvr_p, self.cvr_q, v);
        ((pl - self.p_gen, ql - self.q_gen - self.q_cap_rated * v), (pl, ql))
    }

    fn voltage_dependent(&self) -> bool {
        (self.cvr_p != 0.0 && self.p_load != 0.0) || (self.cvr_q != 0.0 && self.q_load != 0.0) || self.q_cap_rated != 0.0
    }
}

/// Everything a power-flow solve needs besides the feeder.
#[derive(Clone, Debug, PartialEq)]
pub struct Operating {
    pub injections: Vec<BusInjection>,
    /// Squared voltage ratio per edge; 1 for lines.
    pub ratios: Vec<f64>,
}

impl Operating {
    /// Bus loads scaled by `load_mult` with the feeder's CVR coefficients, no
    /// devices active, regulators at unity.
    pub fn nominal(feeder: &Feeder, load_mult: f64) -> Self {
        let injections = feeder
            .buses()
            .iter()
            .map(|b| BusInjection {
                p_load: b.p0 * load_mult,
                q_load: b.q0 * load_mult,
                cvr_p: b.cvr_p,
                cvr_q: b.cvr_q,
                ..Default::default()
            })
            .collect();
        Self { injections, ratios: vec![1.0; feeder.edges().len()] }
    }

    /// Fixed per-bus withdrawals, no voltage dependence.
    pub fn constant_power(feeder: &Feeder, p: &[f64], q: &[f64]) -> Self {
        let injections = p.iter().zip(q).map(|(&p, &q)| BusInjection { p_load: p, q_load: q, ..Default::default() }).collect();
        Self { injections, ratios: vec![1.0; feeder.edges().len()] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodalSolution {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    /// Load drawn at each bus at the solved voltage.
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    pub iterations: usize,
}

impl NodalSolution {
    /// Active power leaving the substation, per-unit.
    pub fn substation_p(&self, feeder: &Feeder) -> f64 {
        feeder.topology().children[feeder.root()].iter().map(|&e| self.p[e]).sum()
    }

    pub fn losses(&self, feeder: &Feeder) -> f64 {
        feeder.edges().iter().zip(&self.l).map(|(e, l)| e.r * l).sum()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.v.iter().map(|v| v.sqrt()).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfError {
    #[error("power flow did not converge in {iterations} iterations (last |dv| = {last_delta:e})")]
    NotConverged { iterations: usize, last_delta: f64, trace: Vec<f64> },
    #[error("voltage collapsed to {v} at bus {bus}")]
    Collapse { bus: u32, v: f64 },
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

/// Linear (lossless) power flow.
///
/// With constant injections this is one upstream and one downstream pass;
/// voltage-dependent injections are iterated to a fixed point (tolerance 1e-14).
pub fn solve_linear(feeder: &Feeder, op: &Operating) -> Result<NodalSolution, PfError> {
    let dependent = op.injections.iter().any(|i| i.voltage_dependent());
    let opts = SweepOptions { tol: 1e-14, max_iter: if dependent { 200 } else { 1 } };
    sweep(feeder, op, &opts, false)
}

pub fn solve_nonlinear_sweep(feeder: &Feeder, op: &Operating, opts: &SweepOptions) -> Result<NodalSolution, PfError> {
    sweep(feeder, op, opts, true)
}

fn sweep(feeder: &Feeder, op: &Operating, opts: &SweepOptions, lossy: bool) -> Result<NodalSolution, PfError> {
    let topo = feeder.topology();
    let edges = feeder.edges();
    let n = feeder.num_buses();
    let mut v = vec![feeder.v0(); n];
    let mut p = vec![0.0; edges.len()];
    let mut q = vec![0.0; edges.len()];
    let mut l = vec![0.0; edges.len()];
    let mut net = vec![(0.0, 0.0); n];
    let mut trace = Vec::new();
    for iter in 1..=opts.max_iter {
        for (i, inj) in op.injections.iter().enumerate() {
            net[i] = inj.at(v[i]).0;
        }
        for &j in topo.order.iter().rev() {
            let Some(e) = topo.parent_edge[j] else { continue };
            let (mut pe, mut qe) = net[j];
            for &c in &topo.children[j] {
                pe += p[c];
                qe += q[c];
            }
            p[e] = pe + edges[e].r * l[e];
            q[e] = qe + edges[e].x * l[e];
        }
        let mut new_v = v.clone();
        for &j in &topo.order {
            let Some(e) = topo.parent_edge[j] else { continue };
            let i = topo.ends[e].0;
            let edge = &edges[e];
            new_v[j] = match edge.kind {
                EdgeKind::Regulator => op.ratios[e] * new_v[i],
                EdgeKind::Line => {
                    let z2 = edge.r * edge.r + edge.x * edge.x;
                    new_v[i] - 2.0 * (edge.r * p[e] + edge.x * q[e]) + z2 * l[e]
                }
            };
            if !(new_v[j] > 0.0) {
                return Err(PfError::Collapse { bus: feeder.buses()[j].id, v: new_v[j] });
            }
        }
        if lossy {
            for (e, &(i, _)) in topo.ends.iter().enumerate() {
                l[e] = (p[e] * p[e] + q[e] * q[e]) / new_v[i];
            }
        }
        let delta = v.iter().zip(&new_v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = new_v;
        trace.push(delta);
        // A constant-injection linear solve is exact after one pass.
        if delta < opts.tol || (!lossy && opts.max_iter == 1) {
            let (p_load, q_load) = op.injections.iter().zip(&v).map(|(inj, &vi)| inj.at(vi).1).unzip();
            return Ok(NodalSolution { v, p, q, l, p_load, q_load, iterations: iter });
        }
    }
    Err(PfError::NotConverged { iterations: opts.max_iter, last_delta: *trace.last().unwrap_or(&f64::NAN), trace })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PfComparison {
    /// `|√v_lin − √v_nl|` per bus, per-unit.
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// Mean over non-substation buses.
    pub mean_error: f64,
    pub sweep_iterations: usize,
}

pub fn compare_pf(feeder: &Feeder, op: &Operating) -> Result<PfComparison, PfError> {
    let lin = solve_linear(feeder, op)?;
    let nl = solve_nonlinear_sweep(feeder, op, &SweepOptions::default())?;
    let errors: Vec<f64> = lin.v.iter().zip(&nl.v).map(|(a, b)| (a.sqrt() - b.sqrt()).abs()).collect();
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let others = feeder.num_buses() - 1;
    let mean_error = if others == 0 { 0.0 } else { errors.iter().sum::<f64>() / others as f64 };
    Ok(PfComparison { errors, max_error, mean_error, sweep_iterations: nl.iterations })
}

/// Variable handles of one time step of the linear network model.
#[derive(Clone, Debug)]
pub struct NetworkVars {
    pub v: Vec<VarId>,
    pub p: Vec<VarId>,
    pub q: Vec<VarId>,
    pub p_load: Vec<Option<VarId>>,
    pub q_load: Vec<Option<VarId>>,
    /// Inverter reactive injections at each bus.
    pub q_gen: Vec<Vec<VarId>>,
    /// Capacitor injections at each bus.
    pub q_cap: Vec<Vec<VarId>>,
    /// Active generation at each bus (known data, not a decision).
    pub p_gen: Vec<f64>,
}

impl NetworkVars {
    /// Allocates `v` (substation fixed to `v0`, others within `[v_min, v_max]`)
    /// and free edge flows for step `t`; device and load handles start empty.
    pub fn allocate(model: &mut MilpModel, feeder: &Feeder, t: usize, v_min: f64, v_max: f64) -> Result<Self, ModelError> {
        let n = feeder.num_buses();
        let mut v = Vec::with_capacity(n);
        for (i, b) in feeder.buses().iter().enumerate() {
            let (lo, hi) = if i == feeder.root() { (feeder.v0(), feeder.v0()) } else { (v_min, v_max) };
            v.push(model.add_continuous(format!("v_b{}_t{t}", b.id), lo, hi)?);
        }
        let mut p = Vec::new();
        let mut q = Vec::new();
        for e in 0..feeder.edges().len() {
            p.push(model.add_continuous(format!("P_e{e}_t{t}"), f64::NEG_INFINITY, f64::INFINITY)?);
            q.push(model.add_continuous(format!("Q_e{e}_t{t}"), f64::NEG_INFINITY, f64::INFINITY)?);
        }
        Ok(Self {
            v,
            p,
            q,
            p_load: vec![None; n],
            q_load: vec![None; n],
            q_gen: vec![Vec::new(); n],
            q_cap: vec![Vec::new(); n],
            p_gen: vec![0.0; n],
        })
    }
}

/// Linear power-flow rows for step `t`: the substation voltage pin, active and
/// reactive balance at every other bus, and the voltage drop along each line.
/// Regulator edges get no voltage row here; the regulator block ties their ends.
pub fn linear_pf_constraints(model: &mut MilpModel, feeder: &Feeder, vars: &NetworkVars, t: usize) -> Result<Vec<ConId>, ModelError> {
    let topo = feeder.topology();
    let root = feeder.root();
    let mut rows = Vec::new();
    rows.push(model.add_constraint(format!("vpin_t{t}"), LinExpr::term(vars.v[root], 1.0), Sense::Eq, feeder.v0())?);
    for &j in &topo.order {
        let Some(e) = topo.parent_edge[j] else { continue };
        let id = feeder.buses()[j].id;
        let mut pb = LinExpr::term(vars.p[e], 1.0);
        let mut qb = LinExpr::term(vars.q[e], 1.0);
        for &c in &topo.children[j] {
            pb.add(vars.p[c], -1.0);
            qb.add(vars.q[c], -1.0);
        }
        if let Some(pl) = vars.p_load[j] {
            pb.add(pl, -1.0);
        }
        if let Some(ql) = vars.q_load[j] {
            qb.add(ql, -1.0);
        }
        for &g in vars.q_gen[j].iter().chain(&vars.q_cap[j]) {
            qb.add(g, 1.0);
        }
        rows.push(model.add_constraint(format!("pbal_b{id}_t{t}"), pb, Sense::Eq, -vars.p_gen[j])?);
        rows.push(model.add_constraint(format!("qbal_b{id}_t{t}"), qb, Sense::Eq, 0.0)?);
    }
    for (e, edge) in feeder.edges().iter().enumerate() {
        if edge.kind != EdgeKind::Line {
            continue;
        }
        let (i, j) = topo.ends[e];
        let drop = LinExpr::from([(vars.v[j], 1.0), (vars.v[i], -1.0), (vars.p[e], 2.0 * edge.r), (vars.q[e], 2.0 * edge.x)]);
        rows.push(model.add_constraint(format!("vdrop_e{e}_t{t}"), drop, Sense::Eq, 0.0)?);
    }
    Ok(rows)
}
