//! CSV and JSON renderings of run results.
//!
//! Floats are written in Rust's shortest round-trip form, so identical runs
//! give identical bytes.

use serde::Serialize;

use crate::experiments::{PfRow, SweepReport, VoltVarTable};
use crate::feeder::{DeviceFleet, Feeder};
use crate::mpc::SimulationResult;

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

/// Per-step table of a day run.
pub fn steps_csv(result: &SimulationResult, feeder: &Feeder, fleet: &DeviceFleet) -> String {
    let mut header: Vec<String> = [
        "step", "load_mult", "price_c_per_kwh", "p_t_kw", "p_s_kw", "p_cd_kw", "p_d_kw", "cost_cents", "soc", "v_min_pu",
        "v_max_pu", "model_v_min_pu", "model_v_max_pu", "model_p_t_kw",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..fleet.regulators.len()).map(|r| format!("tap_r{r}")));
    header.extend((0..fleet.capacitors.len()).map(|c| format!("cap_c{c}")));
    header.extend(fleet.dgs.iter().map(|d| format!("q_{}_kvar", d.id)));
    header.extend(["objective", "nodes", "lp_solves"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    let s_base = feeder.s_base_kva();
    for r in &result.records {
        let mut row = vec![
            r.step.to_string(),
            r.load_mult.to_string(),
            r.price.to_string(),
            r.p_t_kw.to_string(),
            r.p_s_kw.to_string(),
            r.p_cd_kw.to_string(),
            r.p_d_kw.to_string(),
            r.cost_cents.to_string(),
            r.soc.to_string(),
            r.v_min.to_string(),
            r.v_max.to_string(),
            r.model_v_min.to_string(),
            r.model_v_max.to_string(),
            r.model_p_t_kw.to_string(),
        ];
        row.extend(r.action.taps.iter().map(|t| t.to_string()));
        row.extend(r.action.caps.iter().map(|&c| u8::from(c).to_string()));
        row.extend(r.action.q_dg.iter().map(|q| (q * s_base).to_string()));
        row.extend([r.objective.to_string(), r.stats.nodes.to_string(), r.stats.lp_solves.to_string()]);
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    objective: crate::horizon::Objective,
    window: usize,
    price_b_c_per_kwh: f64,
    steps: usize,
    tau_h: f64,
    soc0: f64,
    complete: bool,
    totals: &'a crate::mpc::DayTotals,
}

pub fn summary_json(result: &SimulationResult) -> String {
    let s = Summary {
        objective: result.objective,
        window: result.window,
        price_b_c_per_kwh: result.price_b,
        steps: result.records.len(),
        tau_h: result.tau_h,
        soc0: result.soc0,
        complete: result.complete,
        totals: &result.totals,
    };
    serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"
}

/// One JSON object per step with the branch-and-bound counters.
pub fn solver_stats_jsonl(result: &SimulationResult) -> String {
    let mut out = String::new();
    for r in &result.records {
        #[derive(Serialize)]
        struct Line<'a> {
            step: usize,
            objective: f64,
            #[serde(flatten)]
            stats: &'a cvr_milp::SolveStats,
        }
        out.push_str(&serde_json::to_string(&Line { step: r.step, objective: r.objective, stats: &r.stats }).unwrap());
        out.push('\n');
    }
    out
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("price_b_c_per_kwh,discharged_kwh,energy_kwh,cost_cents,depreciation_cents,error\n");
    for r in &report.rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.price_b,
            opt(&r.discharged_kwh),
            opt(&r.energy_kwh),
            opt(&r.cost_cents),
            opt(&r.depreciation_cents),
            err
        ));
    }
    out
}

pub fn validate_pf_csv(rows: &[PfRow]) -> String {
    let mut out = String::from("step,load_mult,max_error_pu,mean_error_pu,sweep_iterations,error\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            r.load_mult,
            opt(&r.max_error),
            opt(&r.mean_error),
            opt(&r.sweep_iterations),
            err
        ));
    }
    out
}

pub fn voltvar_csv(table: &VoltVarTable, fleet: &DeviceFleet) -> String {
    let mut header = vec!["loading".to_string(), "step".into(), "objective".into()];
    header.extend((0..fleet.regulators.len()).map(|r| format!("tap_r{r}")));
    header.extend((0..fleet.capacitors.len()).map(|c| format!("cap_c{c}")));
    header.extend(fleet.dgs.iter().map(|d| format!("q_{}_kvar", d.id)));
    let mut out = header.join(",");
    out.push('\n');
    for r in &table.rows {
        let obj = match r.objective {
            crate::horizon::Objective::Energy => "energy",
            crate::horizon::Objective::Revenue => "revenue",
        };
        let mut row = vec![r.loading.to_string(), r.step.to_string(), obj.to_string()];
        row.extend(r.taps.iter().map(|t| t.to_string()));
        row.extend(r.caps.iter().map(|&c| u8::from(c).to_string()));
        row.extend(r.q_dg_kvar.iter().map(|q| q.to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
