mod common;

use approx::assert_abs_diff_eq;
use common::{case, peak_step, rel};
use cvr_core::bess::soc_update;
use cvr_core::horizon::{build_horizon_problem, ControlAction};
use cvr_core::mpc::{apply_to_plant, mpc_step, RunError};
use cvr_core::oracle::{brute_force, EnumerationSpec};
use cvr_core::{run_day, MpcConfig, Objective};

fn cfg(objective: Objective, window: usize, price_b: f64) -> MpcConfig {
    let mut c = MpcConfig::default();
    c.horizon.objective = objective;
    c.horizon.window = window;
    c.horizon.price_b = price_b;
    c
}

fn idle(fleet: &cvr_core::DeviceFleet) -> ControlAction {
    ControlAction {
        taps: vec![0; fleet.regulators.len()],
        caps: vec![false; fleet.capacitors.len()],
        q_dg: vec![0.0; fleet.dgs.len()],
        p_cd: 0.0,
    }
}

#[test]
fn single_step_purchase_on_two_buses_is_the_cvr_load() {
    let (feeder, fleet, profiles) = case("2bus");
    let m = peak_step(&profiles);
    let lm = profiles.load_mult[m];
    let out = mpc_step(&feeder, &fleet, &profiles, &cfg(Objective::Energy, 1, 0.0), m, 0.0).unwrap();
    let (p0, q0, r, x, a, b) = (0.1 * lm, 0.05 * lm, 0.01, 0.02, 0.6, 3.0);
    let d = -2.0 * (r * p0 + x * q0) / (1.0 + r * p0 * a + x * q0 * b);
    assert_abs_diff_eq!(out.model_v[1], 1.0 + d, epsilon = 1e-9);
    assert_abs_diff_eq!(out.model_p_t_kw, 1000.0 * p0 * (1.0 + a / 2.0 * d), epsilon = 1e-6);
}

#[test]
fn energy_objective_never_charges_within_one_step() {
    let (feeder, fleet, profiles) = case("4bus");
    let e_minus = fleet.battery.as_ref().unwrap().e_minus;
    for m in [0, 30, peak_step(&profiles)] {
        let c = cfg(Objective::Energy, 1, 0.0);
        let at_floor = mpc_step(&feeder, &fleet, &profiles, &c, m, e_minus).unwrap();
        assert_eq!(at_floor.action.p_cd, 0.0, "step {m}");
        // Above the floor the purchase falls with every kW discharged.
        let above = mpc_step(&feeder, &fleet, &profiles, &c, m, 0.5).unwrap();
        assert_abs_diff_eq!(above.action.p_cd, -100.0, epsilon = 1e-9);
    }
}

#[test]
fn revenue_objective_buys_cheap_and_sells_dear() {
    let (feeder, fleet, mut profiles) = case("4bus");
    profiles.price[0] = 10.0;
    profiles.price[1] = 60.0;
    let c = cfg(Objective::Revenue, 2, 0.0);
    let out = mpc_step(&feeder, &fleet, &profiles, &c, 0, 0.25).unwrap();
    // 100 kW for a quarter hour lifts a 400 kWh battery by 0.0625, all of which is sold back.
    assert_abs_diff_eq!(out.plan.p_cd[0], 100.0, epsilon = 1e-6);
    assert_abs_diff_eq!(out.plan.p_cd[1], -100.0, epsilon = 1e-6);

    let problem = build_horizon_problem(&feeder, &fleet, &profiles, &c.horizon, 0, 2, 0.25).unwrap();
    let best = brute_force(&problem.model, &EnumerationSpec::default()).unwrap();
    assert!(rel(best.objective, out.objective) <= 1e-6);
}

#[test]
fn next_window_follows_the_previous_plan() {
    let (feeder, fleet, profiles) = case("4bus");
    let c = cfg(Objective::Energy, 2, 0.0);
    let first = mpc_step(&feeder, &fleet, &profiles, &c, 94, 0.5).unwrap();
    let params = fleet.battery.as_ref().unwrap();
    let soc = soc_update(0.5, first.action.p_cd, params);
    let second = mpc_step(&feeder, &fleet, &profiles, &c, 95, soc).unwrap();
    let planned = &first.trajectory[1];
    assert_eq!(second.action.taps, planned.taps);
    assert_eq!(second.action.caps, planned.caps);
    assert_abs_diff_eq!(second.action.p_cd, planned.p_cd, epsilon = 1e-6);
    for (a, b) in second.action.q_dg.iter().zip(&planned.q_dg) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
}

#[test]
fn infeasible_window_reports_its_step() {
    let (feeder, fleet, mut profiles) = case("2bus");
    profiles.load_mult[5] = 80.0;
    let failure = run_day(&feeder, &fleet, &profiles, &cfg(Objective::Energy, 1, 0.0)).unwrap_err();
    assert!(matches!(failure.error, RunError::Infeasible { step: 5, .. }), "{:?}", failure.error);
    assert!(failure.error.lp_dump().is_some_and(|lp| lp.contains("vdrop_e0_t5")));
    assert_eq!(failure.partial.records.len(), 5);
    assert!(!failure.partial.complete);
}

#[test]
fn unloaded_plant_with_idle_devices_is_flat() {
    let (feeder, fleet, profiles) = case("4bus");
    let mut inputs = profiles.step_inputs(0, &feeder, &fleet);
    inputs.load_mult = 0.0;
    inputs.pv.iter_mut().for_each(|p| *p = 0.0);
    let plant = apply_to_plant(&feeder, &fleet, &idle(&fleet), &inputs, &Default::default()).unwrap();
    assert_abs_diff_eq!(plant.p_s_kw, 0.0, epsilon = 1e-12);
    for v in &plant.v {
        assert_abs_diff_eq!(*v, 1.04, epsilon = 1e-12);
    }
}

#[test]
fn scheduled_controls_hold_plant_voltages_at_peak() {
    let (feeder, fleet, profiles) = case("4bus");
    let m = peak_step(&profiles);
    let out = mpc_step(&feeder, &fleet, &profiles, &cfg(Objective::Energy, 1, 0.0), m, 0.5).unwrap();
    let plant = apply_to_plant(&feeder, &fleet, &out.action, &profiles.step_inputs(m, &feeder, &fleet), &Default::default()).unwrap();
    assert!(plant.v_min >= 0.948 && plant.v_max <= 1.052, "{} {}", plant.v_min, plant.v_max);
}

#[test]
fn battery_power_adds_to_the_substation_purchase() {
    let (feeder, fleet, profiles) = case("4bus");
    let inputs = profiles.step_inputs(40, &feeder, &fleet);
    let mut a = idle(&fleet);
    let base = apply_to_plant(&feeder, &fleet, &a, &inputs, &Default::default()).unwrap();
    a.p_cd = 100.0;
    let charged = apply_to_plant(&feeder, &fleet, &a, &inputs, &Default::default()).unwrap();
    assert_eq!(charged.p_s_kw, base.p_s_kw);
    assert_abs_diff_eq!(charged.p_t_kw, charged.p_s_kw + 100.0, epsilon = 1e-12);
}

#[test]
fn flat_tariff_makes_both_objectives_cost_the_same() {
    let (feeder, fleet, mut profiles) = case("4bus");
    profiles.price.iter_mut().for_each(|p| *p = 20.0);
    let e = run_day(&feeder, &fleet, &profiles, &cfg(Objective::Energy, 4, 0.0)).unwrap();
    let r = run_day(&feeder, &fleet, &profiles, &cfg(Objective::Revenue, 4, 0.0)).unwrap();
    assert!(rel(e.totals.cost_cents, r.totals.cost_cents) <= 1e-9, "{} {}", e.totals.cost_cents, r.totals.cost_cents);
}

#[test]
fn depreciation_above_every_price_idles_the_battery() {
    let (feeder, fleet, profiles) = case("4bus");
    let top = profiles.price.iter().copied().fold(0.0, f64::max);
    let day = run_day(&feeder, &fleet, &profiles, &cfg(Objective::Revenue, 8, top + 1.0)).unwrap();
    assert!(day.records.iter().all(|r| r.p_cd_kw == 0.0));
    assert_eq!(day.totals.final_soc, day.soc0);
}

#[test]
fn free_cycling_uses_the_battery_both_ways() {
    let (feeder, fleet, profiles) = case("4bus");
    let day = run_day(&feeder, &fleet, &profiles, &cfg(Objective::Revenue, 8, 0.0)).unwrap();
    assert!(day.totals.charged_kwh > 0.0 && day.totals.discharged_kwh > 0.0);
}

#[test]
fn recorded_soc_follows_the_applied_power() {
    let (feeder, fleet, profiles) = case("4bus");
    let params = fleet.battery.clone().unwrap();
    let day = run_day(&feeder, &fleet, &profiles, &cfg(Objective::Revenue, 8, 0.0)).unwrap();
    let mut soc = day.soc0;
    for r in &day.records {
        soc = soc_update(soc, r.p_cd_kw, &params);
        assert_abs_diff_eq!(r.soc, soc, epsilon = 1e-9);
        assert!((params.e_minus..=params.e_plus).contains(&r.soc));
    }
}
