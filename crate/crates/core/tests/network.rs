mod common;

use approx::assert_abs_diff_eq;
use common::{case, peak_step};
use cvr_core::experiments::validate_pf;
use cvr_core::feeder::{feeder_to_json, parse_feeder};
use cvr_core::powerflow::{compare_pf, linear_pf_constraints, solve_linear, NetworkVars, Operating};
use cvr_core::profiles::parse_profiles;
use cvr_core::{V_MAX, V_MIN};
use cvr_milp::MilpModel;

#[test]
fn bundled_feeders_have_the_expected_devices() {
    let (f2, d2, p2) = case("2bus");
    assert_eq!((f2.num_buses(), f2.edges().len()), (2, 1));
    assert!(!d2.has_discrete_devices() && d2.dgs.is_empty() && d2.battery.is_none());
    assert_eq!(p2.steps(), 96);

    let (f4, d4, _) = case("4bus");
    assert_eq!(f4.num_buses(), 4);
    assert_eq!((d4.regulators.len(), d4.capacitors.len(), d4.dgs.len()), (1, 1, 1));
    assert!(d4.battery.is_some());

    let (f13, d13, p13) = case("13bus");
    assert_eq!(f13.num_buses(), 13);
    assert_eq!((d13.regulators.len(), d13.capacitors.len(), d13.dgs.len()), (1, 2, 3));
    assert_eq!(p13.pv_kw.len(), 3);
}

#[test]
fn feeder_json_round_trips() {
    for name in ["2bus", "4bus", "13bus"] {
        let (feeder, fleet, _) = case(name);
        let (again, fleet2) = parse_feeder(&feeder_to_json(&feeder, &fleet)).unwrap();
        assert_eq!(feeder_to_json(&again, &fleet2), feeder_to_json(&feeder, &fleet), "{name}");
    }
}

#[test]
fn profile_csv_round_trips() {
    let (_, _, p) = case("13bus");
    let again = parse_profiles(p.to_csv().as_bytes()).unwrap();
    assert_eq!(again, p);
}

fn pf_row_count(name: &str) -> usize {
    let (feeder, _, _) = case(name);
    let mut model = MilpModel::new("count");
    let vars = NetworkVars::allocate(&mut model, &feeder, 0, V_MIN, V_MAX).unwrap();
    linear_pf_constraints(&mut model, &feeder, &vars, 0).unwrap().len()
}

#[test]
fn linear_rows_are_pin_balances_and_line_drops() {
    // Pin, two balances per non-root bus, one drop per line (regulators excluded).
    assert_eq!(pf_row_count("2bus"), 1 + 2 + 1);
    assert_eq!(pf_row_count("4bus"), 1 + 6 + 2);
    assert_eq!(pf_row_count("13bus"), 1 + 24 + 11);
}

#[test]
fn two_bus_linear_voltage_has_closed_form() {
    let (feeder, _, _) = case("2bus");
    // Load at 100 kW + j50 kvar on a 1 MVA base with r = 0.01, x = 0.02.
    let (p0, q0, r, x, a, b) = (0.1, 0.05, 0.01, 0.02, 0.6, 3.0);
    let d = -2.0 * (r * p0 + x * q0) / (1.0 + r * p0 * a + x * q0 * b);
    let pf = solve_linear(&feeder, &Operating::nominal(&feeder, 1.0)).unwrap();
    assert_abs_diff_eq!(pf.v[1], 1.0 + d, epsilon = 1e-12);
    assert_abs_diff_eq!(pf.substation_p(&feeder), p0 * (1.0 + a / 2.0 * d), epsilon = 1e-12);
}

#[test]
fn linearization_error_stays_small_across_the_day() {
    for name in ["2bus", "4bus", "13bus"] {
        let (feeder, fleet, profiles) = case(name);
        let rows = validate_pf(&feeder, &fleet, &profiles, 1.0);
        assert_eq!(rows.len(), 96);
        for r in &rows {
            assert!(r.error.is_none(), "{name} step {}: {:?}", r.step, r.error);
            assert!(r.max_error.unwrap() <= 0.005, "{name} step {}", r.step);
        }
    }
}

#[test]
fn thirteen_bus_peak_error_is_small_and_grows_with_load() {
    let (feeder, fleet, profiles) = case("13bus");
    let rows = validate_pf(&feeder, &fleet, &profiles, 1.0);
    let peak = rows[peak_step(&profiles)].max_error.unwrap();
    assert!(peak < 0.005);
    let mut last = 0.0;
    for scale in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let e = compare_pf(&feeder, &Operating::nominal(&feeder, scale)).unwrap().max_error;
        assert!(e > last, "error should grow with load: {e} after {last}");
        last = e;
    }
}

#[test]
fn zero_load_gives_zero_error() {
    let (feeder, fleet, profiles) = case("4bus");
    let mut quiet = profiles.clone();
    for v in quiet.pv_kw.values_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    for r in validate_pf(&feeder, &fleet, &quiet, 0.0) {
        assert_eq!(r.max_error, Some(0.0));
    }
}
