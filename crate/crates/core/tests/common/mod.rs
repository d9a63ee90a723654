#![allow(dead_code)]

use std::path::PathBuf;

use cvr_core::{load_feeder, load_profiles, DeviceFleet, Feeder, Profiles};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Feeder, fleet and day profile of a bundled case: "2bus", "4bus" or "13bus".
pub fn case(name: &str) -> (Feeder, DeviceFleet, Profiles) {
    let (feeder, fleet) = load_feeder(fixture(&format!("feeder_{name}.json"))).expect("fixture feeder loads");
    let profiles = load_profiles(fixture(&format!("day_{name}.csv"))).expect("fixture profile loads");
    (feeder, fleet, profiles)
}

/// Step with the largest load multiplier (first one on ties).
pub fn peak_step(p: &Profiles) -> usize {
    let mut best = 0;
    for (t, &m) in p.load_mult.iter().enumerate() {
        if m > p.load_mult[best] {
            best = t;
        }
    }
    best
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
