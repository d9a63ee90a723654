//! Model predictive conservation voltage reduction for radial distribution
//! feeders with a substation battery.
//!
//! A day is split into fixed steps. At each step a mixed-integer program over a
//! short prediction window chooses regulator taps, capacitor switches, inverter
//! reactive power and battery power against a linearized power flow. The first
//! step's controls are applied to a nonlinear power-flow plant, the realized
//! state of charge is fed back, and the window slides forward.
//!
//! Voltages in the models are squared per-unit magnitudes.
//!
//! ```
//! use cvr_core::feeder::parse_feeder;
//! use cvr_core::powerflow::{solve_linear, Operating};
//!
//! let json = r#"{
//!   "base": {"s_base_kva": 1000, "v_base_kv": 4.16},
//!   "buses": [
//!     {"id": 0, "kind": "substation"},
//!     {"id": 1, "kind": "load", "p0_pu": 0.01, "q0_pu": 0.0}
//!   ],
//!   "edges": [{"from": 0, "to": 1, "r_pu": 0.2, "x_pu": 0.0}]
//! }"#;
//! let (feeder, _fleet) = parse_feeder(json).unwrap();
//! let pf = solve_linear(&feeder, &Operating::nominal(&feeder, 1.0)).unwrap();
//! assert!((pf.v[1] - 0.996).abs() < 1e-12);
//! ```

pub mod bess;
pub mod devices;
pub mod experiments;
pub mod feeder;
pub mod horizon;
pub mod mpc;
pub mod oracle;
pub mod powerflow;
pub mod profiles;
pub mod report;

/// Lower voltage limit, squared per-unit (0.95²).
pub const V_MIN: f64 = 0.9025;
/// Upper voltage limit, squared per-unit (1.05²).
pub const V_MAX: f64 = 1.1025;

pub use feeder::{load_feeder, DeviceFleet, Feeder};
pub use horizon::{HorizonConfig, Objective};
pub use mpc::{run_day, MpcConfig, SimulationResult};
pub use profiles::{load_profiles, Profiles};

// The guide's listings run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/feeders.md")]
    mod feeders {}
    #[doc = include_str!("../../../book/src/power-flow.md")]
    mod power_flow {}
    #[doc = include_str!("../../../book/src/devices.md")]
    mod devices {}
    #[doc = include_str!("../../../book/src/battery.md")]
    mod battery {}
    #[doc = include_str!("../../../book/src/milp.md")]
    mod milp {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
