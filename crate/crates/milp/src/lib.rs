//! Mixed-integer linear programming toolkit used by the scheduling controller.
//!
//! - [`MilpModel`]: solver-agnostic container (variables, rows, objective).
//! - [`solve_lp`]: dense two-phase bounded-variable primal simplex, used as the
//!   reference LP engine. Pivoting is Dantzig pricing with lowest-index ties,
//!   falling back to Bland's rule under degeneracy, so results are reproducible.
//! - [`solve_milp`]: best-bound branch-and-bound over LP relaxations.
//! - [`lp_format`]: writer for the LP interchange text format so larger
//!   instances can be handed to external solvers.

pub mod bnb;
pub mod lp_format;
pub mod model;
mod presolve;
pub mod simplex;
mod sparse;

pub use bnb::{solve_milp, solve_milp_with, LpBackend, MilpOptions};
pub use model::{ConId, Constraint, LinExpr, MilpModel, Sense, VarId, VarKind, Variable};
pub use simplex::{solve_lp, solve_lp_with_bounds, LpOptions};

use serde::Serialize;
use thiserror::Error;

/// Numerical tolerances shared by every engine in this crate.
pub mod tol {
    /// Row and bound feasibility of a returned solution.
    pub const FEASIBILITY: f64 = 1e-7;
    /// Distance from {0,1} under which a binary counts as integral.
    pub const INTEGRALITY: f64 = 1e-6;
    /// Relative optimality gap at which branch-and-bound stops.
    pub const GAP_REL: f64 = 1e-9;
    /// Values this close to a bound (or to zero) are snapped onto it.
    pub const SNAP: f64 = 1e-9;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable handle {0}")]
    UnknownVariable(usize),
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("binary `{name}` has bounds [{lower}, {upper}] outside [0, 1]")]
    BinaryBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient or rhs in `{0}`")]
    NonFinite(String),
    #[error("`{0}` is not binary")]
    NotBinary(String),
    #[error("`{0}` already belongs to a one-hot group")]
    OverlappingGroup(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    /// Branch-and-bound nodes whose relaxation was solved (the root counts).
    pub nodes: u64,
    /// LP relaxations solved, including the final polish.
    pub lp_solves: u64,
    /// Simplex pivots; only counted by the dense engine.
    pub pivots: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Objective value; NaN unless a primal point is available.
    pub objective: f64,
    /// One value per variable, indexed by [`VarId::index`]. Empty when no point is available.
    pub values: Vec<f64>,
    /// Row duals in the orientation of the original rows (dense LP engine only).
    pub duals: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl Solution {
    pub(crate) fn without_point(status: Status, stats: SolveStats) -> Self {
        Self { status, objective: f64::NAN, values: Vec::new(), duals: None, stats }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }
}

/// Snaps values within [`tol::SNAP`] of a bound or of zero onto it.
pub(crate) fn snap_values(lower: &[f64], upper: &[f64], values: &mut [f64]) {
    for ((x, &lo), &hi) in values.iter_mut().zip(lower).zip(upper) {
        if (*x - lo).abs() <= tol::SNAP {
            *x = lo;
        } else if (*x - hi).abs() <= tol::SNAP {
            *x = hi;
        } else if x.abs() <= tol::SNAP && lo <= 0.0 && hi >= 0.0 {
            *x = 0.0;
        }
    }
}

pub(crate) fn model_bounds(model: &MilpModel) -> (Vec<f64>, Vec<f64>) {
    model.variables().iter().map(|v| (v.lower, v.upper)).unzip()
}
