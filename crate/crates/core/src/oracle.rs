//! Exhaustive verifier for small scheduling problems.
//!
//! Every binary of the model is fixed in turn: one-hot groups take each of
//! their members, the remaining binaries (capacitor switches, the battery
//! indicators) take 0 and 1. Each assignment leaves an LP, solved with the
//! dense reference simplex rather than the branch-and-bound path. The battery
//! power stays continuous: with the indicators fixed, every objective is
//! linear in it, so no gridding is needed.
//!
//! Assignments are ordered lexicographically (first binary most significant)
//! and ties keep the earliest, so the parallel evaluation reduces to the same
//! answer as a serial loop.

use cvr_milp::{solve_lp_with_bounds, tol, LpOptions, MilpModel, Status, VarId, VarKind};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct EnumerationSpec {
    pub limit: u64,
}

impl Default for EnumerationSpec {
    fn default() -> Self {
        Self { limit: 1_000_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{count} combinations exceed the enumeration limit {limit}")]
    LimitExceeded { count: u128, limit: u64 },
    #[error("no assignment of the binaries is feasible")]
    Infeasible,
    #[error("a residual LP is unbounded")]
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub values: Vec<f64>,
    /// Lexicographic index of the winning assignment.
    pub index: u64,
    pub combinations: u64,
    pub feasible: u64,
}

/// One digit of the enumeration: a one-hot group or a lone binary.
enum Digit {
    Group(Vec<VarId>),
    Free(VarId),
}

impl Digit {
    fn radix(&self) -> u64 {
        match self {
            Digit::Group(g) => g.len() as u64,
            Digit::Free(_) => 2,
        }
    }
}

fn digits(model: &MilpModel) -> Vec<Digit> {
    let groups = model.one_hot_groups();
    let mut grouped = vec![None; model.num_vars()];
    for (g, members) in groups.iter().enumerate() {
        for v in members {
            grouped[v.index()] = Some(g);
        }
    }
    let ids: Vec<VarId> = model.var_ids().collect();
    let mut emitted = vec![false; groups.len()];
    let mut out = Vec::new();
    for (i, var) in model.variables().iter().enumerate() {
        if var.kind != VarKind::Binary {
            continue;
        }
        match grouped[i] {
            Some(g) if !emitted[g] => {
                emitted[g] = true;
                out.push(Digit::Group(groups[g].clone()));
            }
            Some(_) => {}
            None => out.push(Digit::Free(ids[i])),
        }
    }
    out
}

/// Number of assignments [`brute_force`] would evaluate.
pub fn combination_count(model: &MilpModel) -> u128 {
    digits(model).iter().map(|d| d.radix() as u128).product()
}

pub fn brute_force(model: &MilpModel, spec: &EnumerationSpec) -> Result<OracleResult, OracleError> {
    let digits = digits(model);
    let count = digits.iter().map(|d| d.radix() as u128).product::<u128>();
    if count > spec.limit as u128 {
        return Err(OracleError::LimitExceeded { count, limit: spec.limit });
    }
    let count = count as u64;
    let (lower, upper): (Vec<f64>, Vec<f64>) = model.variables().iter().map(|v| (v.lower, v.upper)).unzip();
    let opts = LpOptions::default();

    let fix = |index: u64| {
        let (mut lo, mut hi) = (lower.clone(), upper.clone());
        let mut rest = index;
        for d in digits.iter().rev() {
            let r = d.radix();
            let pick = rest % r;
            rest /= r;
            match d {
                Digit::Group(g) => {
                    for (k, v) in g.iter().enumerate() {
                        let x = if k as u64 == pick { 1.0 } else { 0.0 };
                        lo[v.index()] = x;
                        hi[v.index()] = x;
                    }
                }
                Digit::Free(v) => {
                    lo[v.index()] = pick as f64;
                    hi[v.index()] = pick as f64;
                }
            }
        }
        (lo, hi)
    };

    let outcomes: Vec<(Status, f64)> = (0..count)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = fix(c);
            let s = solve_lp_with_bounds(model, &lo, &hi, &opts);
            (s.status, s.objective)
        })
        .collect();

    let mut best: Option<(u64, f64)> = None;
    let mut feasible = 0;
    for (c, &(status, obj)) in outcomes.iter().enumerate() {
        match status {
            Status::Optimal => {
                feasible += 1;
                let better = match best {
                    None => true,
                    Some((_, b)) => obj < b - tol::GAP_REL * b.abs().max(1.0),
                };
                if better {
                    best = Some((c as u64, obj));
                }
            }
            Status::Unbounded => return Err(OracleError::Unbounded),
            Status::Infeasible | Status::IterationLimit => {}
        }
    }
    let (index, objective) = best.ok_or(OracleError::Infeasible)?;
    let (lo, hi) = fix(index);
    let values = solve_lp_with_bounds(model, &lo, &hi, &opts).values;
    Ok(OracleResult { objective, values, index, combinations: count, feasible })
}

/// Outcome of checking one window's MILP optimum against enumeration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certification {
    pub step: usize,
    pub window: usize,
    pub combinations: u128,
    pub milp_objective: f64,
    pub oracle_objective: Option<f64>,
    pub rel_error: Option<f64>,
    /// `None` when the window was too large to enumerate.
    pub agrees: Option<bool>,
}

/// Relative objective error used for certification.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compares a MILP objective for `model` with the enumerated optimum.
pub fn certify(model: &MilpModel, milp_objective: f64, step: usize, window: usize, spec: &EnumerationSpec, rel_tol: f64) -> Certification {
    let combinations = combination_count(model);
    let mut c = Certification { step, window, combinations, milp_objective, oracle_objective: None, rel_error: None, agrees: None };
    match brute_force(model, spec) {
        Ok(r) => {
            let e = rel_error(milp_objective, r.objective);
            c.oracle_objective = Some(r.objective);
            c.rel_error = Some(e);
            c.agrees = Some(e <= rel_tol);
        }
        Err(OracleError::LimitExceeded { .. }) => {}
        Err(_) => c.agrees = Some(milp_objective.is_nan()),
    }
    c
}
