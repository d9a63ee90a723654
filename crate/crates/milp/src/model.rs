//! Solver-agnostic model container.
//!
//! A [`MilpModel`] owns variables (continuous or binary, with bounds), linear
//! constraints and a linear objective that is always minimized. Handles are
//! dense indices and stay valid for the life of the model.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Handle of a variable inside a [`MilpModel`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle of a constraint inside a [`MilpModel`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConId(pub(crate) usize);

impl ConId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// Linear expression `Σ coef·var`, kept sorted by variable with duplicates merged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: BTreeMap<VarId, f64>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        let mut e = Self::new();
        e.add(var, coef);
        e
    }

    pub fn add(&mut self, var: VarId, coef: f64) -> &mut Self {
        *self.terms.entry(var).or_insert(0.0) += coef;
        self
    }

    pub fn with(mut self, var: VarId, coef: f64) -> Self {
        self.add(var, coef);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.terms.iter().map(|(v, c)| (*v, *c))
    }

    /// Terms with exactly-zero coefficients removed.
    fn into_terms(self) -> Vec<(VarId, f64)> {
        self.terms.into_iter().filter(|(_, c)| *c != 0.0).collect()
    }
}

impl<I: IntoIterator<Item = (VarId, f64)>> From<I> for LinExpr {
    fn from(items: I) -> Self {
        let mut e = LinExpr::new();
        for (v, c) in items {
            e.add(v, c);
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable handle, no duplicates, no zero coefficients.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MilpModel {
    name: String,
    vars: Vec<Variable>,
    cons: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    one_hot: Vec<Vec<VarId>>,
    #[serde(skip)]
    names: HashMap<String, VarId>,
    #[serde(skip)]
    con_names: HashMap<String, ConId>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(ModelError::BinaryBounds { name, lower, upper });
        }
        let id = VarId(self.vars.len());
        self.names.insert(name.clone(), id);
        self.vars.push(Variable { name, lower, upper, kind });
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        self.add_variable(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_variable(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: impl Into<LinExpr>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConId, ModelError> {
        let name = name.into();
        if self.con_names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(name));
        }
        let terms = expr.into().into_terms();
        for &(v, c) in &terms {
            self.check_var(v)?;
            if !c.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        let id = ConId(self.cons.len());
        self.con_names.insert(name.clone(), id);
        self.cons.push(Constraint { name, terms, sense, rhs });
        Ok(id)
    }

    /// Replaces the objective. The model is always a minimization.
    pub fn set_objective(&mut self, expr: impl Into<LinExpr>) -> Result<(), ModelError> {
        let terms = expr.into().into_terms();
        for &(v, c) in &terms {
            self.check_var(v)?;
            if !c.is_finite() {
                return Err(ModelError::NonFinite("objective".into()));
            }
        }
        self.objective = terms;
        Ok(())
    }

    /// Declares that exactly one of `members` is 1 in any integer solution.
    ///
    /// This only records structure for branching and enumeration; the caller
    /// still has to add the `Σ members = 1` row.
    pub fn declare_one_hot(&mut self, members: Vec<VarId>) -> Result<(), ModelError> {
        for &v in &members {
            self.check_var(v)?;
            if self.vars[v.0].kind != VarKind::Binary {
                return Err(ModelError::NotBinary(self.vars[v.0].name.clone()));
            }
            if self.one_hot.iter().any(|g| g.contains(&v)) {
                return Err(ModelError::OverlappingGroup(self.vars[v.0].name.clone()));
            }
        }
        self.one_hot.push(members);
        Ok(())
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        self.check_var(var)?;
        let v = &mut self.vars[var.0];
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvalidBounds { name: v.name.clone(), lower, upper });
        }
        if v.kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(ModelError::BinaryBounds { name: v.name.clone(), lower, upper });
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    /// Fixes a variable to a single value.
    pub fn fix(&mut self, var: VarId, value: f64) -> Result<(), ModelError> {
        self.set_bounds(var, value, value)
    }

    fn check_var(&self, v: VarId) -> Result<(), ModelError> {
        if v.0 < self.vars.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownVariable(v.0))
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.cons
    }

    pub fn constraint(&self, c: ConId) -> &Constraint {
        &self.cons[c.0]
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn one_hot_groups(&self) -> &[Vec<VarId>] {
        &self.one_hot
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.cons.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Rebuilds the name indexes; needed after deserializing.
    pub fn reindex(&mut self) {
        self.names = self.vars.iter().enumerate().map(|(i, v)| (v.name.clone(), VarId(i))).collect();
        self.con_names = self.cons.iter().enumerate().map(|(i, c)| (c.name.clone(), ConId(i))).collect();
    }

    /// A copy of this model with every binary relaxed to a continuous [0,1] variable.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m.one_hot.clear();
        m
    }
}
