//! Warm-startable sparse LP relaxations backed by `minilp`.
//!
//! Branch-and-bound children only tighten binary bounds, which `minilp` handles
//! by re-optimizing the parent's basis with dual simplex instead of starting
//! over. That is the whole reason this backend exists.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::model::{MilpModel, Sense};

pub(crate) struct SparseRelaxation {
    vars: Vec<minilp::Variable>,
    problem: Problem,
}

pub(crate) enum SparseOutcome {
    Optimal(minilp::Solution),
    Infeasible,
    Unbounded,
}

impl SparseRelaxation {
    pub(crate) fn new(model: &MilpModel) -> Self {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let mut cost = vec![0.0; model.num_vars()];
        for &(v, c) in model.objective() {
            cost[v.index()] = c;
        }
        let vars: Vec<_> =
            model.variables().iter().zip(&cost).map(|(v, &c)| problem.add_var(c, (v.lower, v.upper))).collect();
        for con in model.constraints() {
            let op = match con.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Eq => ComparisonOp::Eq,
                Sense::Ge => ComparisonOp::Ge,
            };
            problem.add_constraint(con.terms.iter().map(|&(v, a)| (vars[v.index()], a)), op, con.rhs);
        }
        Self { vars, problem }
    }

    pub(crate) fn solve_root(&self) -> SparseOutcome {
        classify(self.problem.solve())
    }

    pub(crate) fn fix(&self, parent: &minilp::Solution, var: usize, value: f64) -> SparseOutcome {
        classify(parent.clone().fix_var(self.vars[var], value))
    }

    pub(crate) fn values(&self, sol: &minilp::Solution) -> Vec<f64> {
        self.vars.iter().map(|&v| sol[v]).collect()
    }
}

fn classify(r: Result<minilp::Solution, minilp::Error>) -> SparseOutcome {
    match r {
        Ok(s) => SparseOutcome::Optimal(s),
        Err(minilp::Error::Infeasible) => SparseOutcome::Infeasible,
        Err(minilp::Error::Unbounded) => SparseOutcome::Unbounded,
    }
}
