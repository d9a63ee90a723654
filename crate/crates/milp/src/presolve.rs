//! Exact reductions applied before branch-and-bound.
//!
//! 1. Free column singletons: a continuous variable with infinite bounds that
//!    appears in exactly one row, an equality, is determined by that row. The
//!    row and the variable are dropped and the variable's cost is moved onto
//!    the other members of the row. It is recovered afterwards from the row.
//! 2. Components: the remaining rows split the variables into groups that share
//!    no row. With a linear objective the groups are independent problems and
//!    are solved one at a time. Variables in no row go straight to their best bound.
//!
//! Neither step changes the optimum. Each component is solved to the relative
//! gap on its own objective.

use crate::model::{ConId, LinExpr, MilpModel, Sense, VarId, VarKind};
use crate::ModelError;

/// Pivots smaller than this share of the row's largest coefficient are not eliminated.
const PIVOT_SHARE: f64 = 1e-3;

struct Eliminated {
    var: usize,
    pivot: f64,
    rhs: f64,
    /// The other members of the defining row.
    rest: Vec<(usize, f64)>,
}

pub(crate) struct Component {
    pub(crate) model: MilpModel,
    /// Original index of each variable of `model`.
    pub(crate) vars: Vec<usize>,
}

pub(crate) struct Reduced {
    pub(crate) components: Vec<Component>,
    /// Variables in no remaining row, with their chosen value. `None` when the
    /// cost pushes the value to an infinite bound.
    pub(crate) loose: Vec<(usize, Option<f64>)>,
    /// Some row without variables cannot hold.
    pub(crate) empty_row_violated: bool,
    eliminated: Vec<Eliminated>,
    n: usize,
}

impl Reduced {
    /// True when the reduction left the model as it was.
    pub(crate) fn is_trivial(&self) -> bool {
        self.eliminated.is_empty() && self.loose.is_empty() && self.components.len() <= 1 && !self.empty_row_violated
    }

    /// Assembles a point of the original model from the component solutions
    /// (aligned with `components`).
    pub(crate) fn expand(&self, parts: &[Vec<f64>]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (c, vals) in self.components.iter().zip(parts) {
            for (&i, &v) in c.vars.iter().zip(vals) {
                x[i] = v;
            }
        }
        for &(i, v) in &self.loose {
            x[i] = v.unwrap_or(0.0);
        }
        for e in self.eliminated.iter().rev() {
            let s: f64 = e.rest.iter().map(|&(j, a)| a * x[j]).sum();
            x[e.var] = (e.rhs - s) / e.pivot;
        }
        x
    }
}

pub(crate) fn reduce(model: &MilpModel) -> Result<Reduced, ModelError> {
    let n = model.num_vars();
    let cons = model.constraints();
    let mut cost = vec![0.0; n];
    for &(v, c) in model.objective() {
        cost[v.index()] += c;
    }

    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, con) in cons.iter().enumerate() {
        for &(v, _) in &con.terms {
            rows_of[v.index()].push(r);
        }
    }
    let mut row_alive = vec![true; cons.len()];
    let mut var_alive = vec![true; n];
    let live_rows = |rows: &[usize], alive: &[bool]| rows.iter().filter(|&&r| alive[r]).count();

    let mut eliminated = Vec::new();
    loop {
        let mut changed = false;
        for (i, var) in model.variables().iter().enumerate() {
            let free = var.kind == VarKind::Continuous && var.lower == f64::NEG_INFINITY && var.upper == f64::INFINITY;
            if !var_alive[i] || !free || live_rows(&rows_of[i], &row_alive) != 1 {
                continue;
            }
            let r = *rows_of[i].iter().find(|&&r| row_alive[r]).unwrap();
            let con = &cons[r];
            if con.sense != Sense::Eq {
                continue;
            }
            let pivot = con.terms.iter().find(|(v, _)| v.index() == i).unwrap().1;
            let largest = con.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
            if pivot.abs() < PIVOT_SHARE * largest {
                continue;
            }
            let rest: Vec<(usize, f64)> =
                con.terms.iter().filter(|(v, _)| v.index() != i).map(|&(v, a)| (v.index(), a)).collect();
            if cost[i] != 0.0 {
                let f = cost[i] / pivot;
                for &(j, a) in &rest {
                    cost[j] -= f * a;
                }
                cost[i] = 0.0;
            }
            eliminated.push(Eliminated { var: i, pivot, rhs: con.rhs, rest });
            row_alive[r] = false;
            var_alive[i] = false;
            changed = true;
        }
        if !changed {
            break;
        }
    }

    // Union-find over the surviving rows and one-hot groups.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let join = |p: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            // The smaller index stays the root so components are named by their first variable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            p[hi] = lo;
        }
    };
    for (r, con) in cons.iter().enumerate() {
        if !row_alive[r] {
            continue;
        }
        if let Some(&(first, _)) = con.terms.first() {
            for &(v, _) in &con.terms[1..] {
                join(&mut parent, first.index(), v.index());
            }
        }
    }
    for g in model.one_hot_groups() {
        for v in &g[1..] {
            join(&mut parent, g[0].index(), v.index());
        }
    }

    let in_row: Vec<bool> = (0..n).map(|i| live_rows(&rows_of[i], &row_alive) > 0).collect();
    let grouped: Vec<bool> = {
        let mut g = vec![false; n];
        for grp in model.one_hot_groups() {
            for v in grp {
                g[v.index()] = true;
            }
        }
        g
    };

    let mut loose = Vec::new();
    let mut comp_of_root: Vec<Option<usize>> = vec![None; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if !var_alive[i] {
            continue;
        }
        if !in_row[i] && !grouped[i] {
            let v = &model.variables()[i];
            let target = if cost[i] > 0.0 {
                v.lower
            } else if cost[i] < 0.0 {
                v.upper
            } else {
                0.0f64.clamp(v.lower, v.upper)
            };
            loose.push((i, target.is_finite().then_some(target)));
            continue;
        }
        let root = find(&mut parent, i);
        let c = *comp_of_root[root].get_or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[c].push(i);
    }

    let mut row_comp: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    for (r, con) in cons.iter().enumerate() {
        if row_alive[r] {
            if let Some(&(v, _)) = con.terms.first() {
                let c = comp_of_root[find(&mut parent, v.index())].expect("row variable has a component");
                row_comp[c].push(r);
            }
        }
    }

    let mut components = Vec::with_capacity(members.len());
    for (c, vars) in members.into_iter().enumerate() {
        let mut local = vec![usize::MAX; n];
        let mut sub = MilpModel::new(format!("{}_part{c}", model.name()));
        for (k, &i) in vars.iter().enumerate() {
            let v = &model.variables()[i];
            sub.add_variable(v.name.clone(), v.lower, v.upper, v.kind)?;
            local[i] = k;
        }
        let id = |i: usize| VarId(local[i]);
        for &r in &row_comp[c] {
            let con = model.constraint(ConId(r));
            let expr = LinExpr::from(con.terms.iter().map(|&(v, a)| (id(v.index()), a)));
            sub.add_constraint(con.name.clone(), expr, con.sense, con.rhs)?;
        }
        for g in model.one_hot_groups() {
            if local[g[0].index()] != usize::MAX {
                sub.declare_one_hot(g.iter().map(|v| id(v.index())).collect())?;
            }
        }
        sub.set_objective(LinExpr::from(vars.iter().filter(|&&i| cost[i] != 0.0).map(|&i| (id(i), cost[i]))))?;
        components.push(Component { model: sub, vars });
    }

    let empty_row_violated = cons.iter().any(|c| c.terms.is_empty() && c.violation(&[]) > crate::tol::FEASIBILITY);
    Ok(Reduced { components, loose, empty_row_violated, eliminated, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purchase_row_is_eliminated_and_steps_split() {
        // Two independent steps tied together only through a defined total.
        let mut m = MilpModel::new("t");
        let x0 = m.add_continuous("x0", 0.0, 4.0).unwrap();
        let x1 = m.add_continuous("x1", 0.0, 4.0).unwrap();
        let b0 = m.add_binary("b0").unwrap();
        let b1 = m.add_binary("b1").unwrap();
        let total = m.add_continuous("total", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("s0", LinExpr::from([(x0, 1.0), (b0, 2.0)]), Sense::Ge, 1.5).unwrap();
        m.add_constraint("s1", LinExpr::from([(x1, 1.0), (b1, 3.0)]), Sense::Ge, 2.5).unwrap();
        m.add_constraint("def", LinExpr::from([(total, 1.0), (x0, -1.0), (x1, -1.0)]), Sense::Eq, 0.0).unwrap();
        m.set_objective(LinExpr::from([(total, 1.0), (b0, 0.5), (b1, 0.5)])).unwrap();
        let r = reduce(&m).unwrap();
        assert_eq!(r.components.len(), 2);
        assert_eq!(r.components[0].vars, vec![0, 2]);
        assert_eq!(r.components[1].vars, vec![1, 3]);
        assert_eq!(r.components[0].model.objective(), &[(VarId(0), 1.0), (VarId(1), 0.5)]);
        let x = r.expand(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(x, vec![1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn loose_variables_go_to_their_best_bound() {
        let mut m = MilpModel::new("t");
        let a = m.add_continuous("a", -1.0, 2.0).unwrap();
        let b = m.add_binary("b").unwrap();
        let c = m.add_continuous("c", 0.0, f64::INFINITY).unwrap();
        m.set_objective(LinExpr::from([(a, -1.0), (b, 1.0), (c, -1.0)])).unwrap();
        let r = reduce(&m).unwrap();
        assert!(r.components.is_empty());
        assert_eq!(r.loose, vec![(0, Some(2.0)), (1, Some(0.0)), (2, None)]);
    }
}
