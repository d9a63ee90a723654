//! Dense two-phase bounded-variable primal simplex.
//!
//! This is the reference LP engine: small, dense and deterministic. Entering
//! columns are priced by largest reduced cost with lowest-index tie-breaking;
//! after a run of degenerate pivots it switches to Bland's rule until progress
//! resumes. Leaving-row ties always go to the lowest column index.

use crate::model::{MilpModel, Sense};
use crate::{model_bounds, snap_values, tol, Solution, SolveStats, Status};

#[derive(Clone, Debug)]
pub struct LpOptions {
    pub max_pivots: u64,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: u32,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_pivots: 200_000, degenerate_limit: 50 }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;

/// Solves the LP relaxation of `model` (binaries are treated as `[0,1]` continuous).
pub fn solve_lp(model: &MilpModel) -> Solution {
    let (lower, upper) = model_bounds(model);
    solve_lp_with_bounds(model, &lower, &upper, &LpOptions::default())
}

/// Solves the LP relaxation of `model` with the variable bounds replaced by `lower`/`upper`.
pub fn solve_lp_with_bounds(model: &MilpModel, lower: &[f64], upper: &[f64], opts: &LpOptions) -> Solution {
    assert_eq!(lower.len(), model.num_vars());
    assert_eq!(upper.len(), model.num_vars());
    for (l, u) in lower.iter().zip(upper) {
        if l > u {
            return Solution::without_point(Status::Infeasible, SolveStats { lp_solves: 1, ..Default::default() });
        }
    }
    let sf = StandardForm::build(model, lower, upper);
    let Some(mut tab) = sf.tableau() else {
        return Solution::without_point(Status::Infeasible, SolveStats { lp_solves: 1, ..Default::default() });
    };
    let outcome = tab.run(&sf, opts);
    let stats = SolveStats { nodes: 0, lp_solves: 1, pivots: tab.pivots };
    match outcome {
        Outcome::Optimal => {
            let mut values = sf.recover(&tab);
            let duals = sf.duals(&tab, model.num_constraints());
            snap_values(lower, upper, &mut values);
            let objective = model.objective_value(&values);
            Solution { status: Status::Optimal, objective, values, duals: Some(duals), stats }
        }
        Outcome::Infeasible => Solution::without_point(Status::Infeasible, stats),
        Outcome::Unbounded => Solution::without_point(Status::Unbounded, stats),
        Outcome::Limit => Solution::without_point(Status::IterationLimit, stats),
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Clone, Copy, Debug)]
enum ColMap {
    Fixed(f64),
    /// `x = offset + sign * y`
    Shift { col: usize, offset: f64, sign: f64 },
    /// `x = y⁺ - y⁻`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    maps: Vec<ColMap>,
    /// Structural column count (before slacks and artificials).
    n_struct: usize,
    col_upper: Vec<f64>,
    col_cost: Vec<f64>,
    rows: Vec<Row>,
    /// Rows dropped because every variable in them is fixed, checked for feasibility here.
    infeasible_fixed_row: bool,
}

struct Row {
    original: usize,
    coefs: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

impl StandardForm {
    fn build(model: &MilpModel, lower: &[f64], upper: &[f64]) -> Self {
        let mut maps = Vec::with_capacity(model.num_vars());
        let mut col_upper = Vec::new();
        let mut col_cost = Vec::new();
        let mut cost = vec![0.0; model.num_vars()];
        for &(v, c) in model.objective() {
            cost[v.index()] = c;
        }
        for j in 0..model.num_vars() {
            let (l, u) = (lower[j], upper[j]);
            let map = if l == u {
                ColMap::Fixed(l)
            } else if l.is_finite() {
                col_upper.push(u - l);
                col_cost.push(cost[j]);
                ColMap::Shift { col: col_upper.len() - 1, offset: l, sign: 1.0 }
            } else if u.is_finite() {
                col_upper.push(f64::INFINITY);
                col_cost.push(-cost[j]);
                ColMap::Shift { col: col_upper.len() - 1, offset: u, sign: -1.0 }
            } else {
                col_upper.push(f64::INFINITY);
                col_cost.push(cost[j]);
                col_upper.push(f64::INFINITY);
                col_cost.push(-cost[j]);
                ColMap::Split { pos: col_upper.len() - 2, neg: col_upper.len() - 1 }
            };
            maps.push(map);
        }
        let n_struct = col_upper.len();
        let mut rows = Vec::new();
        let mut infeasible_fixed_row = false;
        for (i, con) in model.constraints().iter().enumerate() {
            let mut rhs = con.rhs;
            let mut coefs = Vec::with_capacity(con.terms.len());
            for &(v, a) in &con.terms {
                match maps[v.index()] {
                    ColMap::Fixed(x) => rhs -= a * x,
                    ColMap::Shift { col, offset, sign } => {
                        rhs -= a * offset;
                        coefs.push((col, a * sign));
                    }
                    ColMap::Split { pos, neg } => {
                        coefs.push((pos, a));
                        coefs.push((neg, -a));
                    }
                }
            }
            if coefs.is_empty() {
                let scale = 1.0 + con.rhs.abs();
                let ok = match con.sense {
                    Sense::Le => rhs >= -tol::FEASIBILITY * scale,
                    Sense::Ge => rhs <= tol::FEASIBILITY * scale,
                    Sense::Eq => rhs.abs() <= tol::FEASIBILITY * scale,
                };
                infeasible_fixed_row |= !ok;
                continue;
            }
            rows.push(Row { original: i, coefs, sense: con.sense, rhs });
        }
        Self { maps, n_struct, col_upper, col_cost, rows, infeasible_fixed_row }
    }

    fn tableau(&self) -> Option<Tableau> {
        if self.infeasible_fixed_row {
            return None;
        }
        let m = self.rows.len();
        let n_slack = self.rows.iter().filter(|r| r.sense != Sense::Eq).count();
        // Worst case every row needs an artificial.
        let n_max = self.n_struct + n_slack + m;
        let mut a = vec![0.0; m * n_max];
        let mut upper = self.col_upper.clone();
        let mut cost2 = self.col_cost.clone();
        let mut is_art = vec![false; self.n_struct];
        let mut beta = vec![0.0; m];
        let mut basis = vec![usize::MAX; m];
        let mut row_sign = vec![1.0; m];
        let mut init_col = vec![usize::MAX; m];
        let mut slack_of = vec![usize::MAX; m];

        let mut next = self.n_struct;
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in &row.coefs {
                a[r * n_max + c] += v;
            }
            match row.sense {
                Sense::Le => {
                    a[r * n_max + next] = 1.0;
                    slack_of[r] = next;
                }
                Sense::Ge => {
                    a[r * n_max + next] = -1.0;
                    slack_of[r] = next;
                }
                Sense::Eq => {}
            }
            if row.sense != Sense::Eq {
                upper.push(f64::INFINITY);
                cost2.push(0.0);
                is_art.push(false);
                next += 1;
            }
            beta[r] = row.rhs;
        }
        for r in 0..m {
            if beta[r] < 0.0 {
                row_sign[r] = -1.0;
                beta[r] = -beta[r];
                for c in 0..next {
                    a[r * n_max + c] = -a[r * n_max + c];
                }
            }
            let s = slack_of[r];
            if s != usize::MAX && a[r * n_max + s] == 1.0 {
                basis[r] = s;
                init_col[r] = s;
            }
        }
        for r in 0..m {
            if basis[r] == usize::MAX {
                a[r * n_max + next] = 1.0;
                upper.push(f64::INFINITY);
                cost2.push(0.0);
                is_art.push(true);
                basis[r] = next;
                init_col[r] = next;
                next += 1;
            }
        }
        let n = next;
        // Compact the row-major storage to the real column count.
        let mut compact = vec![0.0; m * n];
        for r in 0..m {
            compact[r * n..(r + 1) * n].copy_from_slice(&a[r * n_max..r * n_max + n]);
        }
        let mut is_basic = vec![false; n];
        for &b in &basis {
            is_basic[b] = true;
        }
        Some(Tableau {
            m,
            n,
            a: compact,
            beta,
            basis,
            is_basic,
            upper,
            at_upper: vec![false; n],
            d: vec![0.0; n],
            cost2,
            is_art,
            row_sign,
            init_col,
            pivots: 0,
        })
    }

    fn recover(&self, tab: &Tableau) -> Vec<f64> {
        let mut y = vec![0.0; tab.n];
        for j in 0..tab.n {
            if !tab.is_basic[j] && tab.at_upper[j] {
                y[j] = tab.upper[j];
            }
        }
        for (r, &b) in tab.basis.iter().enumerate() {
            y[b] = tab.beta[r];
        }
        self.maps
            .iter()
            .map(|m| match *m {
                ColMap::Fixed(x) => x,
                ColMap::Shift { col, offset, sign } => offset + sign * y[col],
                ColMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }

    fn duals(&self, tab: &Tableau, n_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_rows];
        for (r, row) in self.rows.iter().enumerate() {
            let pi = -tab.d[tab.init_col[r]];
            out[row.original] = tab.row_sign[r] * pi;
        }
        out
    }
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

struct Tableau {
    m: usize,
    n: usize,
    /// Row-major `B⁻¹A`.
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    cost2: Vec<f64>,
    is_art: Vec<bool>,
    row_sign: Vec<f64>,
    init_col: Vec<usize>,
    pivots: u64,
}

enum Iter {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn run(&mut self, _sf: &StandardForm, opts: &LpOptions) -> Outcome {
        if self.is_art.iter().any(|&x| x) {
            let phase1: Vec<f64> = self.is_art.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
            self.price(&phase1);
            match self.iterate(opts) {
                Iter::Optimal => {}
                Iter::Limit => return Outcome::Limit,
                // Phase 1 is bounded below by zero.
                Iter::Unbounded => return Outcome::Infeasible,
            }
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.beta)
                .filter(|(b, _)| self.is_art[**b])
                .map(|(_, v)| *v)
                .sum();
            let scale = 1.0 + self.beta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if infeas > tol::FEASIBILITY * scale {
                return Outcome::Infeasible;
            }
            for j in 0..self.n {
                if self.is_art[j] {
                    self.upper[j] = 0.0;
                    self.at_upper[j] = false;
                }
            }
        }
        let cost = self.cost2.clone();
        self.price(&cost);
        match self.iterate(opts) {
            Iter::Optimal => Outcome::Optimal,
            Iter::Unbounded => Outcome::Unbounded,
            Iter::Limit => Outcome::Limit,
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * self.n..(r + 1) * self.n];
                for (dj, aj) in self.d.iter_mut().zip(row) {
                    *dj -= cb * aj;
                }
            }
        }
        for r in 0..self.m {
            self.d[self.basis[r]] = 0.0;
        }
    }

    fn eligible(&self, j: usize) -> Option<f64> {
        if self.is_basic[j] || self.upper[j] <= 0.0 {
            return None;
        }
        let dj = self.d[j];
        if !self.at_upper[j] && dj < -OPT_TOL {
            Some(-dj)
        } else if self.at_upper[j] && dj > OPT_TOL {
            Some(dj)
        } else {
            None
        }
    }

    fn iterate(&mut self, opts: &LpOptions) -> Iter {
        let mut degenerate_run = 0u32;
        loop {
            let bland = degenerate_run >= opts.degenerate_limit;
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..self.n {
                if let Some(score) = self.eligible(j) {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if score > best {
                        best = score;
                        entering = Some(j);
                    }
                }
            }
            let Some(q) = entering else { return Iter::Optimal };
            if self.pivots >= opts.max_pivots {
                return Iter::Limit;
            }
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            // Ratio test; `None` as the leaving row means the entering column flips bounds.
            let mut theta = self.upper[q];
            let mut leave: Option<usize> = None;
            let mut leave_col = q;
            for r in 0..self.m {
                let alpha = dir * self.a[r * self.n + q];
                let b = self.basis[r];
                let lim = if alpha > PIVOT_TOL {
                    self.beta[r].max(0.0) / alpha
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    (self.upper[b] - self.beta[r]).max(0.0) / -alpha
                } else {
                    continue;
                };
                if lim < theta - RATIO_TIE || (lim <= theta + RATIO_TIE && b < leave_col) {
                    theta = lim;
                    leave = Some(r);
                    leave_col = b;
                }
            }
            if theta.is_infinite() {
                return Iter::Unbounded;
            }
            self.pivots += 1;
            if theta <= RATIO_TIE {
                degenerate_run = degenerate_run.saturating_add(1);
            } else {
                degenerate_run = 0;
            }

            let step = dir * theta;
            for r in 0..self.m {
                let a = self.a[r * self.n + q];
                if a != 0.0 {
                    self.beta[r] -= a * step;
                }
            }
            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some(r) => {
                    let out = self.basis[r];
                    let alpha = dir * self.a[r * self.n + q];
                    let start = if self.at_upper[q] { self.upper[q] } else { 0.0 };
                    self.pivot(r, q);
                    self.beta[r] = start + step;
                    self.is_basic[out] = false;
                    self.at_upper[out] = alpha < 0.0;
                    self.is_basic[q] = true;
                    self.at_upper[q] = false;
                    self.basis[r] = q;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.a[r * n + q];
        {
            let row = &mut self.a[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.a[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * n..(i + 1) * n];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                if *pr != 0.0 {
                    *v -= f * pr;
                }
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (dj, pr) in self.d.iter_mut().zip(&pivot_row) {
                if *pr != 0.0 {
                    *dj -= f * pr;
                }
            }
            self.d[q] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, MilpModel, Sense};

    #[test]
    fn single_lower_bound_row() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        m.add_constraint("c", LinExpr::term(x, 1.0), Sense::Ge, 3.0).unwrap();
        m.set_objective(LinExpr::term(x, 1.0)).unwrap();
        let s = solve_lp(&m);
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.value(x), 3.0);
        assert_eq!(s.objective, 3.0);
    }

    #[test]
    fn facet_tie_goes_to_lowest_index() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let y = m.add_continuous("y", 0.0, f64::INFINITY).unwrap();
        m.add_constraint("c", LinExpr::from([(x, 1.0), (y, 1.0)]), Sense::Le, 1.0).unwrap();
        m.set_objective(LinExpr::from([(x, -1.0), (y, -1.0)])).unwrap();
        let s = solve_lp(&m);
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, -1.0);
        assert_eq!((s.value(x), s.value(y)), (1.0, 0.0));
    }

    #[test]
    fn contradictory_bounds_rows_are_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("lo", LinExpr::term(x, 1.0), Sense::Ge, 2.0).unwrap();
        m.add_constraint("hi", LinExpr::term(x, 1.0), Sense::Le, 1.0).unwrap();
        assert_eq!(solve_lp(&m).status, Status::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", f64::NEG_INFINITY, 5.0).unwrap();
        m.set_objective(LinExpr::term(x, 1.0)).unwrap();
        assert_eq!(solve_lp(&m).status, Status::Unbounded);
    }

    #[test]
    fn free_and_upper_only_variables() {
        // min x - y  s.t.  x - y >= -2, x >= -1 (row), y <= 4 (bound), x free
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let y = m.add_continuous("y", f64::NEG_INFINITY, 4.0).unwrap();
        m.add_constraint("a", LinExpr::from([(x, 1.0), (y, -1.0)]), Sense::Ge, -2.0).unwrap();
        m.add_constraint("b", LinExpr::term(x, 1.0), Sense::Ge, -1.0).unwrap();
        m.set_objective(LinExpr::from([(x, 1.0), (y, -1.0)])).unwrap();
        let s = solve_lp(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 2.0).abs() < 1e-12);
        assert!(m.max_violation(&s.values) < 1e-9);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 2.0, 2.0).unwrap();
        let y = m.add_continuous("y", 0.0, 10.0).unwrap();
        m.add_constraint("a", LinExpr::from([(x, 1.0), (y, 1.0)]), Sense::Eq, 5.0).unwrap();
        m.set_objective(LinExpr::term(y, 1.0)).unwrap();
        let s = solve_lp(&m);
        assert_eq!(s.value(y), 3.0);

        m.add_constraint("b", LinExpr::term(x, 1.0), Sense::Ge, 2.5).unwrap();
        assert_eq!(solve_lp(&m).status, Status::Infeasible);
    }

    #[test]
    fn equality_rows_with_negative_rhs() {
        // x + y = -1, x - y = 3 -> x = 1, y = -2
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", -10.0, 10.0).unwrap();
        let y = m.add_continuous("y", -10.0, 10.0).unwrap();
        m.add_constraint("a", LinExpr::from([(x, 1.0), (y, 1.0)]), Sense::Eq, -1.0).unwrap();
        m.add_constraint("b", LinExpr::from([(x, 1.0), (y, -1.0)]), Sense::Eq, 3.0).unwrap();
        let s = solve_lp(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.value(x) - 1.0).abs() < 1e-12);
        assert!((s.value(y) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities_do_not_break_phase_one() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 4.0).unwrap();
        let y = m.add_continuous("y", 0.0, 4.0).unwrap();
        m.add_constraint("a", LinExpr::from([(x, 1.0), (y, 1.0)]), Sense::Eq, 3.0).unwrap();
        m.add_constraint("b", LinExpr::from([(x, 2.0), (y, 2.0)]), Sense::Eq, 6.0).unwrap();
        m.set_objective(LinExpr::from([(x, 1.0), (y, 2.0)])).unwrap();
        let s = solve_lp(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }
}
