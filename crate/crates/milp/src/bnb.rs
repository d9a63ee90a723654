//! Branch-and-bound over LP relaxations.
//!
//! Rules, all deterministic:
//! - until the first integral point is found the search dives: the newest open
//!   node is expanded next;
//! - after that, node selection is smallest relaxation bound, ties to the newest node;
//! - branching variable: lowest-index fractional binary, except that when it
//!   belongs to a one-hot group the group's largest-valued member is branched
//!   on instead (ties by lowest index);
//! - the 0-child is created before the 1-child;
//! - an integral point replaces the incumbent only if it improves it by more
//!   than the relative gap.
//!
//! Open nodes keep their path of fixings. A bounded number of them also keep
//! the sparse solver state for warm starts; the rest are rebuilt from the root
//! when they are expanded.
//!
//! Before searching, [`MilpOptions::presolve`] removes defined free variables
//! and splits the model into independent parts, each searched on its own.
//!
//! The returned point is polished: every binary is fixed to its rounded value
//! and the remaining LP re-solved, so binaries come back as exact 0/1.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{MilpModel, VarKind};
use crate::presolve::{self, Reduced};
use crate::simplex::{solve_lp_with_bounds, LpOptions};
use crate::sparse::{SparseOutcome, SparseRelaxation};
use crate::{model_bounds, snap_values, tol, Solution, SolveStats, Status};

/// Which LP engine solves the node relaxations.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum LpBackend {
    /// Sparse LU simplex with dual warm starts between parent and child (`minilp`).
    #[default]
    Sparse,
    /// The dense reference simplex, re-solved from scratch at every node.
    Dense,
}

#[derive(Clone, Debug)]
pub struct MilpOptions {
    pub node_limit: u64,
    pub backend: LpBackend,
    pub gap_rel: f64,
    /// Open nodes that may hold a sparse warm-start state at the same time.
    pub warm_states: usize,
    /// Eliminate defined free variables and solve independent parts separately.
    pub presolve: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { node_limit: 1_000_000, backend: LpBackend::default(), gap_rel: tol::GAP_REL, warm_states: 256, presolve: true }
    }
}

pub fn solve_milp(model: &MilpModel) -> Solution {
    solve_milp_with(model, &MilpOptions::default())
}

pub fn solve_milp_with(model: &MilpModel, opts: &MilpOptions) -> Solution {
    if opts.presolve {
        if let Ok(reduced) = presolve::reduce(model) {
            if !reduced.is_trivial() {
                return solve_reduced(model, &reduced, opts);
            }
        }
    }
    branch_and_bound(model, opts, opts.node_limit)
}

fn solve_reduced(model: &MilpModel, reduced: &Reduced, opts: &MilpOptions) -> Solution {
    let mut stats = SolveStats::default();
    if reduced.empty_row_violated {
        return Solution::without_point(Status::Infeasible, stats);
    }
    let mut parts = Vec::with_capacity(reduced.components.len());
    let (mut unbounded, mut limit) = (reduced.loose.iter().any(|(_, v)| v.is_none()), false);
    for c in &reduced.components {
        let s = branch_and_bound(&c.model, opts, opts.node_limit.saturating_sub(stats.nodes));
        stats.nodes += s.stats.nodes;
        stats.lp_solves += s.stats.lp_solves;
        stats.pivots += s.stats.pivots;
        match s.status {
            Status::Infeasible => return Solution::without_point(Status::Infeasible, stats),
            Status::Unbounded => unbounded = true,
            Status::IterationLimit => limit = true,
            Status::Optimal => {}
        }
        parts.push(s.values);
    }
    if unbounded {
        return Solution::without_point(Status::Unbounded, stats);
    }
    if parts.iter().zip(&reduced.components).any(|(p, c)| p.len() != c.vars.len()) {
        return Solution::without_point(Status::IterationLimit, stats);
    }
    let mut values = reduced.expand(&parts);
    let (lower, upper) = model_bounds(model);
    snap_values(&lower, &upper, &mut values);
    let status = if limit { Status::IterationLimit } else { Status::Optimal };
    Solution { status, objective: model.objective_value(&values), values, duals: None, stats }
}

fn branch_and_bound(model: &MilpModel, opts: &MilpOptions, node_limit: u64) -> Solution {
    let mut engine = Engine::new(model, opts.backend);
    let mut stats = SolveStats::default();
    let group_of = group_index(model);

    stats.nodes = 1;
    let root = match engine.solve(None, &[]) {
        Lp::Optimal(r) => r,
        Lp::Infeasible => return finish_without_point(Status::Infeasible, stats, &engine),
        Lp::Unbounded => return finish_without_point(Status::Unbounded, stats, &engine),
        Lp::Limit => return finish_without_point(Status::IterationLimit, stats, &engine),
    };
    if let NodeState::Sparse(s) = &root.state {
        engine.root_state = Some(s.clone());
    }

    let mut search = Search {
        gap_rel: opts.gap_rel,
        group_of,
        model,
        incumbent: None,
        dive: Vec::new(),
        heap: BinaryHeap::new(),
        seq: 0,
        stored: 0,
        warm_states: opts.warm_states,
    };
    search.consider(root, Vec::new());
    let mut hit_limit = false;

    while let Some(node) = search.pop() {
        if node.state.is_some() {
            search.stored -= 1;
        }
        if search.pruned(node.bound) {
            if search.dive.is_empty() && search.incumbent.is_some() {
                // Best-bound order: nothing left in the heap can beat the incumbent either.
                break;
            }
            continue;
        }
        // Nodes without a stored state are re-solved from the root first.
        let state = match node.state {
            Some(s) => s,
            None => match engine.solve(None, &node.fixes) {
                Lp::Optimal(r) => r.state,
                _ => continue,
            },
        };
        for value in [0.0, 1.0] {
            if stats.nodes >= node_limit {
                hit_limit = true;
                break;
            }
            stats.nodes += 1;
            let mut fixes = node.fixes.clone();
            fixes.push((node.branch, value));
            match engine.solve(Some(&state), &fixes) {
                Lp::Optimal(r) => search.consider(r, fixes),
                Lp::Infeasible | Lp::Unbounded => {}
                Lp::Limit => hit_limit = true,
            }
        }
        if hit_limit {
            break;
        }
    }

    let status = if hit_limit { Status::IterationLimit } else { Status::Optimal };
    let Some(inc) = search.incumbent else {
        let status = if hit_limit { Status::IterationLimit } else { Status::Infeasible };
        return finish_without_point(status, stats, &engine);
    };
    let mut values = engine.polish(&inc);
    let (lower, upper) = model_bounds(model);
    snap_values(&lower, &upper, &mut values);
    stats.lp_solves = engine.lp_solves;
    stats.pivots = engine.pivots;
    Solution { status, objective: model.objective_value(&values), values, duals: None, stats }
}

fn finish_without_point(status: Status, mut stats: SolveStats, engine: &Engine) -> Solution {
    stats.lp_solves = engine.lp_solves;
    stats.pivots = engine.pivots;
    Solution::without_point(status, stats)
}

fn group_index(model: &MilpModel) -> Vec<Option<usize>> {
    let mut out = vec![None; model.num_vars()];
    for (g, members) in model.one_hot_groups().iter().enumerate() {
        for v in members {
            out[v.index()] = Some(g);
        }
    }
    out
}

fn first_fractional(model: &MilpModel, values: &[f64]) -> Option<usize> {
    model
        .variables()
        .iter()
        .zip(values)
        .position(|(v, &x)| v.kind == VarKind::Binary && (x - x.round()).abs() > tol::INTEGRALITY)
}

fn largest_member(members: &[crate::VarId], values: &[f64]) -> usize {
    let mut best = members[0].index();
    for v in members {
        if values[v.index()] > values[best] {
            best = v.index();
        }
    }
    best
}

struct Incumbent {
    objective: f64,
    values: Vec<f64>,
    fixes: Vec<(usize, f64)>,
    state: NodeState,
}

struct Search<'a> {
    gap_rel: f64,
    group_of: Vec<Option<usize>>,
    model: &'a MilpModel,
    incumbent: Option<Incumbent>,
    /// Open nodes while diving, newest last.
    dive: Vec<Open>,
    heap: BinaryHeap<Open>,
    seq: u64,
    /// Open nodes currently holding a warm-start state.
    stored: usize,
    warm_states: usize,
}

impl Search<'_> {
    fn pruned(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some(inc) => bound >= inc.objective - self.gap_rel * inc.objective.abs().max(1.0),
            None => false,
        }
    }

    fn consider(&mut self, r: Relaxed, fixes: Vec<(usize, f64)>) {
        if self.pruned(r.objective) {
            return;
        }
        let Some(first) = first_fractional(self.model, &r.values) else {
            self.incumbent = Some(Incumbent { objective: r.objective, values: r.values, fixes, state: r.state });
            // The dive is over; the remaining nodes move to bound order.
            self.heap.extend(self.dive.drain(..));
            return;
        };
        let branch = match self.group_of[first] {
            Some(g) => largest_member(&self.model.one_hot_groups()[g], &r.values),
            None => first,
        };
        let state = match r.state {
            NodeState::Sparse(s) if self.stored < self.warm_states => {
                self.stored += 1;
                Some(s)
            }
            _ => None,
        }
        .map(NodeState::Sparse);
        self.seq += 1;
        let node = Open { bound: r.objective, seq: self.seq, fixes, branch, state };
        if self.incumbent.is_some() {
            self.heap.push(node);
        } else {
            self.dive.push(node);
        }
    }

    fn pop(&mut self) -> Option<Open> {
        self.dive.pop().or_else(|| self.heap.pop())
    }
}

struct Open {
    bound: f64,
    seq: u64,
    fixes: Vec<(usize, f64)>,
    branch: usize,
    state: Option<NodeState>,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // BinaryHeap is a max-heap: the smallest bound pops first, then the newest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| self.seq.cmp(&other.seq))
    }
}

enum NodeState {
    Sparse(minilp::Solution),
    Dense,
}

struct Relaxed {
    state: NodeState,
    objective: f64,
    values: Vec<f64>,
}

enum Lp {
    Optimal(Relaxed),
    Infeasible,
    Unbounded,
    Limit,
}

struct Engine<'a> {
    model: &'a MilpModel,
    sparse: Option<SparseRelaxation>,
    root_state: Option<minilp::Solution>,
    lp_opts: LpOptions,
    lp_solves: u64,
    pivots: u64,
}

impl<'a> Engine<'a> {
    fn new(model: &'a MilpModel, backend: LpBackend) -> Self {
        let sparse = match backend {
            LpBackend::Sparse => Some(SparseRelaxation::new(model)),
            LpBackend::Dense => None,
        };
        Self { model, sparse, root_state: None, lp_opts: LpOptions::default(), lp_solves: 0, pivots: 0 }
    }

    /// Relaxation with `fixes` applied. With a parent state only the last fixing
    /// is new; without one the whole path is replayed from the root.
    fn solve(&mut self, parent: Option<&NodeState>, fixes: &[(usize, f64)]) -> Lp {
        self.lp_solves += 1;
        let Some(sp) = &self.sparse else {
            let (mut lower, mut upper) = model_bounds(self.model);
            for &(i, v) in fixes {
                lower[i] = v;
                upper[i] = v;
            }
            return self.dense(&lower, &upper);
        };
        let out = match (parent, fixes.split_last()) {
            (_, None) => sp.solve_root(),
            (Some(NodeState::Sparse(p)), Some((&(i, v), _))) => sp.fix(p, i, v),
            (_, Some(_)) => {
                let mut cur = match &self.root_state {
                    Some(r) => r.clone(),
                    None => return Lp::Infeasible,
                };
                for &(i, v) in fixes {
                    match sp.fix(&cur, i, v) {
                        SparseOutcome::Optimal(s) => cur = s,
                        other => return Self::classify(sp, other),
                    }
                }
                SparseOutcome::Optimal(cur)
            }
        };
        Self::classify(sp, out)
    }

    fn classify(sp: &SparseRelaxation, out: SparseOutcome) -> Lp {
        match out {
            SparseOutcome::Optimal(sol) => {
                let values = sp.values(&sol);
                Lp::Optimal(Relaxed { objective: sol.objective(), values, state: NodeState::Sparse(sol) })
            }
            SparseOutcome::Infeasible => Lp::Infeasible,
            SparseOutcome::Unbounded => Lp::Unbounded,
        }
    }

    fn dense(&mut self, lower: &[f64], upper: &[f64]) -> Lp {
        let s = solve_lp_with_bounds(self.model, lower, upper, &self.lp_opts);
        self.pivots += s.stats.pivots;
        match s.status {
            Status::Optimal => Lp::Optimal(Relaxed { objective: s.objective, values: s.values, state: NodeState::Dense }),
            Status::Infeasible => Lp::Infeasible,
            Status::Unbounded => Lp::Unbounded,
            Status::IterationLimit => Lp::Limit,
        }
    }

    /// Re-solves the incumbent's LP with every binary fixed exactly; falls back to
    /// the incumbent's own values if that fails numerically.
    fn polish(&mut self, inc: &Incumbent) -> Vec<f64> {
        let binaries: Vec<(usize, f64)> = self
            .model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| (i, inc.values[i].round()))
            .collect();
        if binaries.is_empty() {
            return inc.values.clone();
        }
        self.lp_solves += 1;
        match &inc.state {
            NodeState::Sparse(sol) => {
                let sp = self.sparse.as_ref().unwrap();
                let mut cur = sol.clone();
                for &(i, v) in &binaries {
                    match sp.fix(&cur, i, v) {
                        SparseOutcome::Optimal(s) => cur = s,
                        _ => return inc.values.clone(),
                    }
                }
                sp.values(&cur)
            }
            NodeState::Dense => {
                let (mut lower, mut upper) = model_bounds(self.model);
                for &(i, v) in inc.fixes.iter().chain(&binaries) {
                    lower[i] = v;
                    upper[i] = v;
                }
                let s = solve_lp_with_bounds(self.model, &lower, &upper, &self.lp_opts);
                self.pivots += s.stats.pivots;
                if s.is_optimal() {
                    s.values
                } else {
                    inc.values.clone()
                }
            }
        }
    }
}
