//! Regulators, capacitor banks, smart inverters and voltage-dependent loads,
//! as numeric models and as MILP constraint blocks.
//!
//! Both bilinear device equations (`v_j = A·v_i` with `A` picked by one-hot tap
//! binaries, `q_C = q_rated·u·v`) are binary-times-bounded-continuous products,
//! so the four McCormick inequalities encode them exactly once the binaries are
//! integral. The bounds used are the ones on the voltage variable in the model.

use cvr_milp::{LinExpr, MilpModel, ModelError, Sense, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regulator {
    /// Index into [`crate::Feeder::edges`]; the edge must have kind `regulator`.
    pub edge: usize,
    pub tap_min: i32,
    pub tap_max: i32,
    /// Voltage-magnitude ratio change per tap.
    pub step: f64,
}

impl Regulator {
    pub fn validate(&self) -> Result<(), String> {
        if self.tap_min > 0 || self.tap_max < 0 || self.tap_min >= self.tap_max {
            return Err(format!("tap range [{}, {}] must contain 0 and be nonempty", self.tap_min, self.tap_max));
        }
        if !(self.step > 0.0) || 1.0 + self.step * self.tap_min as f64 <= 0.0 {
            return Err(format!("tap step {} gives a non-positive ratio", self.step));
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<i32> {
        (self.tap_min..=self.tap_max).collect()
    }

    /// Squared ratio at `tap`: `(1 + step·tap)²`.
    pub fn ratio(&self, tap: i32) -> f64 {
        let a = 1.0 + self.step * tap as f64;
        a * a
    }
}

/// `(tap, squared ratio)` for every position of the regulator.
pub fn tap_ratio_table(reg: &Regulator) -> Vec<(i32, f64)> {
    reg.positions().into_iter().map(|t| (t, reg.ratio(t))).collect()
}

/// How many evenly spaced tap positions the scheduling model offers.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TapSet {
    All,
    /// `n` positions from `tap_min` to `tap_max` inclusive; the range must split evenly.
    Evenly(usize),
}

impl TapSet {
    pub fn positions(&self, reg: &Regulator) -> Result<Vec<i32>, DeviceError> {
        match *self {
            TapSet::All => Ok(reg.positions()),
            TapSet::Evenly(n) => {
                let span = (reg.tap_max - reg.tap_min) as usize;
                if n < 2 || span % (n - 1) != 0 {
                    return Err(DeviceError::TapSet { count: n, tap_min: reg.tap_min, tap_max: reg.tap_max });
                }
                let stride = (span / (n - 1)) as i32;
                Ok((0..n as i32).map(|k| reg.tap_min + k * stride).collect())
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("inverter output {p} exceeds its rating {s_rated}")]
    OverRated { p: f64, s_rated: f64 },
    #[error("cannot pick {count} evenly spaced taps in [{tap_min}, {tap_max}]")]
    TapSet { count: usize, tap_min: i32, tap_max: i32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reactive capability `(q_min, q_max)` of an inverter of rating `s_rated` producing `p`.
pub fn inverter_q_bounds(s_rated: f64, p: f64) -> Result<(f64, f64), DeviceError> {
    if p > s_rated {
        return Err(DeviceError::OverRated { p, s_rated });
    }
    let q = (s_rated * s_rated - p * p).max(0.0).sqrt();
    Ok((-q, q))
}

/// Load at squared voltage `v`: `p0·(1 + cvr_p/2·(v − 1))`, likewise for `q`.
pub fn cvr_load_eval(p0: f64, q0: f64, cvr_p: f64, cvr_q: f64, v: f64) -> (f64, f64) {
    (p0 * (1.0 + cvr_p / 2.0 * (v - 1.0)), q0 * (1.0 + cvr_q / 2.0 * (v - 1.0)))
}

#[derive(Clone, Debug)]
pub struct RegulatorVars {
    pub taps: Vec<i32>,
    /// One-hot tap selectors, aligned with `taps`.
    pub u: Vec<VarId>,
    /// `w[k] = u[k]·v_i`.
    pub w: Vec<VarId>,
}

impl RegulatorVars {
    /// Tap whose selector is (closest to) one.
    pub fn selected(&self, values: &[f64]) -> i32 {
        let mut best = 0;
        for k in 1..self.u.len() {
            if values[self.u[k].index()] > values[self.u[best].index()] {
                best = k;
            }
        }
        self.taps[best]
    }
}

#[derive(Clone, Debug)]
pub struct CapVars {
    pub u: VarId,
    pub q: VarId,
}

/// Adds the rows of `z = u·v` for binary `u`, with `z` given by `coef·z_var`
/// (`coef` scales a rated quantity into the product).
fn mccormick(model: &mut MilpModel, name: &str, z: VarId, u: VarId, v: VarId, coef: f64) -> Result<(), ModelError> {
    let (lo, hi) = (model.variable(v).lower, model.variable(v).upper);
    // z ≤ c·hi·u,  z ≥ c·lo·u,  z ≤ c(v − lo(1−u)),  z ≥ c(v − hi(1−u))
    model.add_constraint(format!("{name}_ub_u"), LinExpr::from([(z, 1.0), (u, -coef * hi)]), Sense::Le, 0.0)?;
    model.add_constraint(format!("{name}_lb_u"), LinExpr::from([(z, 1.0), (u, -coef * lo)]), Sense::Ge, 0.0)?;
    model.add_constraint(
        format!("{name}_ub_v"),
        LinExpr::from([(z, 1.0), (v, -coef), (u, -coef * lo)]),
        Sense::Le,
        -coef * lo,
    )?;
    model.add_constraint(
        format!("{name}_lb_v"),
        LinExpr::from([(z, 1.0), (v, -coef), (u, -coef * hi)]),
        Sense::Ge,
        -coef * hi,
    )?;
    Ok(())
}

/// Tap selection for one regulator at one step: `Σu = 1`, `w_k = u_k·v_i`,
/// `Σw = v_i` and `v_j = Σ B_k·w_k`.
///
/// `Σw = v_i` is implied once the binaries are integral; it only tightens the
/// relaxation.
pub fn regulator_constraints(
    model: &mut MilpModel,
    label: &str,
    reg: &Regulator,
    taps: &[i32],
    v_i: VarId,
    v_j: VarId,
) -> Result<RegulatorVars, ModelError> {
    let (lo, hi) = (model.variable(v_i).lower, model.variable(v_i).upper);
    let mut u = Vec::with_capacity(taps.len());
    let mut w = Vec::with_capacity(taps.len());
    for (k, _) in taps.iter().enumerate() {
        u.push(model.add_binary(format!("utap_{label}_k{k}"))?);
        w.push(model.add_continuous(format!("w_{label}_k{k}"), 0.0_f64.min(lo), hi)?);
    }
    model.add_constraint(format!("tap_onehot_{label}"), LinExpr::from(u.iter().map(|&x| (x, 1.0))), Sense::Eq, 1.0)?;
    model.declare_one_hot(u.clone())?;
    for k in 0..taps.len() {
        mccormick(model, &format!("tapmc_{label}_k{k}"), w[k], u[k], v_i, 1.0)?;
    }
    let sum_w = LinExpr::from(w.iter().map(|&x| (x, 1.0))).with(v_i, -1.0);
    model.add_constraint(format!("tap_sumw_{label}"), sum_w, Sense::Eq, 0.0)?;
    let ratio = LinExpr::from(w.iter().zip(taps).map(|(&x, &t)| (x, -reg.ratio(t)))).with(v_j, 1.0);
    model.add_constraint(format!("tap_ratio_{label}"), ratio, Sense::Eq, 0.0)?;
    Ok(RegulatorVars { taps: taps.to_vec(), u, w })
}

/// Switched capacitor at one step: `q = q_rated·u·v`.
pub fn capacitor_constraints(model: &mut MilpModel, label: &str, q_rated: f64, v: VarId) -> Result<CapVars, ModelError> {
    let hi = model.variable(v).upper;
    let u = model.add_binary(format!("ucap_{label}"))?;
    let q = model.add_continuous(format!("qc_{label}"), 0.0, q_rated * hi)?;
    mccormick(model, &format!("capmc_{label}"), q, u, v, q_rated)?;
    Ok(CapVars { u, q })
}

/// `p_L = p0(1 + cvr_p/2·(v − 1))` and the reactive twin as equality rows over new
/// variables `(p_L, q_L)`.
pub fn cvr_load_constraints(
    model: &mut MilpModel,
    label: &str,
    p0: f64,
    q0: f64,
    cvr_p: f64,
    cvr_q: f64,
    v: VarId,
) -> Result<(VarId, VarId), ModelError> {
    let p = model.add_continuous(format!("pL_{label}"), f64::NEG_INFINITY, f64::INFINITY)?;
    let q = model.add_continuous(format!("qL_{label}"), f64::NEG_INFINITY, f64::INFINITY)?;
    let kp = p0 * cvr_p / 2.0;
    let kq = q0 * cvr_q / 2.0;
    model.add_constraint(format!("cvrp_{label}"), LinExpr::from([(p, 1.0), (v, -kp)]), Sense::Eq, p0 - kp)?;
    model.add_constraint(format!("cvrq_{label}"), LinExpr::from([(q, 1.0), (v, -kq)]), Sense::Eq, q0 - kq)?;
    Ok((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{V_MAX, V_MIN};
    use cvr_milp::{solve_lp, Status};

    fn reg() -> Regulator {
        Regulator { edge: 0, tap_min: -16, tap_max: 16, step: 0.00625 }
    }

    #[test]
    fn ratio_table_endpoints() {
        let t = tap_ratio_table(&reg());
        assert_eq!(t.len(), 33);
        assert_eq!(t[16], (0, 1.0));
        assert!((t[0].1 - 0.81).abs() < 1e-15);
        assert!((t[32].1 - 1.21).abs() < 1e-15);
        assert!(t.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn reduced_tap_sets() {
        assert_eq!(TapSet::Evenly(5).positions(&reg()).unwrap(), vec![-16, -8, 0, 8, 16]);
        assert_eq!(TapSet::Evenly(9).positions(&reg()).unwrap(), vec![-16, -12, -8, -4, 0, 4, 8, 12, 16]);
        assert_eq!(TapSet::All.positions(&reg()).unwrap().len(), 33);
        assert!(TapSet::Evenly(6).positions(&reg()).is_err());
    }

    #[test]
    fn inverter_bounds() {
        assert_eq!(inverter_q_bounds(1.15, 1.15).unwrap(), (0.0, 0.0));
        assert_eq!(inverter_q_bounds(1.15, 0.0).unwrap(), (-1.15, 1.15));
        let (lo, hi) = inverter_q_bounds(1.15, 1.0).unwrap();
        assert!((hi - 0.3225f64.sqrt()).abs() < 1e-15 && lo == -hi);
        assert!((hi - 0.5679).abs() < 1e-4);
        assert!(inverter_q_bounds(1.0, 1.01).is_err());
    }

    #[test]
    fn cvr_load_values() {
        assert_eq!(cvr_load_eval(2.0, 1.0, 0.6, 3.0, 1.0), (2.0, 1.0));
        let (p, q) = cvr_load_eval(1.0, 1.0, 0.6, 3.0, V_MIN);
        assert!((p - 0.97075).abs() < 1e-12);
        assert!((q - 0.85375).abs() < 1e-12);
    }

    /// Builds `v_i` (fixed), `v_j` free in the voltage band, and the regulator block
    /// with the selector pinned to `tap`; returns the LP status and `v_j`.
    fn pinned_regulator(v_i: f64, tap: i32) -> (Status, f64) {
        let mut m = MilpModel::new("reg");
        let vi = m.add_continuous("vi", V_MIN, V_MAX).unwrap();
        let vj = m.add_continuous("vj", V_MIN, V_MAX).unwrap();
        m.fix(vi, v_i).unwrap();
        let taps = TapSet::All.positions(&reg()).unwrap();
        let rv = regulator_constraints(&mut m, "r0", &reg(), &taps, vi, vj).unwrap();
        for (k, &t) in taps.iter().enumerate() {
            m.fix(rv.u[k], if t == tap { 1.0 } else { 0.0 }).unwrap();
        }
        m.set_objective(LinExpr::term(vj, 1.0)).unwrap();
        let lo = solve_lp(&m);
        if !lo.is_optimal() {
            return (lo.status, f64::NAN);
        }
        m.set_objective(LinExpr::term(vj, -1.0)).unwrap();
        let hi = solve_lp(&m);
        assert!((lo.value(vj) - hi.value(vj)).abs() < 1e-12, "regulator output not unique");
        (lo.status, lo.value(vj))
    }

    #[test]
    fn regulator_block_examples() {
        assert_eq!(pinned_regulator(1.0, 0), (Status::Optimal, 1.0));
        assert_eq!(pinned_regulator(1.0, -16).0, Status::Infeasible);
        assert_eq!(pinned_regulator(V_MAX, -16).0, Status::Infeasible);
    }

    #[test]
    fn regulator_block_is_exact_at_every_tap() {
        for v_i in [V_MIN, 0.95, 1.0, 1.05, V_MAX] {
            for (tap, b) in tap_ratio_table(&reg()) {
                let want = b * v_i;
                let (status, got) = pinned_regulator(v_i, tap);
                if (V_MIN..=V_MAX).contains(&want) {
                    assert_eq!(status, Status::Optimal);
                    assert!((got - want).abs() < 1e-12, "tap {tap} v_i {v_i}: {got} vs {want}");
                } else {
                    assert_eq!(status, Status::Infeasible, "tap {tap} v_i {v_i}");
                }
            }
        }
    }

    #[test]
    fn relaxed_regulator_output_is_convex_combination() {
        let mut m = MilpModel::new("reg");
        let vi = m.add_continuous("vi", V_MIN, V_MAX).unwrap();
        let vj = m.add_continuous("vj", V_MIN, V_MAX).unwrap();
        m.fix(vi, 1.0).unwrap();
        let taps = vec![-8, 0, 8];
        let rv = regulator_constraints(&mut m, "r0", &reg(), &taps, vi, vj).unwrap();
        m.fix(rv.u[0], 0.5).unwrap();
        m.fix(rv.u[1], 0.0).unwrap();
        m.fix(rv.u[2], 0.5).unwrap();
        let s = solve_lp(&m);
        let want = 0.5 * reg().ratio(-8) + 0.5 * reg().ratio(8);
        assert!((s.value(vj) - want).abs() < 1e-12);
    }

    fn pinned_cap(v: f64, u: f64, q_rated: f64) -> f64 {
        let mut m = MilpModel::new("cap");
        let vv = m.add_continuous("v", V_MIN, V_MAX).unwrap();
        m.fix(vv, v).unwrap();
        let c = capacitor_constraints(&mut m, "c0", q_rated, vv).unwrap();
        m.fix(c.u, u).unwrap();
        m.set_objective(LinExpr::term(c.q, 1.0)).unwrap();
        let lo = solve_lp(&m).value(c.q);
        m.set_objective(LinExpr::term(c.q, -1.0)).unwrap();
        let hi = solve_lp(&m).value(c.q);
        assert!((lo - hi).abs() < 1e-12);
        lo
    }

    #[test]
    fn capacitor_block_examples() {
        assert_eq!(pinned_cap(1.0, 0.0, 0.5), 0.0);
        assert!((pinned_cap(1.0, 1.0, 0.5) - 0.5).abs() < 1e-12);
        assert!((pinned_cap(V_MIN, 1.0, 0.5) - 0.45125).abs() < 1e-12);
        for v in [V_MIN, 0.97, 1.0, 1.08, V_MAX] {
            assert!((pinned_cap(v, 1.0, 0.2) - 0.2 * v).abs() < 1e-12);
            assert_eq!(pinned_cap(v, 0.0, 0.2), 0.0);
        }
    }

    #[test]
    fn cvr_rows_match_eval() {
        let mut m = MilpModel::new("load");
        let v = m.add_continuous("v", V_MIN, V_MAX).unwrap();
        m.fix(v, 0.93).unwrap();
        let (p, q) = cvr_load_constraints(&mut m, "b1", 0.4, 0.2, 0.6, 3.0, v).unwrap();
        let s = solve_lp(&m);
        let (pe, qe) = cvr_load_eval(0.4, 0.2, 0.6, 3.0, 0.93);
        assert!((s.value(p) - pe).abs() < 1e-12 && (s.value(q) - qe).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn cvr_load_is_affine_and_increasing(p0 in 0.0f64..2.0, c in 0.01f64..2.0, a in V_MIN..V_MAX, b in V_MIN..V_MAX) {
            let f = |v| cvr_load_eval(p0, 0.0, c, 0.0, v).0;
            let mid = f(0.5 * (a + b));
            proptest::prop_assert!((mid - 0.5 * (f(a) + f(b))).abs() < 1e-12);
            if p0 > 0.0 {
                proptest::prop_assert!(f(V_MIN) > 0.0);
                if a < b { proptest::prop_assert!(f(a) < f(b)); }
            }
        }

        #[test]
        fn inverter_bounds_symmetric(s in 0.01f64..3.0, frac in 0.0f64..=1.0) {
            let (lo, hi) = inverter_q_bounds(s, s * frac).unwrap();
            proptest::prop_assert_eq!(lo, -hi);
            proptest::prop_assert!(hi >= 0.0 && hi <= s);
        }
    }
}
