//! Battery state-of-charge dynamics and its MILP block.
//!
//! `p_cd` is charge (+) / discharge (−) power in kW. The optional Big-M block
//! introduces the discharge magnitude `p_d = max(0, −p_cd)` with indicator
//! binaries `δ` (discharging) and `β`; it is only needed when `p_d` is priced.

use cvr_milp::{LinExpr, MilpModel, ModelError, Sense, VarId};
use serde::{Deserialize, Serialize};

/// Smallest discharge, in kW, that counts as discharging in the Big-M block.
pub const EPSILON_KW: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessParams {
    pub q_bat_kwh: f64,
    pub c_r_kw: f64,
    pub d_r_kw: f64,
    /// Per-step self-discharge fraction.
    #[serde(default)]
    pub eta: f64,
    /// Efficiency applied to both directions.
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default = "e_minus")]
    pub e_minus: f64,
    #[serde(default = "one")]
    pub e_plus: f64,
    /// Initial state of charge; defaults to `e_minus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soc0: Option<f64>,
    #[serde(default = "tau")]
    pub tau_h: f64,
}

fn one() -> f64 {
    1.0
}
fn e_minus() -> f64 {
    0.25
}
fn tau() -> f64 {
    0.25
}

impl BessParams {
    pub fn soc_initial(&self) -> f64 {
        self.soc0.unwrap_or(self.e_minus)
    }

    pub fn validate(&self) -> Result<(), String> {
        let s0 = self.soc_initial();
        if !(0.0 <= self.e_minus && self.e_minus <= s0 && s0 <= self.e_plus && self.e_plus <= 1.0) {
            return Err(format!("need 0 <= e_minus <= soc0 <= e_plus <= 1, got {} / {s0} / {}", self.e_minus, self.e_plus));
        }
        if !(self.q_bat_kwh > 0.0 && self.c_r_kw > 0.0 && self.d_r_kw > 0.0 && self.tau_h > 0.0) {
            return Err("capacity, rates and tau_h must be positive".into());
        }
        if !(0.0 <= self.eta && self.eta < 1.0) || !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(format!("need 0 <= eta < 1 and 0 < rho <= 1, got {} / {}", self.eta, self.rho));
        }
        Ok(())
    }

    /// Big-M constant in kW: ten times the larger rate.
    pub fn big_m(&self) -> f64 {
        10.0 * self.c_r_kw.max(self.d_r_kw)
    }
}

/// `(1 − η)·soc + ρ·p_cd·τ/Q`.
pub fn soc_update(soc: f64, p_cd_kw: f64, params: &BessParams) -> f64 {
    (1.0 - params.eta) * soc + params.rho * p_cd_kw * params.tau_h / params.q_bat_kwh
}

#[derive(Clone, Debug)]
pub struct BigMVars {
    pub p_d: Vec<VarId>,
    pub delta: Vec<VarId>,
    pub beta: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct BessVars {
    pub p_cd: Vec<VarId>,
    /// `soc[k]` is the state at the start of window step `k`; `soc[0]` is fixed
    /// to the measured state and `soc[W]` is the state after the window.
    pub soc: Vec<VarId>,
    /// `abs[k] ≥ |p_cd[k]|`, used for the minimal-cycling tie-break.
    pub abs: Vec<VarId>,
    pub big_m: Option<BigMVars>,
}

#[derive(Clone, Debug, Default)]
pub struct BessOptions {
    pub include_bigm: bool,
    /// Require the state after the window to be at least this.
    pub terminal_soc: Option<f64>,
}

/// Battery rows for window steps `m .. m+w` starting from `soc_m`.
pub fn bess_constraints(
    model: &mut MilpModel,
    params: &BessParams,
    m: usize,
    w: usize,
    soc_m: f64,
    opts: &BessOptions,
) -> Result<BessVars, ModelError> {
    let mut soc = Vec::with_capacity(w + 1);
    let s0 = model.add_continuous(format!("soc_t{m}"), soc_m, soc_m)?;
    soc.push(s0);
    let mut p_cd = Vec::with_capacity(w);
    let mut abs = Vec::with_capacity(w);
    let gain = params.rho * params.tau_h / params.q_bat_kwh;
    for k in 0..w {
        let t = m + k;
        let p = model.add_continuous(format!("pcd_t{t}"), -params.d_r_kw, params.c_r_kw)?;
        let lower = match (k + 1 == w, opts.terminal_soc) {
            (true, Some(min)) => params.e_minus.max(min),
            _ => params.e_minus,
        };
        let s = model.add_continuous(format!("soc_t{}", t + 1), lower, params.e_plus)?;
        model.add_constraint(
            format!("soc_step_t{t}"),
            LinExpr::from([(s, 1.0), (soc[k], -(1.0 - params.eta)), (p, -gain)]),
            Sense::Eq,
            0.0,
        )?;
        let a = model.add_continuous(format!("abs_pcd_t{t}"), 0.0, params.c_r_kw.max(params.d_r_kw))?;
        model.add_constraint(format!("abs_pos_t{t}"), LinExpr::from([(a, 1.0), (p, -1.0)]), Sense::Ge, 0.0)?;
        model.add_constraint(format!("abs_neg_t{t}"), LinExpr::from([(a, 1.0), (p, 1.0)]), Sense::Ge, 0.0)?;
        soc.push(s);
        p_cd.push(p);
        abs.push(a);
    }
    let big_m = if opts.include_bigm { Some(big_m_block(model, params, m, &p_cd)?) } else { None };
    Ok(BessVars { p_cd, soc, abs, big_m })
}

fn big_m_block(model: &mut MilpModel, params: &BessParams, m: usize, p_cd: &[VarId]) -> Result<BigMVars, ModelError> {
    let big = params.big_m();
    let eps = EPSILON_KW;
    let mut out = BigMVars { p_d: Vec::new(), delta: Vec::new(), beta: Vec::new() };
    for (k, &p) in p_cd.iter().enumerate() {
        let t = m + k;
        let pd = model.add_continuous(format!("pd_t{t}"), 0.0, f64::INFINITY)?;
        let d = model.add_binary(format!("delta_t{t}"))?;
        let b = model.add_binary(format!("beta_t{t}"))?;
        let mut row = |name: &str, terms: &[(VarId, f64)], sense, rhs| {
            model.add_constraint(format!("{name}_t{t}"), LinExpr::from(terms.iter().copied()), sense, rhs)
        };
        // −p_cd ≥ ε − M(1−δ)
        row("bm_dis_on", &[(p, -1.0), (d, -big)], Sense::Ge, eps - big)?;
        // −p_cd ≤ Mδ
        row("bm_dis_off", &[(p, -1.0), (d, -big)], Sense::Le, 0.0)?;
        // −Mδ ≤ p_d ≤ Mδ
        row("bm_pd_ub", &[(pd, 1.0), (d, -big)], Sense::Le, 0.0)?;
        row("bm_pd_lb", &[(pd, 1.0), (d, big)], Sense::Ge, 0.0)?;
        // ±p_cd ≤ p_d + M(1−δ)
        row("bm_abs_pos", &[(p, 1.0), (pd, -1.0), (d, big)], Sense::Le, big)?;
        row("bm_abs_neg", &[(p, -1.0), (pd, -1.0), (d, big)], Sense::Le, big)?;
        // p_cd ≥ p_d − M(1−δ) − Mβ
        row("bm_sel_pos", &[(p, 1.0), (pd, -1.0), (d, -big), (b, big)], Sense::Ge, -big)?;
        // −p_cd ≥ p_d − M(1−δ) − M(1−β)
        row("bm_sel_neg", &[(p, -1.0), (pd, -1.0), (d, -big), (b, -big)], Sense::Ge, -2.0 * big)?;
        out.p_d.push(pd);
        out.delta.push(d);
        out.beta.push(b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cvr_milp::{solve_lp, Status};

    pub(crate) fn params() -> BessParams {
        BessParams {
            q_bat_kwh: 300.0,
            c_r_kw: 100.0,
            d_r_kw: 100.0,
            eta: 0.0,
            rho: 1.0,
            e_minus: 0.25,
            e_plus: 1.0,
            soc0: None,
            tau_h: 0.25,
        }
    }

    #[test]
    fn soc_update_examples() {
        let p = params();
        assert_eq!(soc_update(0.5, 0.0, &p), 0.5);
        assert!((soc_update(0.5, 100.0, &p) - (0.5 + 25.0 / 300.0)).abs() < 1e-15);
        assert!((soc_update(0.5, 100.0, &p) - 0.58333).abs() < 1e-5);
        assert!((soc_update(0.5, -100.0, &p) - 0.41667).abs() < 1e-5);
        assert_eq!(params().soc_initial(), 0.25);
        assert_eq!(params().big_m(), 1000.0);
    }

    #[test]
    fn validation() {
        assert!(params().validate().is_ok());
        assert!(BessParams { soc0: Some(0.1), ..params() }.validate().is_err());
        assert!(BessParams { rho: 0.0, ..params() }.validate().is_err());
        assert!(BessParams { eta: 1.0, ..params() }.validate().is_err());
    }

    /// One-step window with Big-M, `p_cd` pinned; returns the status and, when
    /// feasible, the unique `(δ, p_d)` completion (checked by min and max).
    fn pinned(p_cd: f64) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for sign in [1.0, -1.0] {
            let mut m = MilpModel::new("bm");
            let v = bess_constraints(&mut m, &params(), 0, 1, 0.5, &BessOptions { include_bigm: true, ..Default::default() }).unwrap();
            m.fix(v.p_cd[0], p_cd).unwrap();
            let bm = v.big_m.unwrap();
            let mut best = None;
            // δ and β enumerated: each completion is an LP.
            for (d, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                let mut leaf = m.clone();
                leaf.fix(bm.delta[0], d).unwrap();
                leaf.fix(bm.beta[0], b).unwrap();
                leaf.set_objective(LinExpr::term(bm.p_d[0], sign)).unwrap();
                let s = solve_lp(&leaf);
                if s.status == Status::Optimal {
                    let pd = s.value(bm.p_d[0]);
                    match best {
                        None => best = Some((d, pd)),
                        Some((d0, pd0)) => {
                            assert_eq!(d0, d, "δ not unique for p_cd={p_cd}");
                            assert!((pd0 - pd).abs() < 1e-9, "p_d not unique for p_cd={p_cd}");
                        }
                    }
                }
            }
            if let (Some(a), Some(b)) = (out, best) {
                assert_eq!(a.0, b.0);
                assert!((a.1 - b.1).abs() < 1e-9);
            }
            out = best;
        }
        out
    }

    #[test]
    fn big_m_block_examples() {
        assert_eq!(pinned(-50.0), Some((1.0, 50.0)));
        assert_eq!(pinned(50.0), Some((0.0, 0.0)));
        assert_eq!(pinned(0.0), Some((0.0, 0.0)));
        assert_eq!(pinned(-0.5 * EPSILON_KW), None);
    }

    proptest::proptest! {
        #[test]
        fn big_m_gives_discharge_magnitude(p_cd in -100.0f64..100.0) {
            proptest::prop_assume!(!(-EPSILON_KW < p_cd && p_cd < 0.0));
            let (_, pd) = pinned(p_cd).unwrap();
            proptest::prop_assert!((pd - (-p_cd).max(0.0)).abs() < 1e-9);
        }
    }
}
