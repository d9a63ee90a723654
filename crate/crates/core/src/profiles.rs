//! Day profiles: load multiplier, tariff and PV output per step.
//!
//! CSV header: `step,load_mult,price_c_per_kwh,pv_<dg id>...`, optionally
//! followed by `cvr_p` and/or `cvr_q` columns that override every bus's
//! coefficients at that step. Steps run `0..n` and span one day, so the
//! interval length is `24/n` hours.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::devices::inverter_q_bounds;
use crate::feeder::{DeviceFleet, Feeder};

#[derive(Clone, Debug, PartialEq)]
pub struct Profiles {
    pub load_mult: Vec<f64>,
    /// Tariff, cents/kWh.
    pub price: Vec<f64>,
    /// PV active output per DG id, kW.
    pub pv_kw: BTreeMap<String, Vec<f64>>,
    pub cvr_p: Option<Vec<f64>>,
    pub cvr_q: Option<Vec<f64>>,
}

/// Forecast or realized data for one step, network quantities in per-unit.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInputs {
    pub step: usize,
    pub load_mult: f64,
    pub price: f64,
    /// Aligned with `DeviceFleet::dgs`.
    pub pv: Vec<f64>,
    pub cvr_p: Option<f64>,
    pub cvr_q: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("profiles: {0}")]
    Parse(String),
    #[error("profiles row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("profiles have no column pv_{0} for that DG")]
    MissingPv(String),
    #[error("profiles column pv_{0} does not match any DG")]
    UnknownPv(String),
}

/// Deterministic multiplicative forecast error, uniform in `[−σ, σ]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Noise {
    pub seed: u64,
    pub load_sigma: f64,
    pub pv_sigma: f64,
}

impl Profiles {
    pub fn steps(&self) -> usize {
        self.price.len()
    }

    /// Hours per step.
    pub fn tau_h(&self) -> f64 {
        24.0 / self.steps() as f64
    }

    /// Checks the profiles against a feeder: one PV column per DG, output within
    /// the inverter rating, nonnegative prices and multipliers.
    pub fn check(&self, feeder: &Feeder, fleet: &DeviceFleet) -> Result<(), ProfileError> {
        for id in self.pv_kw.keys() {
            if !fleet.dgs.iter().any(|d| &d.id == id) {
                return Err(ProfileError::UnknownPv(id.clone()));
            }
        }
        for dg in &fleet.dgs {
            let col = self.pv_kw.get(&dg.id).ok_or_else(|| ProfileError::MissingPv(dg.id.clone()))?;
            for (t, &kw) in col.iter().enumerate() {
                if !(kw >= 0.0) || inverter_q_bounds(dg.s_rated, kw / feeder.s_base_kva()).is_err() {
                    return Err(ProfileError::Row {
                        row: t,
                        message: format!("pv_{} = {kw} kW outside [0, {}]", dg.id, dg.s_rated * feeder.s_base_kva()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn step_inputs(&self, t: usize, feeder: &Feeder, fleet: &DeviceFleet) -> StepInputs {
        StepInputs {
            step: t,
            load_mult: self.load_mult[t],
            price: self.price[t],
            pv: fleet.dgs.iter().map(|d| self.pv_kw[&d.id][t] / feeder.s_base_kva()).collect(),
            cvr_p: self.cvr_p.as_ref().map(|c| c[t]),
            cvr_q: self.cvr_q.as_ref().map(|c| c[t]),
        }
    }

    /// Perturbed copy used as the realized day when the controller works from a
    /// forecast. PV stays within `[0, rating]`.
    pub fn realize(&self, noise: &Noise, feeder: &Feeder, fleet: &DeviceFleet) -> Profiles {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let mut out = self.clone();
        for x in &mut out.load_mult {
            *x *= 1.0 + noise.load_sigma * rng.gen_range(-1.0..=1.0);
            *x = x.max(0.0);
        }
        for dg in &fleet.dgs {
            let cap = dg.s_rated * feeder.s_base_kva();
            for x in out.pv_kw.get_mut(&dg.id).into_iter().flatten() {
                *x = (*x * (1.0 + noise.pv_sigma * rng.gen_range(-1.0..=1.0))).clamp(0.0, cap);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["step".to_string(), "load_mult".into(), "price_c_per_kwh".into()];
        header.extend(self.pv_kw.keys().map(|k| format!("pv_{k}")));
        if self.cvr_p.is_some() {
            header.push("cvr_p".into());
        }
        if self.cvr_q.is_some() {
            header.push("cvr_q".into());
        }
        let mut s = header.join(",");
        s.push('\n');
        for t in 0..self.steps() {
            let mut row = vec![t.to_string(), self.load_mult[t].to_string(), self.price[t].to_string()];
            row.extend(self.pv_kw.values().map(|c| c[t].to_string()));
            row.extend(self.cvr_p.iter().chain(&self.cvr_q).map(|c| c[t].to_string()));
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Profiles, ProfileError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| ProfileError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_profiles(file)
}

pub fn parse_profiles(reader: impl Read) -> Result<Profiles, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> =
        rdr.headers().map_err(|e| ProfileError::Parse(e.to_string()))?.iter().map(String::from).collect();
    let expect = ["step", "load_mult", "price_c_per_kwh"];
    if header.len() < 3 || header[..3] != expect {
        return Err(ProfileError::Parse(format!("header must start with {}", expect.join(","))));
    }
    enum Col {
        Pv(String),
        CvrP,
        CvrQ,
    }
    let mut cols = Vec::new();
    for h in &header[3..] {
        cols.push(match h.as_str() {
            "cvr_p" => Col::CvrP,
            "cvr_q" => Col::CvrQ,
            _ => match h.strip_prefix("pv_") {
                Some(id) if !id.is_empty() => Col::Pv(id.to_string()),
                _ => return Err(ProfileError::Parse(format!("unknown column `{h}`"))),
            },
        });
    }
    let mut p = Profiles { load_mult: Vec::new(), price: Vec::new(), pv_kw: BTreeMap::new(), cvr_p: None, cvr_q: None };
    for c in &cols {
        match c {
            Col::Pv(id) => {
                if p.pv_kw.insert(id.clone(), Vec::new()).is_some() {
                    return Err(ProfileError::Parse(format!("duplicate column pv_{id}")));
                }
            }
            Col::CvrP => p.cvr_p = Some(Vec::new()),
            Col::CvrQ => p.cvr_q = Some(Vec::new()),
        }
    }
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ProfileError::Row { row, message: e.to_string() })?;
        let num = |k: usize| -> Result<f64, ProfileError> {
            let raw = rec.get(k).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| ProfileError::Row { row, message: format!("`{raw}` in column {} is not a number", header[k]) })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ProfileError::Row { row, message: format!("non-finite value in column {}", header[k]) })
            }
        };
        if rec.get(0).and_then(|s| s.parse::<usize>().ok()) != Some(row) {
            return Err(ProfileError::Row { row, message: format!("step must be {row}") });
        }
        let (lm, price) = (num(1)?, num(2)?);
        if lm < 0.0 || price < 0.0 {
            return Err(ProfileError::Row { row, message: "load_mult and price must be >= 0".into() });
        }
        p.load_mult.push(lm);
        p.price.push(price);
        for (k, c) in cols.iter().enumerate() {
            let v = num(k + 3)?;
            match c {
                Col::Pv(id) => p.pv_kw.get_mut(id).unwrap().push(v),
                Col::CvrP => p.cvr_p.as_mut().unwrap().push(v),
                Col::CvrQ => p.cvr_q.as_mut().unwrap().push(v),
            }
        }
    }
    if p.price.is_empty() {
        return Err(ProfileError::Parse("no rows".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "step,load_mult,price_c_per_kwh,pv_a\n0,0.5,10,0\n1,1.0,60,20.5\n";

    #[test]
    fn parses_and_round_trips() {
        let p = parse_profiles(CSV.as_bytes()).unwrap();
        assert_eq!(p.steps(), 2);
        assert_eq!(p.tau_h(), 12.0);
        assert_eq!(p.pv_kw["a"], vec![0.0, 20.5]);
        assert_eq!(parse_profiles(p.to_csv().as_bytes()).unwrap(), p);
    }

    #[test]
    fn rejects_bad_rows() {
        let gap = CSV.replace("\n1,", "\n2,");
        assert!(matches!(parse_profiles(gap.as_bytes()), Err(ProfileError::Row { row: 1, .. })));
        let neg = CSV.replace("60", "-1");
        assert!(matches!(parse_profiles(neg.as_bytes()), Err(ProfileError::Row { row: 1, .. })));
        let col = CSV.replace("pv_a", "wind");
        assert!(matches!(parse_profiles(col.as_bytes()), Err(ProfileError::Parse(_))));
        let txt = CSV.replace("20.5", "x");
        assert!(matches!(parse_profiles(txt.as_bytes()), Err(ProfileError::Row { row: 1, .. })));
    }
}
