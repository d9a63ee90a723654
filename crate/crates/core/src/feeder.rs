//! Radial feeder data model, file format and topology validation.
//!
//! Network quantities are per-unit on `s_base_kva`; battery data stays in
//! kW/kWh. Bus ids in files are arbitrary unique integers; everything inside
//! the crate addresses buses and edges by their position in the lists.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bess::BessParams;
use crate::devices::Regulator;
use crate::{V_MAX, V_MIN};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Substation,
    Load,
    Junction,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Line,
    Regulator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// Peak active load, per-unit.
    pub p0: f64,
    /// Peak reactive load, per-unit.
    pub q0: f64,
    pub cvr_p: f64,
    pub cvr_q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Parent bus id.
    pub from: u32,
    /// Child bus id.
    pub to: u32,
    pub r: f64,
    pub x: f64,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapBank {
    /// Index into [`Feeder::buses`].
    pub bus: usize,
    pub q_rated: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmartDg {
    /// Also the `pv_<id>` column in profile files.
    pub id: String,
    /// Index into [`Feeder::buses`].
    pub bus: usize,
    pub s_rated: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviceFleet {
    pub regulators: Vec<Regulator>,
    pub capacitors: Vec<CapBank>,
    pub dgs: Vec<SmartDg>,
    /// Sited at the substation, outside every nodal balance.
    pub battery: Option<BessParams>,
}

impl DeviceFleet {
    pub fn has_discrete_devices(&self) -> bool {
        !self.regulators.is_empty() || !self.capacitors.is_empty()
    }
}

/// Parent map and root-first order of a radial feeder, all by index.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    pub parent_edge: Vec<Option<usize>>,
    /// Breadth-first from the root; children visited in edge-list order.
    pub order: Vec<usize>,
    /// Outgoing edges of each bus, in edge-list order.
    pub children: Vec<Vec<usize>>,
    /// `(parent, child)` bus indices of each edge.
    pub ends: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feeder {
    s_base_kva: f64,
    v_base_kv: f64,
    v0: f64,
    buses: Vec<Bus>,
    edges: Vec<Edge>,
    topo: Topology,
}

#[derive(Debug, Error, PartialEq)]
pub enum FeederError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("edge {edge} references unknown bus {bus}")]
    UnknownBus { edge: usize, bus: u32 },
    #[error("feeder is not radial: edge {edge} ({from}->{to}) closes a cycle")]
    Cycle { edge: usize, from: u32, to: u32 },
    #[error("feeder is disconnected: bus {0} is not reachable from the substation")]
    Disconnected(u32),
    #[error("expected exactly one substation bus, found {0}")]
    SubstationCount(usize),
    #[error("edge {edge} ({from}->{to}) points toward the substation")]
    ReversedEdge { edge: usize, from: u32, to: u32 },
    #[error("invalid {what}: {message}")]
    Invalid { what: String, message: String },
    #[error("{device} references {target}, which does not exist or has the wrong kind")]
    DanglingDevice { device: String, target: String },
}

fn invalid(what: impl Into<String>, message: impl Into<String>) -> FeederError {
    FeederError::Invalid { what: what.into(), message: message.into() }
}

/// Checks that `edges` form a tree rooted at the single substation bus with
/// every edge oriented away from it.
pub fn validate_radial(buses: &[Bus], edges: &[Edge]) -> Result<Topology, FeederError> {
    let mut index = HashMap::with_capacity(buses.len());
    for (i, b) in buses.iter().enumerate() {
        if index.insert(b.id, i).is_some() {
            return Err(FeederError::DuplicateBus(b.id));
        }
    }
    let subs: Vec<usize> = (0..buses.len()).filter(|&i| buses[i].kind == BusKind::Substation).collect();
    if subs.len() != 1 {
        return Err(FeederError::SubstationCount(subs.len()));
    }
    let root = subs[0];
    let mut ends = Vec::with_capacity(edges.len());
    for (e, edge) in edges.iter().enumerate() {
        let lookup = |bus: u32| index.get(&bus).copied().ok_or(FeederError::UnknownBus { edge: e, bus });
        ends.push((lookup(edge.from)?, lookup(edge.to)?));
    }

    // Union-find catches the first edge that closes a cycle, self-loops included.
    let mut uf: Vec<usize> = (0..buses.len()).collect();
    fn find(uf: &mut [usize], mut a: usize) -> usize {
        while uf[a] != a {
            uf[a] = uf[uf[a]];
            a = uf[a];
        }
        a
    }
    for (e, &(a, b)) in ends.iter().enumerate() {
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra == rb {
            return Err(FeederError::Cycle { edge: e, from: edges[e].from, to: edges[e].to });
        }
        uf[ra] = rb;
    }

    let mut incident = vec![Vec::new(); buses.len()];
    for (e, &(a, b)) in ends.iter().enumerate() {
        incident[a].push(e);
        incident[b].push(e);
    }
    let mut parent = vec![None; buses.len()];
    let mut parent_edge = vec![None; buses.len()];
    let mut children = vec![Vec::new(); buses.len()];
    let mut seen = vec![false; buses.len()];
    let mut order = Vec::with_capacity(buses.len());
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &e in &incident[i] {
            let (a, b) = ends[e];
            let other = if a == i { b } else { a };
            if seen[other] {
                continue;
            }
            if a != i {
                return Err(FeederError::ReversedEdge { edge: e, from: edges[e].from, to: edges[e].to });
            }
            seen[other] = true;
            parent[other] = Some(i);
            parent_edge[other] = Some(e);
            children[i].push(e);
            queue.push_back(other);
        }
    }
    if let Some(lost) = seen.iter().position(|s| !s) {
        return Err(FeederError::Disconnected(buses[lost].id));
    }
    Ok(Topology { root, parent, parent_edge, order, children, ends })
}

impl Feeder {
    pub fn new(s_base_kva: f64, v_base_kv: f64, v0: f64, buses: Vec<Bus>, edges: Vec<Edge>) -> Result<Self, FeederError> {
        if !(s_base_kva > 0.0 && s_base_kva.is_finite()) {
            return Err(invalid("s_base_kva", format!("{s_base_kva} must be positive")));
        }
        if !(v_base_kv > 0.0 && v_base_kv.is_finite()) {
            return Err(invalid("v_base_kv", format!("{v_base_kv} must be positive")));
        }
        if !(V_MIN..=V_MAX).contains(&v0) {
            return Err(invalid("v0", format!("squared substation voltage {v0} outside [{V_MIN}, {V_MAX}]")));
        }
        for b in &buses {
            for (name, val) in [("p0", b.p0), ("q0", b.q0), ("cvr_p", b.cvr_p), ("cvr_q", b.cvr_q)] {
                if !(val >= 0.0 && val.is_finite()) {
                    return Err(invalid(format!("bus {} {name}", b.id), format!("{val} must be finite and >= 0")));
                }
            }
            if b.kind == BusKind::Substation && (b.p0 != 0.0 || b.q0 != 0.0) {
                return Err(invalid(format!("bus {}", b.id), "the substation bus cannot carry load"));
            }
        }
        for (e, edge) in edges.iter().enumerate() {
            if !(edge.r >= 0.0 && edge.x >= 0.0 && edge.r.is_finite() && edge.x.is_finite()) {
                return Err(invalid(format!("edge {e}"), "impedance must be finite and >= 0"));
            }
            if edge.kind == EdgeKind::Regulator && (edge.r != 0.0 || edge.x != 0.0) {
                return Err(invalid(format!("edge {e}"), "regulator edges carry no impedance"));
            }
        }
        let topo = validate_radial(&buses, &edges)?;
        Ok(Self { s_base_kva, v_base_kv, v0, buses, edges, topo })
    }

    pub fn s_base_kva(&self) -> f64 {
        self.s_base_kva
    }

    pub fn v_base_kv(&self) -> f64 {
        self.v_base_kv
    }

    /// Squared substation voltage magnitude, per-unit.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn root(&self) -> usize {
        self.topo.root
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Base impedance in ohms.
    pub fn z_base(&self) -> f64 {
        1000.0 * self.v_base_kv * self.v_base_kv / self.s_base_kva
    }

    /// Buses with nonzero peak load.
    pub fn load_buses(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.buses.len()).filter(|&i| self.buses[i].p0 > 0.0 || self.buses[i].q0 > 0.0)
    }
}

// ---- file format ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeederFile {
    base: BaseFile,
    buses: Vec<BusFile>,
    edges: Vec<EdgeFile>,
    #[serde(default)]
    devices: DevicesFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaseFile {
    s_base_kva: f64,
    v_base_kv: f64,
    /// Substation voltage magnitude; squared on load.
    #[serde(default = "one")]
    v0_pu: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusFile {
    id: u32,
    kind: BusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p0_kw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p0_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q0_kvar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q0_pu: Option<f64>,
    #[serde(default)]
    cvr_p: f64,
    #[serde(default)]
    cvr_q: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    from: u32,
    to: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_pu: Option<f64>,
    #[serde(default = "line")]
    kind: EdgeKind,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DevicesFile {
    #[serde(default)]
    regulators: Vec<RegulatorFile>,
    #[serde(default)]
    capacitors: Vec<CapFile>,
    #[serde(default)]
    dgs: Vec<DgFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    battery: Option<BessParams>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegulatorFile {
    edge: usize,
    #[serde(default = "tap_min")]
    tap_min: i32,
    #[serde(default = "tap_max")]
    tap_max: i32,
    #[serde(default = "tap_step")]
    step: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapFile {
    bus: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_rated_kvar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_rated_pu: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DgFile {
    id: String,
    bus: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_rated_kva: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_rated_pu: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn line() -> EdgeKind {
    EdgeKind::Line
}
fn tap_min() -> i32 {
    -16
}
fn tap_max() -> i32 {
    16
}
fn tap_step() -> f64 {
    0.00625
}

/// Picks the physical or per-unit spelling of a quantity; giving both is an error.
fn either(what: impl fmt::Display, phys: Option<f64>, pu: Option<f64>, base: f64) -> Result<Option<f64>, FeederError> {
    match (phys, pu) {
        (Some(_), Some(_)) => Err(invalid(what.to_string(), "give either the physical or the per-unit value, not both")),
        (Some(v), None) => Ok(Some(v / base)),
        (None, v) => Ok(v),
    }
}

pub fn load_feeder(path: impl AsRef<Path>) -> Result<(Feeder, DeviceFleet), FeederError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| FeederError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_feeder(&text)
}

pub fn parse_feeder(json: &str) -> Result<(Feeder, DeviceFleet), FeederError> {
    let file: FeederFile = serde_json::from_str(json).map_err(|e| FeederError::Parse(e.to_string()))?;
    let s_base = file.base.s_base_kva;
    if !(s_base > 0.0) {
        return Err(invalid("s_base_kva", format!("{s_base} must be positive")));
    }
    let mut buses = Vec::with_capacity(file.buses.len());
    for b in &file.buses {
        buses.push(Bus {
            id: b.id,
            kind: b.kind,
            p0: either(format_args!("bus {} p0", b.id), b.p0_kw, b.p0_pu, s_base)?.unwrap_or(0.0),
            q0: either(format_args!("bus {} q0", b.id), b.q0_kvar, b.q0_pu, s_base)?.unwrap_or(0.0),
            cvr_p: b.cvr_p,
            cvr_q: b.cvr_q,
        });
    }
    let z_base = 1000.0 * file.base.v_base_kv * file.base.v_base_kv / s_base;
    let mut edges = Vec::with_capacity(file.edges.len());
    for (i, e) in file.edges.iter().enumerate() {
        edges.push(Edge {
            from: e.from,
            to: e.to,
            r: either(format_args!("edge {i} r"), e.r_ohm, e.r_pu, z_base)?.unwrap_or(0.0),
            x: either(format_args!("edge {i} x"), e.x_ohm, e.x_pu, z_base)?.unwrap_or(0.0),
            kind: e.kind,
        });
    }
    let v0 = file.base.v0_pu * file.base.v0_pu;
    let feeder = Feeder::new(s_base, file.base.v_base_kv, v0, buses, edges)?;

    let bus_of = |device: String, id: u32| {
        feeder
            .bus_index(id)
            .filter(|&i| i != feeder.root())
            .ok_or_else(|| FeederError::DanglingDevice { device, target: format!("bus {id}") })
    };
    let mut fleet = DeviceFleet::default();
    for (k, r) in file.devices.regulators.iter().enumerate() {
        let ok = feeder.edges().get(r.edge).is_some_and(|e| e.kind == EdgeKind::Regulator);
        if !ok || fleet.regulators.iter().any(|q: &Regulator| q.edge == r.edge) {
            return Err(FeederError::DanglingDevice {
                device: format!("regulator {k}"),
                target: format!("regulator edge {}", r.edge),
            });
        }
        let reg = Regulator { edge: r.edge, tap_min: r.tap_min, tap_max: r.tap_max, step: r.step };
        reg.validate().map_err(|m| invalid(format!("regulator {k}"), m))?;
        fleet.regulators.push(reg);
    }
    for (e, edge) in feeder.edges().iter().enumerate() {
        if edge.kind == EdgeKind::Regulator && !fleet.regulators.iter().any(|r| r.edge == e) {
            return Err(invalid(format!("edge {e}"), "regulator edge has no regulator device"));
        }
    }
    for (k, c) in file.devices.capacitors.iter().enumerate() {
        let bus = bus_of(format!("capacitor {k}"), c.bus)?;
        let q_rated = either(format_args!("capacitor {k} q_rated"), c.q_rated_kvar, c.q_rated_pu, s_base)?.unwrap_or(0.0);
        if !(q_rated > 0.0 && q_rated.is_finite()) {
            return Err(invalid(format!("capacitor {k}"), "q_rated must be positive"));
        }
        fleet.capacitors.push(CapBank { bus, q_rated });
    }
    for d in &file.devices.dgs {
        if d.id.is_empty() || !d.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(invalid(format!("dg `{}`", d.id), "ids are limited to ASCII letters, digits and `_`"));
        }
        if fleet.dgs.iter().any(|g: &SmartDg| g.id == d.id) {
            return Err(invalid(format!("dg `{}`", d.id), "duplicate id"));
        }
        let bus = bus_of(format!("dg {}", d.id), d.bus)?;
        let s_rated = either(format_args!("dg {} s_rated", d.id), d.s_rated_kva, d.s_rated_pu, s_base)?.unwrap_or(0.0);
        if !(s_rated > 0.0 && s_rated.is_finite()) {
            return Err(invalid(format!("dg `{}`", d.id), "s_rated must be positive"));
        }
        fleet.dgs.push(SmartDg { id: d.id.clone(), bus, s_rated });
    }
    if let Some(b) = &file.devices.battery {
        b.validate().map_err(|m| invalid("battery", m))?;
        fleet.battery = Some(b.clone());
    }
    Ok((feeder, fleet))
}

/// Serializes to the feeder file format with every quantity in per-unit, so
/// reloading reproduces the model field for field.
pub fn feeder_to_json(feeder: &Feeder, fleet: &DeviceFleet) -> String {
    let file = FeederFile {
        base: BaseFile { s_base_kva: feeder.s_base_kva, v_base_kv: feeder.v_base_kv, v0_pu: feeder.v0.sqrt() },
        buses: feeder
            .buses
            .iter()
            .map(|b| BusFile {
                id: b.id,
                kind: b.kind,
                p0_kw: None,
                p0_pu: Some(b.p0),
                q0_kvar: None,
                q0_pu: Some(b.q0),
                cvr_p: b.cvr_p,
                cvr_q: b.cvr_q,
            })
            .collect(),
        edges: feeder
            .edges
            .iter()
            .map(|e| EdgeFile { from: e.from, to: e.to, r_ohm: None, r_pu: Some(e.r), x_ohm: None, x_pu: Some(e.x), kind: e.kind })
            .collect(),
        devices: DevicesFile {
            regulators: fleet
                .regulators
                .iter()
                .map(|r| RegulatorFile { edge: r.edge, tap_min: r.tap_min, tap_max: r.tap_max, step: r.step })
                .collect(),
            capacitors: fleet
                .capacitors
                .iter()
                .map(|c| CapFile { bus: feeder.buses[c.bus].id, q_rated_kvar: None, q_rated_pu: Some(c.q_rated) })
                .collect(),
            dgs: fleet
                .dgs
                .iter()
                .map(|d| DgFile { id: d.id.clone(), bus: feeder.buses[d.bus].id, s_rated_kva: None, s_rated_pu: Some(d.s_rated) })
                .collect(),
            battery: fleet.battery.clone(),
        },
    };
    serde_json::to_string_pretty(&file).expect("feeder serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: u32, kind: BusKind) -> Bus {
        Bus { id, kind, p0: 0.0, q0: 0.0, cvr_p: 0.0, cvr_q: 0.0 }
    }

    fn edge(from: u32, to: u32) -> Edge {
        Edge { from, to, r: 0.01, x: 0.02, kind: EdgeKind::Line }
    }

    fn star_or_chain(edges: &[(u32, u32)], n: u32) -> Result<Topology, FeederError> {
        let mut buses: Vec<_> = (0..n).map(|i| bus(i, BusKind::Load)).collect();
        buses[0].kind = BusKind::Substation;
        let edges: Vec<_> = edges.iter().map(|&(a, b)| edge(a, b)).collect();
        validate_radial(&buses, &edges)
    }

    #[test]
    fn single_edge() {
        let t = star_or_chain(&[(0, 1)], 2).unwrap();
        assert_eq!(t.parent, vec![None, Some(0)]);
        assert_eq!(t.order, vec![0, 1]);
    }

    #[test]
    fn star_is_root_first() {
        let t = star_or_chain(&[(0, 1), (0, 2), (0, 3)], 4).unwrap();
        assert_eq!(t.order, vec![0, 1, 2, 3]);
        assert_eq!(t.children[0], vec![0, 1, 2]);
    }

    #[test]
    fn chain_order() {
        let t = star_or_chain(&[(2, 3), (0, 1), (1, 2)], 4).unwrap();
        assert_eq!(t.order, vec![0, 1, 2, 3]);
        assert_eq!(t.parent_edge, vec![None, Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn topology_errors() {
        assert_eq!(
            star_or_chain(&[(0, 1), (1, 2), (2, 0)], 3),
            Err(FeederError::Cycle { edge: 2, from: 2, to: 0 })
        );
        assert_eq!(star_or_chain(&[(0, 1)], 3), Err(FeederError::Disconnected(2)));
        assert_eq!(star_or_chain(&[(1, 0)], 2), Err(FeederError::ReversedEdge { edge: 0, from: 1, to: 0 }));
        assert_eq!(star_or_chain(&[(0, 7)], 2), Err(FeederError::UnknownBus { edge: 0, bus: 7 }));
        let buses = vec![bus(0, BusKind::Substation), bus(0, BusKind::Load)];
        assert_eq!(validate_radial(&buses, &[]), Err(FeederError::DuplicateBus(0)));
        let buses = vec![bus(0, BusKind::Substation), bus(1, BusKind::Substation)];
        assert_eq!(validate_radial(&buses, &[edge(0, 1)]), Err(FeederError::SubstationCount(2)));
    }

    const TWO_BUS: &str = r#"{
        "base": {"s_base_kva": 1000, "v_base_kv": 4.16},
        "buses": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load", "p0_kw": 100, "q0_kvar": 50}],
        "edges": [{"from": 0, "to": 1, "r_pu": 0.01, "x_pu": 0.02}]
    }"#;

    #[test]
    fn two_bus_file() {
        let (f, fleet) = parse_feeder(TWO_BUS).unwrap();
        assert_eq!(f.edges().len(), 1);
        assert_eq!(f.buses()[1].p0, 0.1);
        assert_eq!(f.buses()[1].q0, 0.05);
        assert_eq!(f.v0(), 1.0);
        assert_eq!(fleet, DeviceFleet::default());
    }

    #[test]
    fn ohms_and_kw_normalize_like_per_unit() {
        let z_base = 1000.0 * 4.16 * 4.16 / 1000.0;
        let phys = TWO_BUS.replace("\"r_pu\": 0.01, \"x_pu\": 0.02", &format!("\"r_ohm\": {}, \"x_ohm\": {}", 0.01 * z_base, 0.02 * z_base));
        let pu = TWO_BUS.replace("\"p0_kw\": 100, \"q0_kvar\": 50", "\"p0_pu\": 0.1, \"q0_pu\": 0.05");
        let (a, _) = parse_feeder(&phys).unwrap();
        let (b, _) = parse_feeder(&pu).unwrap();
        assert!((a.edges()[0].r - 0.01).abs() < 1e-12 && (a.edges()[0].x - 0.02).abs() < 1e-12);
        assert!((b.buses()[1].p0 - 0.1).abs() < 1e-12 && (b.buses()[1].q0 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn file_errors_name_the_element() {
        let both = TWO_BUS.replace("\"p0_kw\": 100", "\"p0_kw\": 100, \"p0_pu\": 0.1");
        assert!(matches!(parse_feeder(&both), Err(FeederError::Invalid { what, .. }) if what == "bus 1 p0"));
        let cap = TWO_BUS.replace("}]\n    }", "}],\n \"devices\": {\"capacitors\": [{\"bus\": 9, \"q_rated_kvar\": 10}]}\n    }");
        assert_eq!(
            parse_feeder(&cap),
            Err(FeederError::DanglingDevice { device: "capacitor 0".into(), target: "bus 9".into() })
        );
        assert!(matches!(parse_feeder("{"), Err(FeederError::Parse(_))));
    }
}
