//! Capacitated relay networks.
//!
//! A [`Network`] is an undirected graph whose nodes are partitioned into
//! sensors, relays and a single fusion center. Every edge carries an integral
//! capacity that bounds the rate in either direction. Rates live in a
//! [`RateAssignment`], stored once per edge as a signed value so that the
//! antisymmetry `r_uv = -r_vu` holds exactly.

mod flow;
mod generate;
mod rates;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use flow::{feasible_rates, max_flow, Feasibility};
pub(crate) use flow::FlowSolver;
pub use generate::{generate_layered, LayeredGraphSpec};
pub use rates::{RateAssignment, RateViolation, CONSERVATION_TOL};

/// Node identifier. Identifiers need not be contiguous.
pub type NodeId = usize;

/// An undirected edge `{u, v}` with its capacity in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub capacity: i64,
}

/// Role of a node in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sensor,
    Relay,
    FusionCenter,
}

/// An undirected capacitated graph with designated sensors and fusion center.
///
/// A `Network` may hold data that breaks its invariants (so that
/// [`Network::validate`] has something to report). Operations that need a
/// well-formed graph validate on entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NetworkDocument", into = "NetworkDocument")]
pub struct Network {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    sensors: Vec<NodeId>,
    fusion_center: NodeId,
    index: HashMap<NodeId, usize>,
}

/// On-disk layout of a network. Field names are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkDocument {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    sensors: Vec<NodeId>,
    fusion_center: NodeId,
}

impl From<NetworkDocument> for Network {
    fn from(doc: NetworkDocument) -> Self {
        Network::from_parts(doc.nodes, doc.edges, doc.sensors, doc.fusion_center)
    }
}

impl From<Network> for NetworkDocument {
    fn from(net: Network) -> Self {
        NetworkDocument {
            nodes: net.nodes,
            edges: net.edges,
            sensors: net.sensors,
            fusion_center: net.fusion_center,
        }
    }
}

/// A broken [`Network`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateNode(NodeId),
    SelfLoop(NodeId),
    NegativeCapacity { u: NodeId, v: NodeId, capacity: i64 },
    DuplicateEdge { u: NodeId, v: NodeId },
    UnknownEndpoint { u: NodeId, v: NodeId, missing: NodeId },
    UnknownSensor(NodeId),
    DuplicateSensor(NodeId),
    UnknownFusionCenter(NodeId),
    FusionCenterIsSensor(NodeId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::DuplicateNode(n) => write!(f, "node {n} listed more than once"),
            Violation::SelfLoop(n) => write!(f, "self-loop on node {n}"),
            Violation::NegativeCapacity { u, v, capacity } => {
                write!(f, "edge ({u}, {v}) has negative capacity {capacity}")
            }
            Violation::DuplicateEdge { u, v } => write!(f, "edge ({u}, {v}) appears more than once"),
            Violation::UnknownEndpoint { u, v, missing } => {
                write!(f, "edge ({u}, {v}) references unknown node {missing}")
            }
            Violation::UnknownSensor(n) => write!(f, "sensor {n} is not a node"),
            Violation::DuplicateSensor(n) => write!(f, "sensor {n} listed more than once"),
            Violation::UnknownFusionCenter(n) => write!(f, "fusion center {n} is not a node"),
            Violation::FusionCenterIsSensor(n) => {
                write!(f, "fusion center {n} is also listed as a sensor")
            }
        }
    }
}

impl Network {
    /// Assembles a network without checking invariants.
    pub fn from_parts(
        nodes: Vec<NodeId>,
        edges: Vec<Edge>,
        sensors: Vec<NodeId>,
        fusion_center: NodeId,
    ) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, &n) in nodes.iter().enumerate() {
            index.entry(n).or_insert(i);
        }
        Network {
            nodes,
            edges,
            sensors,
            fusion_center,
            index,
        }
    }

    /// Assembles a network and rejects it if any invariant is broken.
    pub fn new(
        nodes: Vec<NodeId>,
        edges: Vec<Edge>,
        sensors: Vec<NodeId>,
        fusion_center: NodeId,
    ) -> Result<Self> {
        let net = Self::from_parts(nodes, edges, sensors, fusion_center);
        net.ensure_valid()?;
        Ok(net)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sensors(&self) -> &[NodeId] {
        &self.sensors
    }

    pub fn fusion_center(&self) -> NodeId {
        self.fusion_center
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Dense position of `node` in [`Network::nodes`].
    pub fn index_of(&self, node: NodeId) -> Option<usize> {
        self.index.get(&node).copied()
    }

    pub fn role(&self, node: NodeId) -> Option<Role> {
        self.index_of(node)?;
        Some(if node == self.fusion_center {
            Role::FusionCenter
        } else if self.sensors.contains(&node) {
            Role::Sensor
        } else {
            Role::Relay
        })
    }

    /// Relay nodes, in node order.
    pub fn relays(&self) -> Vec<NodeId> {
        let sensors: HashSet<_> = self.sensors.iter().collect();
        self.nodes
            .iter()
            .copied()
            .filter(|n| *n != self.fusion_center && !sensors.contains(n))
            .collect()
    }

    /// Sum of the capacities of the edges incident to `node`. This bounds the
    /// net rate the node can emit.
    pub fn incident_capacity(&self, node: NodeId) -> i64 {
        self.edges
            .iter()
            .filter(|e| e.u == node || e.v == node)
            .map(|e| e.capacity.max(0))
            .sum()
    }

    /// Total capacity over all edges.
    pub fn total_capacity(&self) -> i64 {
        self.edges.iter().map(|e| e.capacity.max(0)).sum()
    }

    /// Returns a copy with the capacity of edge `edge` replaced.
    pub fn with_capacity(&self, edge: usize, capacity: i64) -> Network {
        let mut out = self.clone();
        out.edges[edge].capacity = capacity;
        out
    }

    /// Returns a copy with the sensors listed in a different order.
    pub fn with_sensor_order(&self, sensors: Vec<NodeId>) -> Network {
        Network::from_parts(
            self.nodes.clone(),
            self.edges.clone(),
            sensors,
            self.fusion_center,
        )
    }

    /// Lists every broken invariant. An empty list means the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for &n in &self.nodes {
            if !seen.insert(n) {
                out.push(Violation::DuplicateNode(n));
            }
        }

        let mut pairs = HashSet::new();
        for e in &self.edges {
            if e.u == e.v {
                out.push(Violation::SelfLoop(e.u));
            }
            if e.capacity < 0 {
                out.push(Violation::NegativeCapacity {
                    u: e.u,
                    v: e.v,
                    capacity: e.capacity,
                });
            }
            for missing in [e.u, e.v] {
                if !seen.contains(&missing) {
                    out.push(Violation::UnknownEndpoint {
                        u: e.u,
                        v: e.v,
                        missing,
                    });
                }
            }
            if e.u != e.v && !pairs.insert((e.u.min(e.v), e.u.max(e.v))) {
                out.push(Violation::DuplicateEdge { u: e.u, v: e.v });
            }
        }

        let mut sensors = HashSet::new();
        for &s in &self.sensors {
            if !seen.contains(&s) {
                out.push(Violation::UnknownSensor(s));
            }
            if !sensors.insert(s) {
                out.push(Violation::DuplicateSensor(s));
            }
        }
        if !seen.contains(&self.fusion_center) {
            out.push(Violation::UnknownFusionCenter(self.fusion_center));
        }
        if sensors.contains(&self.fusion_center) {
            out.push(Violation::FusionCenterIsSensor(self.fusion_center));
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(violations))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads a network from a `.json` or `.toml` document and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: Network = if is_toml(path) {
            toml::from_str(&text).map_err(|e| Error::parse(path, e))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?
        };
        net.ensure_valid()?;
        Ok(net)
    }

    /// Writes the network as JSON, or TOML when the extension is `.toml`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if is_toml(path) {
            toml::to_string(self).map_err(|e| Error::parse(path, e))?
        } else {
            self.to_json()
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "toml")
}


#[cfg(test)]
mod tests {
    use super::*;

    fn valid() -> Network {
        generate_layered(&LayeredGraphSpec {
            layer_sizes: [3, 4, 3, 2],
            fanout: 2,
            capacity_range: (1, 5),
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn generated_network_is_valid() {
        assert!(valid().validate().is_empty());
    }

    #[test]
    fn self_loop_is_reported() {
        let net = Network::from_parts(
            vec![0, 1],
            vec![Edge { u: 1, v: 1, capacity: 2 }, Edge { u: 0, v: 1, capacity: 2 }],
            vec![0],
            1,
        );
        assert_eq!(net.validate(), vec![Violation::SelfLoop(1)]);
        assert!(net.validate()[0].to_string().contains("node 1"));
    }

    #[test]
    fn negative_capacity_is_reported() {
        let net = Network::from_parts(
            vec![0, 1],
            vec![Edge { u: 0, v: 1, capacity: -1 }],
            vec![0],
            1,
        );
        assert_eq!(
            net.validate(),
            vec![Violation::NegativeCapacity { u: 0, v: 1, capacity: -1 }]
        );
    }

    #[test]
    fn duplicate_edge_in_either_orientation() {
        let net = Network::from_parts(
            vec![0, 1],
            vec![Edge { u: 0, v: 1, capacity: 1 }, Edge { u: 1, v: 0, capacity: 1 }],
            vec![0],
            1,
        );
        assert_eq!(net.validate(), vec![Violation::DuplicateEdge { u: 1, v: 0 }]);
    }

    #[test]
    fn partition_violations() {
        let net = Network::from_parts(vec![0, 1, 1], vec![], vec![0, 0, 7, 1], 9);
        let v = net.validate();
        assert!(v.contains(&Violation::DuplicateNode(1)));
        assert!(v.contains(&Violation::DuplicateSensor(0)));
        assert!(v.contains(&Violation::UnknownSensor(7)));
        assert!(v.contains(&Violation::UnknownFusionCenter(9)));
        assert!(Network::new(vec![0, 1], vec![], vec![0, 1], 1).is_err());
    }

    #[test]
    fn disconnected_sensor_is_legal() {
        let net = Network::new(vec![0, 1, 2], vec![Edge { u: 1, v: 2, capacity: 3 }], vec![0, 1], 2);
        assert!(net.is_ok());
    }

    #[test]
    fn roles_and_relays() {
        let net = fixtures::shared_relay(2, 3);
        assert_eq!(net.role(0), Some(Role::Sensor));
        assert_eq!(net.role(2), Some(Role::Relay));
        assert_eq!(net.role(3), Some(Role::FusionCenter));
        assert_eq!(net.role(42), None);
        assert_eq!(net.relays(), vec![2]);
        assert_eq!(net.incident_capacity(2), 7);
    }

    #[test]
    fn json_uses_fixed_field_names() {
        let net = fixtures::path(5, 3);
        let json: serde_json::Value = serde_json::from_str(&net.to_json()).unwrap();
        assert_eq!(json["fusion_center"], 2);
        assert_eq!(json["sensors"], serde_json::json!([0]));
        assert_eq!(json["edges"][1], serde_json::json!({"u": 1, "v": 2, "capacity": 3}));
        assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn save_and_load_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let net = valid();
        for name in ["net.json", "net.toml"] {
            let p = dir.path().join(name);
            net.save(&p).unwrap();
            assert_eq!(Network::load(&p).unwrap(), net);
        }
    }

    #[test]
    fn load_rejects_invalid_network() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(
            &p,
            r#"{"nodes":[0,1],"edges":[{"u":0,"v":0,"capacity":1}],"sensors":[0],"fusion_center":1}"#,
        )
        .unwrap();
        assert!(matches!(Network::load(&p), Err(Error::InvalidNetwork(_))));
    }
}
