use std::fmt;

use serde::Serialize;

use super::{Network, NodeId};

/// Tolerance on net outflow at relays and on derived sensor rates.
pub const CONSERVATION_TOL: f64 = 1e-9;

/// Per-edge rates and the net rate each sensor emits.
///
/// `edge_rates[i]` is the rate from `edges[i].u` to `edges[i].v`; the reverse
/// orientation is its negation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateAssignment {
    edge_rates: Vec<f64>,
    sensor_rates: Vec<f64>,
}

/// A broken [`RateAssignment`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum RateViolation {
    Shape { edges: usize, expected: usize },
    NonFinite { edge: usize },
    OverCapacity { u: NodeId, v: NodeId, rate: f64, capacity: i64 },
    Conservation { relay: NodeId, net_outflow: f64 },
    SensorRateMismatch { sensor: NodeId, stored: f64, derived: f64 },
    NegativeSensorRate { sensor: NodeId, rate: f64 },
}

impl fmt::Display for RateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RateViolation::Shape { edges, expected } => {
                write!(f, "{edges} edge rates for a network with {expected} edges")
            }
            RateViolation::NonFinite { edge } => write!(f, "edge {edge} has a non-finite rate"),
            RateViolation::OverCapacity { u, v, rate, capacity } => {
                write!(f, "|r({u}, {v})| = {} exceeds capacity {capacity}", rate.abs())
            }
            RateViolation::Conservation { relay, net_outflow } => {
                write!(f, "relay {relay} has net outflow {net_outflow:e}")
            }
            RateViolation::SensorRateMismatch { sensor, stored, derived } => {
                write!(f, "sensor {sensor} stores rate {stored} but edges give {derived}")
            }
            RateViolation::NegativeSensorRate { sensor, rate } => {
                write!(f, "sensor {sensor} has negative rate {rate}")
            }
        }
    }
}

impl RateAssignment {
    /// The all-zero assignment.
    pub fn zero(net: &Network) -> Self {
        RateAssignment {
            edge_rates: vec![0.0; net.edges().len()],
            sensor_rates: vec![0.0; net.num_sensors()],
        }
    }

    /// Builds an assignment from per-edge rates, deriving the sensor rates.
    pub fn from_edge_rates(net: &Network, edge_rates: Vec<f64>) -> Self {
        let outflow = net_outflow(net, &edge_rates);
        let sensor_rates = net
            .sensors()
            .iter()
            .map(|&s| net.index_of(s).map_or(0.0, |i| outflow[i]))
            .collect();
        RateAssignment {
            edge_rates,
            sensor_rates,
        }
    }

    pub fn edge_rates(&self) -> &[f64] {
        &self.edge_rates
    }

    /// Net outflow of each sensor, in the network's sensor order.
    pub fn sensor_rates(&self) -> &[f64] {
        &self.sensor_rates
    }

    /// Rate from `u` to `v`, or `None` if there is no such edge.
    pub fn rate(&self, net: &Network, u: NodeId, v: NodeId) -> Option<f64> {
        net.edges().iter().zip(&self.edge_rates).find_map(|(e, &r)| {
            if e.u == u && e.v == v {
                Some(r)
            } else if e.u == v && e.v == u {
                Some(-r)
            } else {
                None
            }
        })
    }

    /// Sum of the sensor rates.
    pub fn total(&self) -> f64 {
        self.sensor_rates.iter().sum()
    }

    pub fn is_integral(&self) -> bool {
        self.edge_rates.iter().all(|r| r.fract() == 0.0)
    }

    /// Sensor rates as integers. Only meaningful for integral assignments.
    pub fn integral_sensor_rates(&self) -> Vec<u32> {
        self.sensor_rates
            .iter()
            .map(|r| r.round().max(0.0) as u32)
            .collect()
    }

    /// Checks every invariant against `net`: exact capacity bounds, relay
    /// conservation and derived sensor rates within [`CONSERVATION_TOL`], and
    /// nonnegative sensor rates.
    pub fn verify(&self, net: &Network) -> Vec<RateViolation> {
        let mut out = Vec::new();
        if self.edge_rates.len() != net.edges().len()
            || self.sensor_rates.len() != net.num_sensors()
        {
            out.push(RateViolation::Shape {
                edges: self.edge_rates.len(),
                expected: net.edges().len(),
            });
            return out;
        }
        for (i, (e, &r)) in net.edges().iter().zip(&self.edge_rates).enumerate() {
            if !r.is_finite() {
                out.push(RateViolation::NonFinite { edge: i });
            } else if r.abs() > e.capacity as f64 {
                out.push(RateViolation::OverCapacity {
                    u: e.u,
                    v: e.v,
                    rate: r,
                    capacity: e.capacity,
                });
            }
        }
        let outflow = net_outflow(net, &self.edge_rates);
        for relay in net.relays() {
            let net_out = outflow[net.index_of(relay).expect("relay is a node")];
            if net_out.abs() > CONSERVATION_TOL {
                out.push(RateViolation::Conservation {
                    relay,
                    net_outflow: net_out,
                });
            }
        }
        for (&s, &stored) in net.sensors().iter().zip(&self.sensor_rates) {
            let derived = net.index_of(s).map_or(0.0, |i| outflow[i]);
            if (stored - derived).abs() > CONSERVATION_TOL {
                out.push(RateViolation::SensorRateMismatch {
                    sensor: s,
                    stored,
                    derived,
                });
            }
            if stored < -CONSERVATION_TOL {
                out.push(RateViolation::NegativeSensorRate { sensor: s, rate: stored });
            }
        }
        out
    }
}

/// Net outflow of every node, indexed like `net.nodes()`.
fn net_outflow(net: &Network, edge_rates: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; net.nodes().len()];
    for (e, &r) in net.edges().iter().zip(edge_rates) {
        if let (Some(u), Some(v)) = (net.index_of(e.u), net.index_of(e.v)) {
            out[u] += r;
            out[v] -= r;
        }
    }
    out
}
