//! Single-commodity flow from a super-source attached to every sensor to the
//! fusion center, found by shortest augmenting paths (Edmonds-Karp).
//!
//! Capacities are `f64` so the same engine serves integral max flow and
//! feasibility checks against real-valued demands. Integer-valued inputs stay
//! exact: every augmentation adds and subtracts integers.

use std::collections::VecDeque;

use super::{Network, RateAssignment};
use crate::error::{Error, Result};

const RESIDUAL_EPS: f64 = 1e-12;
const NONE: usize = usize::MAX;

/// Residual graph with one source arc per sensor.
#[derive(Debug, Clone)]
pub(crate) struct FlowSolver {
    to: Vec<usize>,
    residual: Vec<f64>,
    adj: Vec<Vec<usize>>,
    source: usize,
    sink: usize,
    edge_arc: Vec<usize>,
    edge_cap: Vec<f64>,
    sensor_arc: Vec<usize>,
    source_cap: Vec<f64>,
    // scratch
    parent: Vec<usize>,
    queue: VecDeque<usize>,
}

impl FlowSolver {
    /// Builds the residual graph with every source arc closed. `net` must be
    /// valid.
    pub fn new(net: &Network) -> Self {
        let n = net.nodes().len();
        let source = n;
        let sink = net.index_of(net.fusion_center()).expect("valid network");
        let mut solver = FlowSolver {
            to: Vec::with_capacity(2 * (net.edges().len() + net.num_sensors())),
            residual: Vec::new(),
            adj: vec![Vec::new(); n + 1],
            source,
            sink,
            edge_arc: Vec::with_capacity(net.edges().len()),
            edge_cap: Vec::with_capacity(net.edges().len()),
            sensor_arc: Vec::with_capacity(net.num_sensors()),
            source_cap: vec![0.0; net.num_sensors()],
            parent: vec![NONE; n + 1],
            queue: VecDeque::new(),
        };
        for &s in net.sensors() {
            let s = net.index_of(s).expect("valid network");
            let arc = solver.add_pair(source, s, 0.0, 0.0);
            solver.sensor_arc.push(arc);
        }
        for e in net.edges() {
            let u = net.index_of(e.u).expect("valid network");
            let v = net.index_of(e.v).expect("valid network");
            let c = e.capacity as f64;
            let arc = solver.add_pair(u, v, c, c);
            solver.edge_arc.push(arc);
            solver.edge_cap.push(c);
        }
        solver
    }

    fn add_pair(&mut self, u: usize, v: usize, forward: f64, backward: f64) -> usize {
        let arc = self.to.len();
        self.to.extend([v, u]);
        self.residual.extend([forward, backward]);
        self.adj[u].push(arc);
        self.adj[v].push(arc + 1);
        arc
    }

    /// Sets the capacity of sensor `k`'s source arc. It must not drop below
    /// the flow already on the arc.
    pub fn set_source_capacity(&mut self, k: usize, cap: f64) {
        let arc = self.sensor_arc[k];
        let delta = cap - self.source_cap[k];
        debug_assert!(self.residual[arc] + delta >= -RESIDUAL_EPS);
        self.residual[arc] = (self.residual[arc] + delta).max(0.0);
        self.source_cap[k] = cap;
    }

    pub fn source_capacity(&self, k: usize) -> f64 {
        self.source_cap[k]
    }

    /// Flow on sensor `k`'s source arc.
    pub fn sensor_flow(&self, k: usize) -> f64 {
        self.source_cap[k] - self.residual[self.sensor_arc[k]]
    }

    /// Augments along shortest residual paths until none remains. Returns
    /// the flow added.
    ///
    /// Breadth-first search visits arcs in insertion order, so among paths of
    /// equal length the one leaving through the earliest sensor wins.
    pub fn augment(&mut self) -> f64 {
        let mut total = 0.0;
        while let Some(delta) = self.augment_once() {
            total += delta;
        }
        total
    }

    fn augment_once(&mut self) -> Option<f64> {
        self.parent.fill(NONE);
        self.queue.clear();
        self.queue.push_back(self.source);
        // Mark the source as reached with a sentinel distinct from NONE.
        self.parent[self.source] = NONE - 1;
        'bfs: while let Some(u) = self.queue.pop_front() {
            for &arc in &self.adj[u] {
                let v = self.to[arc];
                if self.parent[v] != NONE || self.residual[arc] <= RESIDUAL_EPS {
                    continue;
                }
                self.parent[v] = arc;
                if v == self.sink {
                    break 'bfs;
                }
                self.queue.push_back(v);
            }
        }
        if self.parent[self.sink] == NONE {
            return None;
        }
        let mut delta = f64::INFINITY;
        let mut v = self.sink;
        while v != self.source {
            let arc = self.parent[v];
            delta = delta.min(self.residual[arc]);
            v = self.to[arc ^ 1];
        }
        let mut v = self.sink;
        while v != self.source {
            let arc = self.parent[v];
            self.residual[arc] -= delta;
            self.residual[arc ^ 1] += delta;
            v = self.to[arc ^ 1];
        }
        Some(delta)
    }

    /// Whether each sensor is reachable from the source in the residual
    /// graph, i.e. lies on the source side of the minimal minimum cut.
    pub fn source_side_sensors(&self) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[self.source] = true;
        let mut queue = VecDeque::from([self.source]);
        while let Some(u) = queue.pop_front() {
            for &arc in &self.adj[u] {
                let v = self.to[arc];
                if !seen[v] && self.residual[arc] > RESIDUAL_EPS {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        self.sensor_arc.iter().map(|&arc| seen[self.to[arc]]).collect()
    }

    /// Current rate on every network edge, oriented as stored.
    pub fn edge_rates(&self) -> Vec<f64> {
        self.edge_arc
            .iter()
            .zip(&self.edge_cap)
            .map(|(&arc, &c)| c - self.residual[arc])
            .collect()
    }

    pub fn assignment(&self, net: &Network) -> RateAssignment {
        RateAssignment::from_edge_rates(net, self.edge_rates())
    }
}

/// Maximizes the total rate delivered to the fusion center.
///
/// Every sensor hangs off a super-source arc whose capacity is the sum of the
/// sensor's incident edge capacities. The per-sensor split is made
/// reproducible by augmenting shortest paths first and, among equally short
/// paths, the one through the sensor listed first.
pub fn max_flow(net: &Network) -> Result<RateAssignment> {
    net.ensure_valid()?;
    let mut solver = FlowSolver::new(net);
    for (k, &s) in net.sensors().iter().enumerate() {
        solver.set_source_capacity(k, net.incident_capacity(s) as f64);
    }
    solver.augment();
    Ok(solver.assignment(net))
}

/// Outcome of [`feasible_rates`].
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    /// Achieves the demands exactly when `feasible`; otherwise the largest
    /// flow found under the demand caps.
    pub assignment: RateAssignment,
}

/// Decides whether every sensor can emit at least its demand at once.
///
/// `demands` follows the network's sensor order.
pub fn feasible_rates(net: &Network, demands: &[f64]) -> Result<Feasibility> {
    net.ensure_valid()?;
    if demands.len() != net.num_sensors() {
        return Err(Error::InvalidInput(format!(
            "{} demands for {} sensors",
            demands.len(),
            net.num_sensors()
        )));
    }
    if let Some(d) = demands.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "demand {d} is not a nonnegative number"
        )));
    }
    let mut solver = FlowSolver::new(net);
    for (k, &d) in demands.iter().enumerate() {
        solver.set_source_capacity(k, d);
    }
    solver.augment();
    let feasible = demands
        .iter()
        .enumerate()
        .all(|(k, &d)| d - solver.sensor_flow(k) <= 1e-9 * d.max(1.0));
    Ok(Feasibility {
        feasible,
        assignment: solver.assignment(net),
    })
}
