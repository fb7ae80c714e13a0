use serde::Serialize;

use super::{Method, NumSolution};
use crate::network::{Network, NodeId};

/// Serializable summary of a [`NumSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    pub sensors: Vec<SensorRow>,
    pub objective_real: f64,
    pub objective_integral: f64,
    pub total_real: f64,
    pub total_integral: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gap: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensorRow {
    pub sensor: NodeId,
    pub real_rate: f64,
    pub integral_rate: f64,
}

impl NumSolution {
    pub fn report(&self, net: &Network) -> SolutionReport {
        let sensors = net
            .sensors()
            .iter()
            .zip(self.real_rates.sensor_rates())
            .zip(self.integral_rates.sensor_rates())
            .map(|((&sensor, &real_rate), &integral_rate)| SensorRow {
                sensor,
                real_rate,
                integral_rate,
            })
            .collect();
        SolutionReport {
            sensors,
            objective_real: self.objective_real,
            objective_integral: self.objective_integral,
            total_real: self.real_rates.total(),
            total_integral: self.integral_rates.total(),
            iterations: self.iterations,
            converged: self.converged,
            gap: self.gap,
            method: self.method,
        }
    }
}
