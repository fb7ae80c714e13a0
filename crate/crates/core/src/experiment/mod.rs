//! Reproducible comparisons of the proposed allocation against max flow.
//!
//! An [`ExperimentConfig`] fixes the network, the inference task and every
//! seed, so a rerun produces byte-identical CSV.

mod config;
mod report;

use std::path::{Path, PathBuf};

pub use config::{
    detection_setting, CurvesBlock, DetectionBlock, EstimationBlock, ExperimentConfig,
    NamedPair, NetworkSource, Seeds, Task,
};
pub use report::{AllocationRow, ComparisonReport, Label};

use crate::detection::{detection_utility, divergence_curve, total_kl, DensityPair, MAX_TABULATED_RATE};
use crate::error::{Error, Result};
use crate::estimation::{make_sensing_matrix, monte_carlo_mse, SensingModel};
use crate::network::{feasible_rates, max_flow, Network, RateAssignment};
use crate::num::{objective, solve, UtilityFunction};

/// Which allocation a report row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    MaxFlow,
    Proposed,
}

impl Allocation {
    pub fn name(self) -> &'static str {
        match self {
            Allocation::MaxFlow => "max_flow",
            Allocation::Proposed => "proposed",
        }
    }
}

/// Draws or loads the configured network. `base` resolves a relative
/// network path.
pub fn build_network(config: &ExperimentConfig, base: Option<&Path>) -> Result<Network> {
    config
        .network
        .as_ref()
        .ok_or_else(|| Error::Config("missing [network] block".into()))?
        .build(config.seeds.graph, base)
}

/// Max flow and the proposed allocation for each `alpha`, scored by
/// predicted and Monte Carlo mean squared error.
pub fn run_estimation_experiment(config: &ExperimentConfig, net: &Network) -> Result<ComparisonReport> {
    let block = config
        .estimation
        .as_ref()
        .ok_or_else(|| Error::Config("estimation task needs an [estimation] block".into()))?;
    let n = net.num_sensors();
    if block.weak_count > n || block.dim > n {
        return Err(Error::Config(format!(
            "the network has {n} sensors, fewer than dim {} or weak_count {}",
            block.dim, block.weak_count
        )));
    }
    let flow = max_flow(net)?;
    let mut rows = Vec::new();
    for &alpha in &block.alphas {
        let a = make_sensing_matrix(n, block.dim, block.weak_count, alpha, config.seeds.matrix)?;
        let model = SensingModel::new(a, block.noise_half_width, block.range)?;
        let utilities = model.utilities();
        let solution = solve(net, &utilities, &config.solver)?;

        for (method, rates, relaxed) in [
            (Allocation::MaxFlow, &flow, None),
            (Allocation::Proposed, &solution.integral_rates, Some(&solution)),
        ] {
            let bits = checked_rates(net, rates)?;
            let mc = monte_carlo_mse(&model, &bits, config.runs, config.seeds.mc);
            rows.push(AllocationRow {
                method,
                label: Label::Alpha(alpha),
                total_bits: bits.iter().map(|&b| b as u64).sum(),
                objective: objective_at(&utilities, &bits),
                relaxed_objective: relaxed.map(|s| s.objective_real),
                predicted_mse: Some(model.predict_mse(&bits)),
                empirical_mse: Some(mc.mse),
                stderr: mc.stderr,
                total_kl: None,
                envelope_adjusted: None,
                converged: relaxed.map_or(true, |s| s.converged),
                rates: bits,
            });
        }
    }
    Ok(ComparisonReport::new(Task::Estimation, rows))
}

/// Max flow and the proposed allocation for each detection setting, scored
/// by the total KL divergence of the quantized observations.
pub fn run_detection_experiment(config: &ExperimentConfig, net: &Network) -> Result<ComparisonReport> {
    let block = config
        .detection
        .as_ref()
        .ok_or_else(|| Error::Config("detection task needs a [detection] block".into()))?;
    let n = net.num_sensors();
    let cases: Vec<(Label, Vec<DensityPair>)> = match (&block.settings, &block.sensors) {
        (Some(settings), None) => settings
            .iter()
            .map(|&s| Ok((Label::Setting(s), detection_setting(s, n)?)))
            .collect::<Result<_>>()?,
        (None, Some(pairs)) => {
            if pairs.len() != n {
                return Err(Error::Config(format!(
                    "{} detection sensors listed for a network with {n} sensors",
                    pairs.len()
                )));
            }
            vec![(Label::Custom, pairs.clone())]
        }
        _ => {
            return Err(Error::Config(
                "[detection] takes a nonempty `settings` list or a `sensors` list".into(),
            ))
        }
    };

    let flow = max_flow(net)?;
    let r_max: Vec<u32> = net
        .sensors()
        .iter()
        .map(|&s| (net.incident_capacity(s).max(0) as u32).min(MAX_TABULATED_RATE))
        .collect();
    let mut rows = Vec::new();
    for (label, pairs) in cases {
        let tables = pairs
            .iter()
            .zip(&r_max)
            .map(|(p, &r)| detection_utility(p, r))
            .collect::<Result<Vec<_>>>()?;
        let adjusted = tables.iter().any(|t| t.envelope_adjusted);
        let utilities: Vec<UtilityFunction> = tables.into_iter().map(|t| t.utility).collect();
        let solution = solve(net, &utilities, &config.solver)?;

        for (method, rates, relaxed) in [
            (Allocation::MaxFlow, &flow, None),
            (Allocation::Proposed, &solution.integral_rates, Some(&solution)),
        ] {
            let bits = checked_rates(net, rates)?;
            rows.push(AllocationRow {
                method,
                label,
                total_bits: bits.iter().map(|&b| b as u64).sum(),
                objective: objective_at(&utilities, &bits),
                relaxed_objective: relaxed.map(|s| s.objective_real),
                predicted_mse: None,
                empirical_mse: None,
                stderr: None,
                total_kl: Some(total_kl(&pairs, &bits)?),
                envelope_adjusted: Some(adjusted),
                converged: relaxed.map_or(true, |s| s.converged),
                rates: bits,
            });
        }
    }
    Ok(ComparisonReport::new(Task::Detection, rows))
}

/// Writes `<dir>/<name>.csv` with columns `n,f` for `n = 1..=2^max_rate`,
/// one file per pair. Returns the paths written.
pub fn emit_curves(pairs: &[NamedPair], max_rate: u32, dir: &Path) -> Result<Vec<PathBuf>> {
    if max_rate > MAX_TABULATED_RATE {
        return Err(Error::InvalidInput(format!(
            "max_rate {max_rate} exceeds {MAX_TABULATED_RATE}"
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(pairs.len());
    for named in pairs {
        let path = dir.join(format!("{}.csv", named.name));
        let curve = divergence_curve(&named.pair, 1 << max_rate)?;
        let mut out = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        out.write_record(["n", "f"]).map_err(|e| csv_error(&path, e))?;
        for (i, f) in curve.iter().enumerate() {
            out.write_record([(i + 1).to_string(), f.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

/// Integral sensor rates of `rates`, re-checked for routability.
fn checked_rates(net: &Network, rates: &RateAssignment) -> Result<Vec<u32>> {
    let violations = rates.verify(net);
    if !violations.is_empty() || !rates.is_integral() {
        return Err(Error::InvalidInput(format!(
            "allocation fails verification: {violations:?}"
        )));
    }
    let bits = rates.integral_sensor_rates();
    let demands: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
    if !feasible_rates(net, &demands)?.feasible {
        return Err(Error::InvalidInput(format!("rates {bits:?} are not routable")));
    }
    Ok(bits)
}

fn objective_at(utilities: &[UtilityFunction], bits: &[u32]) -> f64 {
    let r: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
    objective(utilities, &r)
}
