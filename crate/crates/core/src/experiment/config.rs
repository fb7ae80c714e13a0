use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{Density, DensityPair};
use crate::error::{Error, Result};
use crate::estimation::QuantizerRange;
use crate::network::{generate_layered, LayeredGraphSpec, Network};
use crate::num::SolverOptions;

/// One experiment, read from a TOML (or JSON) document.
///
/// ```toml
/// task = "detection"
/// runs = 1
///
/// [seeds]
/// graph = 7
///
/// [network]
/// layer_sizes = [10, 4, 3, 2]
/// fanout = 1
/// capacity_range = [1, 5]
///
/// [detection]
/// settings = [1, 2, 3]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub network: Option<NetworkSource>,
    /// Monte Carlo runs per estimation row.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seeds: Seeds,
    /// Where the CLI writes results; a directory for `curves`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub estimation: Option<EstimationBlock>,
    #[serde(default)]
    pub detection: Option<DetectionBlock>,
    #[serde(default)]
    pub curves: Option<CurvesBlock>,
}

fn default_runs() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Estimation,
    Detection,
    Curves,
}

/// Independent seeds for the network draw, the sensing matrix and the Monte
/// Carlo noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub graph: u64,
    pub matrix: u64,
    pub mc: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::from_base(0)
    }
}

impl Seeds {
    /// `graph = base`, `matrix = base + 1`, `mc = base + 2`.
    pub fn from_base(base: u64) -> Self {
        Seeds {
            graph: base,
            matrix: base.wrapping_add(1),
            mc: base.wrapping_add(2),
        }
    }
}

/// Either a stored network or the parameters of a layered random one, drawn
/// with `seeds.graph`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub layer_sizes: Option<[usize; 4]>,
    #[serde(default)]
    pub fanout: Option<usize>,
    #[serde(default)]
    pub capacity_range: Option<(i64, i64)>,
}

impl NetworkSource {
    pub fn layered(layer_sizes: [usize; 4], fanout: usize, capacity_range: (i64, i64)) -> Self {
        NetworkSource {
            path: None,
            layer_sizes: Some(layer_sizes),
            fanout: Some(fanout),
            capacity_range: Some(capacity_range),
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        NetworkSource {
            path: Some(path.into()),
            layer_sizes: None,
            fanout: None,
            capacity_range: None,
        }
    }

    /// Loads or draws the network. Relative paths resolve against `base`.
    pub fn build(&self, graph_seed: u64, base: Option<&Path>) -> Result<Network> {
        match (&self.path, self.layer_sizes, self.fanout, self.capacity_range) {
            (Some(path), None, None, None) => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                Network::load(path)
            }
            (None, Some(layer_sizes), Some(fanout), Some(capacity_range)) => {
                generate_layered(&LayeredGraphSpec {
                    layer_sizes,
                    fanout,
                    capacity_range,
                    seed: graph_seed,
                })
            }
            (Some(_), ..) => Err(Error::Config(
                "[network] takes either `path` or the layered parameters, not both".into(),
            )),
            _ => Err(Error::Config(
                "[network] needs `path`, or all of `layer_sizes`, `fanout` and `capacity_range`"
                    .into(),
            )),
        }
    }
}

/// Sensing model parameters and the `alpha` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationBlock {
    pub dim: usize,
    /// Rows of the sensing matrix scaled by each `alpha`.
    pub weak_count: usize,
    pub alphas: Vec<f64>,
    pub noise_half_width: f64,
    pub range: QuantizerRange,
}

/// Per-sensor hypotheses: preset settings, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBlock {
    #[serde(default)]
    pub settings: Option<Vec<u8>>,
    #[serde(default)]
    pub sensors: Option<Vec<DensityPair>>,
}

/// Named pairs whose `f(n)` curves are written for `n = 1..=2^max_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesBlock {
    pub max_rate: u32,
    pub pairs: Vec<NamedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPair {
    pub name: String,
    #[serde(flatten)]
    pub pair: DensityPair,
}

/// `H1` laws of the preset settings for `n` sensors; `H0` is `N(0, 1)`
/// everywhere.
///
/// 1. the first five sensors see `N(11, 1)`, the rest `N(2, 1)`;
/// 2. sensor `j` (from 1) sees `N(j + 1, 1)`;
/// 3. the first five see `N(2, 1)`, the rest `N(11, 1)`.
pub fn detection_setting(setting: u8, n: usize) -> Result<Vec<DensityPair>> {
    let mean = |j: usize| -> Result<f64> {
        Ok(match setting {
            1 => if j <= 5 { 11.0 } else { 2.0 },
            2 => (j + 1) as f64,
            3 => if j <= 5 { 2.0 } else { 11.0 },
            _ => {
                return Err(Error::Config(format!(
                    "unknown detection setting {setting}; expected 1, 2 or 3"
                )))
            }
        })
    };
    (1..=n)
        .map(|j| DensityPair::new(Density::gaussian(0.0, 1.0), Density::gaussian(mean(j)?, 1.0)))
        .collect()
}

impl ExperimentConfig {
    /// Reads a `.toml` or `.json` config.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?
        } else {
            toml::from_str(&text).map_err(|e| Error::parse(path, e))?
        };
        config.check()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    /// Checks that exactly the block for `task` is present and that its
    /// parameters make sense on their own.
    pub fn check(&self) -> Result<()> {
        let present = [
            (Task::Estimation, self.estimation.is_some()),
            (Task::Detection, self.detection.is_some()),
            (Task::Curves, self.curves.is_some()),
        ];
        for (task, here) in present {
            if here != (task == self.task) {
                let name = format!("{task:?}").to_lowercase();
                return Err(Error::Config(if here {
                    format!("[{name}] block given for a {:?} task", self.task)
                } else {
                    format!("{name} task needs a [{name}] block")
                }));
            }
        }
        if self.task != Task::Curves && self.network.is_none() {
            return Err(Error::Config("missing [network] block".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iterations == 0 {
            return Err(Error::Config(
                "[solver] needs tol > 0 and max_iterations >= 1".into(),
            ));
        }
        if let Some(e) = &self.estimation {
            if e.alphas.is_empty() || e.alphas.iter().any(|a| !a.is_finite()) {
                return Err(Error::Config("estimation.alphas must be finite and nonempty".into()));
            }
            if e.dim == 0 || !(e.noise_half_width >= 0.0) || !e.noise_half_width.is_finite() {
                return Err(Error::Config(
                    "estimation needs dim >= 1 and a finite noise_half_width >= 0".into(),
                ));
            }
            e.range.check().map_err(|err| Error::Config(err.to_string()))?;
        }
        if let Some(d) = &self.detection {
            match (&d.settings, &d.sensors) {
                (Some(s), None) if !s.is_empty() => {
                    if let Some(bad) = s.iter().find(|&&k| !(1..=3).contains(&k)) {
                        return Err(Error::Config(format!(
                            "unknown detection setting {bad}; expected 1, 2 or 3"
                        )));
                    }
                }
                (None, Some(_)) => {}
                _ => {
                    return Err(Error::Config(
                        "[detection] takes a nonempty `settings` list or a `sensors` list".into(),
                    ))
                }
            }
        }
        if let Some(c) = &self.curves {
            if c.pairs.is_empty() {
                return Err(Error::Config("curves.pairs is empty".into()));
            }
            if c.max_rate > crate::detection::MAX_TABULATED_RATE {
                return Err(Error::Config(format!(
                    "curves.max_rate {} exceeds {}",
                    c.max_rate,
                    crate::detection::MAX_TABULATED_RATE
                )));
            }
        }
        Ok(())
    }
}
