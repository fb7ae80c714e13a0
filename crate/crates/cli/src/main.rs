use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use infoflow::experiment::{
    build_network, emit_curves, run_detection_experiment, run_estimation_experiment,
    ComparisonReport, ExperimentConfig, NetworkSource, Seeds, Task,
};
use infoflow::network::Network;
use infoflow::num::{solve, SolverOptions, UtilityFunction};
use infoflow::Error;

/// Exit code for a bad config, network or other input.
const EXIT_CONFIG: u8 = 3;
/// Exit code when the solver stopped before reaching its tolerance. Results
/// are still written.
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "infoflow", version, about = "Rate allocation for inference over sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a layered random network and save it as JSON or TOML.
    Generate(GenerateArgs),
    /// Allocate rates on a network for a list of utilities.
    Solve(Common),
    /// Compare max flow and the proposed allocation for estimation.
    Estimate(Common),
    /// Compare max flow and the proposed allocation for detection.
    Detect(Common),
    /// Write f(n) curves, one CSV per density pair.
    Curves(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment or solve config (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; sets the graph, matrix and Monte Carlo seeds to
    /// `seed`, `seed + 1` and `seed + 2`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (a directory for `curves`); defaults to the config's
    /// `output`, else standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Monte Carlo runs per row.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Config with a layered [network] block.
    #[arg(long, required_unless_present = "layers")]
    config: Option<PathBuf>,
    /// Layer sizes, sensors first, e.g. `10,50,30,10`.
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    layers: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1, conflicts_with = "config")]
    fanout: usize,
    /// Inclusive capacity range, e.g. `1,15`.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 15], conflicts_with = "config")]
    capacity_range: Vec<i64>,
    /// Graph seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; `.toml` or `.json` (default) picks the format.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Config of the `solve` verb.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    /// Path to a stored network, relative to the config file.
    network: PathBuf,
    utilities: Vec<UtilityFunction>,
    #[serde(default)]
    solver: SolverOptions,
    #[serde(default)]
    output: Option<PathBuf>,
}

enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: the solver did not reach its tolerance; results were written");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { .. } => EXIT_IO,
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve_verb(args),
        Command::Estimate(args) => experiment(args, Task::Estimation),
        Command::Detect(args) => experiment(args, Task::Detection),
        Command::Curves(args) => experiment(args, Task::Curves),
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<Outcome> {
    let (source, mut seed, mut output, base) = match &args.config {
        Some(path) => {
            let config = ExperimentConfig::load(path)?;
            let source = config.network.context("the config has no [network] block")?;
            (source, config.seeds.graph, config.output, parent(path))
        }
        None => {
            let layers = args.layers.as_deref().unwrap_or_default();
            let sizes: [usize; 4] = layers
                .try_into()
                .map_err(|_| Error::Config("--layers takes four sizes".into()))?;
            let range = match args.capacity_range[..] {
                [lo, hi] => (lo, hi),
                _ => bail!(Error::Config("--capacity-range takes two bounds".into())),
            };
            (NetworkSource::layered(sizes, args.fanout, range), 0, None, None)
        }
    };
    if source.path.is_some() {
        return Err(Error::Config("generate needs layered [network] parameters, not a path".into()).into());
    }
    if let Some(s) = args.seed {
        seed = s;
    }
    if args.output.is_some() {
        output = args.output;
    }
    let net = source.build(seed, base.as_deref())?;
    match output {
        Some(path) => {
            net.save(&path)?;
            eprintln!(
                "wrote {} ({} nodes, {} edges, {} sensors)",
                path.display(),
                net.nodes().len(),
                net.edges().len(),
                net.num_sensors()
            );
        }
        None => println!("{}", net.to_json()),
    }
    Ok(Outcome::Done)
}

fn solve_verb(args: Common) -> anyhow::Result<Outcome> {
    if args.seed.is_some() || args.runs.is_some() {
        bail!(Error::Config("solve takes no --seed or --runs".into()));
    }
    let text = std::fs::read_to_string(&args.config).map_err(|e| io_error(&args.config, e))?;
    let config: SolveConfig = if args.config.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: args.config.clone(),
            message: e.to_string(),
        })?
    } else {
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: args.config.clone(),
            message: e.to_string(),
        })?
    };
    let net_path = match parent(&args.config) {
        Some(dir) if config.network.is_relative() => dir.join(&config.network),
        _ => config.network.clone(),
    };
    let net = Network::load(&net_path)?;
    let solution = solve(&net, &config.utilities, &config.solver)?;
    let report = solution.report(&net);

    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["sensor", "real_rate", "integral_rate"])?;
    for row in &report.sensors {
        out.write_record([
            row.sensor.to_string(),
            row.real_rate.to_string(),
            row.integral_rate.to_string(),
        ])?;
    }
    let csv = out.into_inner().map_err(|e| e.into_error())?;
    emit(&csv, args.output.or(config.output).as_deref())?;
    eprintln!(
        "objective {} relaxed, {} integral; {} of {} bits kept after rounding; {} iterations, gap {:e}",
        report.objective_real,
        report.objective_integral,
        report.total_integral,
        report.total_real,
        report.iterations,
        report.gap
    );
    Ok(if report.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn experiment(args: Common, task: Task) -> anyhow::Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.task != task {
        bail!(Error::Config(format!(
            "{} holds a {:?} config; use the matching verb",
            args.config.display(),
            config.task
        )));
    }
    if let Some(seed) = args.seed {
        config.seeds = Seeds::from_base(seed);
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    config.check()?;
    let output = args.output.or_else(|| config.output.clone());
    let base = parent(&args.config);

    if task == Task::Curves {
        let block = config.curves.as_ref().expect("checked");
        let dir = output.unwrap_or_else(|| PathBuf::from("curves"));
        for path in emit_curves(&block.pairs, block.max_rate, &dir)? {
            eprintln!("wrote {}", path.display());
        }
        return Ok(Outcome::Done);
    }

    let net = build_network(&config, base.as_deref())?;
    let report: ComparisonReport = match task {
        Task::Estimation => run_estimation_experiment(&config, &net)?,
        _ => run_detection_experiment(&config, &net)?,
    };
    emit(report.to_csv().as_bytes(), output.as_deref())?;
    Ok(if report.all_converged() {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn parent(path: &Path) -> Option<PathBuf> {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(bytes: &[u8], path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, bytes).map_err(|e| io_error(path, e))?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}
