//! Network utility maximization: choose per-sensor rates that maximize the
//! sum of concave sensor utilities subject to the network's flow constraints,
//! then round to integral bits.

mod decompose;
mod report;
mod solver;
mod utility;

pub use report::SolutionReport;
pub use solver::{
    objective, round_rates, round_rates_with, solve, solve_relaxation, Method, NumSolution, Relaxation,
    Rounding, SolverOptions,
};
pub use utility::{upper_concave_envelope, PiecewiseLinear, UtilityFunction, CONCAVITY_TOL};

#[cfg(test)]
mod tests;
