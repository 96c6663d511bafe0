//! Named experiment recipes.

use crate::config::ExperimentConfig;
use crate::report::{RunReport, Summary};
use anyhow::Result;

pub mod conservation;
pub mod continuity;
pub mod coulomb;
pub mod dirac;
pub mod evolution;
pub mod gauss;
pub mod geometry;
pub mod maxent;
pub mod maxwell;

/// Stable, sorted experiment registry: `(name, one-line description)`.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    (
        "conservation",
        "Probability and expected-charge constancy plus the local charge-conservation residual under dt halving.",
    ),
    (
        "continuity-crosscheck",
        "Short-time expansion of the integral kernel against the continuity equation (dt halving).",
    ),
    (
        "coulomb",
        "Periodic lattice Poisson solve, Green-function superposition, continuum 1/(4 pi r) window, pairwise energy.",
    ),
    (
        "dirac-remark",
        "First-class smeared constraint whose flow moves physical states off the gauge orbit.",
    ),
    (
        "evolution",
        "Unitary Cayley integrator: norm/energy drift, superposition, order against the dense exponential.",
    ),
    (
        "gauss-constraint",
        "Gauge invariance of rho, strong constraint commutators, first-class check, projection, constraint transport.",
    ),
    (
        "geometry",
        "Symplectic form, information metric, complex structure, Poisson brackets, canonical psi map.",
    ),
    (
        "maxent",
        "Brute-force entropy maximization against the closed Gaussian kernel plus sampling moment report.",
    ),
    (
        "maxwell-2d",
        "Expected-field Maxwell residuals with computed discretization floors and refinement checks.",
    ),
];

/// Dispatch an experiment by name.
pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let start = std::time::Instant::now();
    let mut summary = match config.experiment.as_str() {
        "conservation" => conservation::run(config, report)?,
        "continuity-crosscheck" => continuity::run(config, report)?,
        "coulomb" => coulomb::run(config, report)?,
        "dirac-remark" => dirac::run(config, report)?,
        "evolution" => evolution::run(config, report)?,
        "gauss-constraint" => gauss::run(config, report)?,
        "geometry" => geometry::run(config, report)?,
        "maxent" => maxent::run(config, report)?,
        "maxwell-2d" => maxwell::run(config, report)?,
        other => anyhow::bail!("unknown experiment '{other}'"),
    };
    summary.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(summary)
}

/// Worker threads for embarrassingly parallel sampling (EDLAB_THREADS,
/// default 1). Results are independent of this value: every trajectory uses
/// its own counter-based stream and reductions happen in a fixed order.
pub fn thread_count() -> usize {
    std::env::var("EDLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or(1)
}
