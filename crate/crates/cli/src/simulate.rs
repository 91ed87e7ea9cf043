use clap::Args;
use codeagent::qa::lab::{converge, random_objective};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::CmdResult;

#[derive(Args)]
pub struct SimulateArgs {
    /// Dimension of the quadratic (1 to 16).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Newton step size in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Seed for the random objective and start point.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Distance to the optimum that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
}

/// Prints the run as JSON. Exits 0 when converged and 2 otherwise.
pub fn run(a: SimulateArgs) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (objective, start) = random_objective(a.dim, a.alpha, &mut rng)?;
    let result = converge(&objective, &start, a.tol, a.max_iter)?;
    let report = json!({
        "dim": a.dim,
        "alpha": a.alpha,
        "seed": a.seed,
        "iterations": result.iterations,
        "converged": result.converged,
        "non_decreasing": result.is_non_decreasing(),
        "trajectory": result.trajectory,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if result.converged { 0 } else { 2 })
}
