use serde::Serialize;

use super::{sweep, Algorithm, EnvSpec, ExperimentConfig, SweepResult};
use crate::envs::RewardMode;
use crate::Result;

/// Step sizes swept for both algorithms.
pub const SWEEP_ALPHAS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Bias step-size multipliers `10^-4, 10^-3.5, ..., 10^0`.
pub const SWEEP_ETAS: [f64; 9] = [
    1e-4,
    3.1622776601683795e-4,
    1e-3,
    3.1622776601683795e-3,
    1e-2,
    3.1622776601683795e-2,
    1e-1,
    3.1622776601683795e-1,
    1.0,
];

/// Sweep config for one panel of the 10x10 grid comparison: gamma 0.9,
/// epsilon 0.1, constant step sizes.
pub fn comparison_config(reward: RewardMode, algorithm: Algorithm) -> ExperimentConfig {
    let etas = match algorithm {
        Algorithm::Q => Vec::new(),
        Algorithm::DiffQ => SWEEP_ETAS.to_vec(),
    };
    ExperimentConfig::new(EnvSpec::grid(10, 10, reward), algorithm, SWEEP_ALPHAS.to_vec(), etas, 0.9)
}

/// Both algorithms on one reward mode.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonPanel {
    pub reward: RewardMode,
    pub q: SweepResult,
    pub diff_q: SweepResult,
}

impl ComparisonPanel {
    /// `(mean_diff_q - mean_q, combined stderr)` of the per-seed
    /// final-quarter mean cumulative episodes of each best cell.
    pub fn final_quarter_gap(&self) -> (f64, f64) {
        let (a, b) = (self.diff_q.best_cell(), self.q.best_cell());
        (
            a.mean_final_quarter - b.mean_final_quarter,
            (a.stderr_final_quarter.powi(2) + b.stderr_final_quarter.powi(2)).sqrt(),
        )
    }
}

/// Painful and sparse panels, each with a full sweep per algorithm.
pub fn run_grid_comparison(num_runs: usize, num_steps: usize, base_seed: u64) -> Result<Vec<ComparisonPanel>> {
    [RewardMode::Painful, RewardMode::Sparse]
        .into_iter()
        .map(|reward| {
            let run = |algorithm| {
                let mut c = comparison_config(reward, algorithm);
                c.num_runs = num_runs;
                c.num_steps = num_steps;
                c.base_seed = base_seed;
                sweep(&c)
            };
            Ok(ComparisonPanel { reward, q: run(Algorithm::Q)?, diff_q: run(Algorithm::DiffQ)? })
        })
        .collect()
}
