//! Seeded trials, hyperparameter sweeps, aggregation and export for the
//! grid-world comparison of Q-learning and differential Q-learning.

mod export;
mod comparison;
mod stats;

pub use export::{export, write_runs, write_summary, write_svg, write_sweep, ExportOptions, PanelSeries, RUNS_HEADER, SUMMARY_HEADER, SWEEP_HEADER};
pub use comparison::{comparison_config, run_grid_comparison, ComparisonPanel, SWEEP_ALPHAS, SWEEP_ETAS};
pub use stats::{aggregate, aggregate_series, mean_stderr, Curves};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{epsilon_greedy, AgentConfig, AgentState, QTable, StepSchedule, TaskKind, Transition, UpdateForm};
use crate::envs::{make_diagnostic, make_gridworld, sample_start, sample_step, Diagnostic, GridSpec, RewardMode};
use crate::mdp::TabularMdp;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Q,
    DiffQ,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Q => "q",
            Algorithm::DiffQ => "diff_q",
        }
    }
}

/// Environment of an experiment. The experiment's `gamma` overrides the
/// environment's own discount.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Grid { width: usize, height: usize, reward: RewardMode },
    Diagnostic { name: Diagnostic },
}

impl EnvSpec {
    pub fn grid(width: usize, height: usize, reward: RewardMode) -> Self {
        EnvSpec::Grid { width, height, reward }
    }

    /// Short label used for file names.
    pub fn label(&self) -> String {
        match self {
            EnvSpec::Grid { reward, .. } => reward.name().to_string(),
            EnvSpec::Diagnostic { name } => name
                .to_string()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect::<String>()
                .trim_end_matches('_')
                .to_string(),
        }
    }

    pub fn build(&self, gamma: f64) -> Result<TabularMdp<f64>> {
        match self {
            EnvSpec::Grid { width, height, reward } => make_gridworld(&GridSpec::new(*width, *height, *reward, gamma)),
            EnvSpec::Diagnostic { name } => make_diagnostic::<f64>(name)?.with_gamma(gamma),
        }
    }
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_num_steps() -> usize {
    40_000
}

fn default_num_runs() -> usize {
    100
}

fn default_form() -> UpdateForm {
    UpdateForm::Continuing
}

/// One sweep: every `(alpha, eta)` pair, `num_runs` seeds each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    pub alphas: Vec<f64>,
    /// Ignored by `q`.
    #[serde(default)]
    pub etas: Vec<f64>,
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_num_steps")]
    pub num_steps: usize,
    #[serde(default = "default_num_runs")]
    pub num_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_form")]
    pub form: UpdateForm,
}

/// One hyperparameter setting of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub config_id: usize,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub eta: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, algorithm: Algorithm, alphas: Vec<f64>, etas: Vec<f64>, gamma: f64) -> Self {
        Self {
            env,
            algorithm,
            alphas,
            etas,
            gamma,
            epsilon: default_epsilon(),
            num_steps: default_num_steps(),
            num_runs: default_num_runs(),
            base_seed: 0,
            form: default_form(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_runs == 0 {
            return Err(Error::Config("num_runs must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("alphas must not be empty".into()));
        }
        if self.algorithm == Algorithm::DiffQ && self.etas.is_empty() {
            return Err(Error::Config("diff_q requires a non-empty etas list".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        let mdp = self.env.build(self.gamma)?;
        let task = if mdp.has_terminal() { TaskKind::Episodic } else { TaskKind::Continuing };
        for cell in self.cells() {
            agent_config(self, &cell, task).validate()?;
        }
        Ok(())
    }

    /// Sweep cells, alpha-major.
    pub fn cells(&self) -> Vec<Cell> {
        let etas: Vec<Option<f64>> = match self.algorithm {
            Algorithm::Q => vec![None],
            Algorithm::DiffQ => self.etas.iter().copied().map(Some).collect(),
        };
        let mut out = Vec::with_capacity(self.alphas.len() * etas.len());
        for &alpha in &self.alphas {
            for &eta in &etas {
                out.push(Cell { config_id: out.len(), algorithm: self.algorithm, alpha, eta });
            }
        }
        out
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.num_runs as u64).map(|i| self.base_seed.wrapping_add(i))
    }
}

fn agent_config(config: &ExperimentConfig, cell: &Cell, task: TaskKind) -> AgentConfig<f64> {
    AgentConfig::new(
        StepSchedule::Constant(cell.alpha),
        cell.eta.unwrap_or(0.0),
        config.gamma,
        config.form,
        task,
    )
}

/// One seeded run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_id: usize,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub eta: Option<f64>,
    pub seed: u64,
    /// Episodes completed after each environment step.
    pub cumulative: Vec<u32>,
    pub total_episodes: u32,
    /// Completed episodes per environment step.
    pub rate: f64,
    /// Mean of `cumulative` over the last quarter of the run.
    pub final_quarter_mean: f64,
}

/// Run statistics without the curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub total_episodes: u32,
    pub final_quarter_mean: f64,
}

/// Environment and agent draw from separate ChaCha streams of one seed.
fn rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let env = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = ChaCha8Rng::seed_from_u64(seed);
    agent.set_stream(1);
    (env, agent)
}

fn simulate(
    config: &ExperimentConfig,
    mdp: &TabularMdp<f64>,
    cell: &Cell,
    seed: u64,
    mut curve: Option<&mut Vec<u32>>,
) -> Result<RunSummary> {
    let task = if mdp.has_terminal() { TaskKind::Episodic } else { TaskKind::Continuing };
    let mut agent = AgentState::new(QTable::zeros(mdp), agent_config(config, cell, task))?;
    let (mut env_rng, mut agent_rng) = rngs(seed);
    let n = config.num_steps;
    let quarter_start = n - n / 4;
    let mut episodes = 0u32;
    let mut quarter_sum = 0u64;
    let mut s = sample_start(mdp, &mut env_rng);
    for step in 0..n {
        let a = epsilon_greedy(agent.weights.row(s), config.epsilon, &mut agent_rng);
        let out = sample_step(mdp, s, a, &mut env_rng)?;
        let t = Transition::new(s, a, out.reward, out.next, out.terminal_next);
        match cell.algorithm {
            Algorithm::Q => {
                agent.q_step(&t);
            }
            Algorithm::DiffQ => {
                agent.diff_q_step(&t)?;
            }
        }
        if out.terminal_next {
            episodes += 1;
            s = sample_start(mdp, &mut env_rng);
        } else {
            s = out.next;
        }
        if step >= quarter_start {
            quarter_sum += u64::from(episodes);
        }
        if let Some(c) = curve.as_deref_mut() {
            c.push(episodes);
        }
    }
    let quarter_len = n - quarter_start;
    Ok(RunSummary {
        seed,
        total_episodes: episodes,
        final_quarter_mean: if quarter_len == 0 { 0.0 } else { quarter_sum as f64 / quarter_len as f64 },
    })
}

fn record(config: &ExperimentConfig, mdp: &TabularMdp<f64>, cell: &Cell, seed: u64) -> Result<RunRecord> {
    let mut cumulative = Vec::with_capacity(config.num_steps);
    let summary = simulate(config, mdp, cell, seed, Some(&mut cumulative))?;
    Ok(RunRecord {
        config_id: cell.config_id,
        algorithm: cell.algorithm,
        alpha: cell.alpha,
        eta: cell.eta,
        seed,
        cumulative,
        total_episodes: summary.total_episodes,
        rate: if config.num_steps == 0 { 0.0 } else { f64::from(summary.total_episodes) / config.num_steps as f64 },
        final_quarter_mean: summary.final_quarter_mean,
    })
}

/// Run the first cell of `config` (its first alpha and eta) for one seed.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let mdp = config.env.build(config.gamma)?;
    record(config, &mdp, &config.cells()[0], seed)
}

/// Run a specific cell for every seed of `config`, in seed order.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mdp = config.env.build(config.gamma)?;
    let seeds: Vec<u64> = config.seeds().collect();
    seeds.par_iter().map(|&seed| record(config, &mdp, cell, seed)).collect()
}

/// Per-cell statistics over seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub cell: Cell,
    pub runs: Vec<RunSummary>,
    pub mean_total: f64,
    pub stderr_total: f64,
    pub mean_final_quarter: f64,
    pub stderr_final_quarter: f64,
}

/// Result of [`sweep`]: every cell's statistics and full records for the
/// best cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    /// Index into `cells` with the most total episodes (first on ties).
    pub best: usize,
    pub best_runs: Vec<RunRecord>,
}

impl SweepResult {
    pub fn best_cell(&self) -> &CellSummary {
        &self.cells[self.best]
    }

    /// Cells ordered by mean total episodes, best first.
    pub fn ranking(&self) -> Vec<&CellSummary> {
        let mut v: Vec<&CellSummary> = self.cells.iter().collect();
        v.sort_by(|a, b| b.mean_total.total_cmp(&a.mean_total).then(a.cell.config_id.cmp(&b.cell.config_id)));
        v
    }
}

/// Run the whole grid in parallel on the current rayon pool. Results are
/// ordered by `(config_id, seed)` independent of scheduling.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mdp = config.env.build(config.gamma)?;
    let cells = config.cells();
    let seeds: Vec<u64> = config.seeds().collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let summaries: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(c, seed)| simulate(config, &mdp, &cells[c], seed, None))
        .collect::<Result<_>>()?;
    let cell_summaries: Vec<CellSummary> = cells
        .iter()
        .zip(summaries.chunks(seeds.len()))
        .map(|(cell, runs)| {
            let totals: Vec<f64> = runs.iter().map(|r| f64::from(r.total_episodes)).collect();
            let quarters: Vec<f64> = runs.iter().map(|r| r.final_quarter_mean).collect();
            let (mean_total, stderr_total) = mean_stderr(&totals);
            let (mean_final_quarter, stderr_final_quarter) = mean_stderr(&quarters);
            CellSummary { cell: *cell, runs: runs.to_vec(), mean_total, stderr_total, mean_final_quarter, stderr_final_quarter }
        })
        .collect();
    let mut best = 0;
    for (i, c) in cell_summaries.iter().enumerate() {
        if c.mean_total > cell_summaries[best].mean_total {
            best = i;
        }
    }
    let best_runs = seeds
        .par_iter()
        .map(|&seed| record(config, &mdp, &cells[best], seed))
        .collect::<Result<_>>()?;
    Ok(SweepResult { config: config.clone(), cells: cell_summaries, best, best_runs })
}
