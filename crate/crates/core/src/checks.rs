//! Invariant checks and property suites shared by the `verify` command and
//! the acceptance tests.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{equivalence_harness, AgentConfig, AgentState, Divergence, QTable, StepSchedule, TaskKind, Transition, UpdateForm};
use crate::envs::{make_diagnostic, make_gridworld, sample_action, sample_start, sample_step, ChainSampler, Diagnostic, GridSpec, RewardMode};
use crate::linear::random::{random_conditioned_case, random_continuing_case, random_episodic_case};
use crate::linear::{b_star, build_system, definiteness_report, fixed_point, hurwitz_check, BStar, FeatureSet};
use crate::mdp::{value_iteration, ChainView, PolicyTable, TabularMdp};
use crate::shaping::{shaped_mdp, verify_return_identity, PotentialSpec};
use crate::{Error, Result};

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }
}

pub const SPECTRAL_ETAS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const CONTINUING_GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];

/// Aggregate result of a spectral property suite.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpectralSuite {
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest symmetric-part eigenvalue of `A` seen.
    pub worst_symmetric: f64,
    /// Largest real part of an eigenvalue of `K A` seen.
    pub worst_real_part: f64,
}

impl SpectralSuite {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }

    fn record(&mut self, label: &str, features: &FeatureSet<f64>, chain: &ChainView<f64>, gamma: f64) -> Result<()> {
        let sys = build_system(features, chain, gamma, 1.0)?;
        let def = definiteness_report(&sys);
        self.cases += 1;
        self.worst_symmetric = self.worst_symmetric.max(def.max_symmetric_eigenvalue);
        if !def.negative_definite {
            self.failures.push(format!("{label}: max symmetric eigenvalue {:e}", def.max_symmetric_eigenvalue));
        }
        for eta in SPECTRAL_ETAS {
            let h = hurwitz_check(&build_system(features, chain, gamma, eta)?)?;
            self.worst_real_part = self.worst_real_part.max(h.max_real_part);
            if !h.hurwitz {
                self.failures.push(format!("{label}, eta {eta}: max real part {:e}", h.max_real_part));
            }
        }
        Ok(())
    }
}

/// Random chain sizes: 3 to 10 states, 1 to `n - 1 - reserved` raw
/// features.
fn random_shape<R: Rng>(rng: &mut R, reserved: usize) -> (usize, usize) {
    let n = rng.random_range(3..=10);
    (n, rng.random_range(1..n - reserved))
}

/// Negative definiteness of `A` and Hurwitz `K A` on random continuing
/// chains, for every gamma in [`CONTINUING_GAMMAS`] and eta in
/// [`SPECTRAL_ETAS`].
pub fn continuing_spectral_suite(num_chains: usize, seed: u64) -> Result<SpectralSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = SpectralSuite { worst_symmetric: f64::NEG_INFINITY, worst_real_part: f64::NEG_INFINITY, ..Default::default() };
    for i in 0..num_chains {
        let (n, d) = random_shape(&mut rng, 0);
        let (chain, features) = random_continuing_case::<f64, _>(n, d, &mut rng)?;
        for gamma in CONTINUING_GAMMAS {
            suite.record(&format!("chain {i} (n={n}, d={d}), gamma {gamma}"), &features, &chain, gamma)?;
        }
    }
    Ok(suite)
}

/// The same checks at gamma = 1 on unrolled episodic chains whose terminal
/// feature rows are zero.
pub fn episodic_spectral_suite(num_chains: usize, seed: u64) -> Result<SpectralSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = SpectralSuite { worst_symmetric: f64::NEG_INFINITY, worst_real_part: f64::NEG_INFINITY, ..Default::default() };
    for i in 0..num_chains {
        // the terminal row is zero, so one state carries no rank
        let (n, d) = random_shape(&mut rng, 1);
        let case = random_episodic_case::<f64, _>(n, d, &mut rng)?;
        suite.record(&format!("episodic chain {i} (n={n}, d={d})"), &case.features, &case.chain, 1.0)?;
    }
    Ok(suite)
}

/// Run expanded-feature linear TD on samples from `chain` and return the
/// sup-norm distance of `[b, w]` to the mean-field fixed point.
pub fn linear_td_error(
    chain: &ChainView<f64>,
    features: &FeatureSet<f64>,
    gamma: f64,
    eta: f64,
    schedule: StepSchedule<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let sys = build_system(features, chain, gamma, eta)?;
    let target = fixed_point(&sys)?;
    let (task, form) = if gamma < 1.0 {
        (TaskKind::Continuing, UpdateForm::Continuing)
    } else {
        (TaskKind::Episodic, UpdateForm::Episodic)
    };
    let config = AgentConfig::new(schedule, eta, gamma, form, task);
    let mut agent = AgentState::new(DVector::zeros(features.dim() - 1), config)?;
    let sampler = ChainSampler::new(chain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = chain.r();
    let mut s = 0;
    for _ in 0..samples {
        let next = sampler.next(s, &mut rng);
        agent.linear_diff_td_step(features, &Transition::new(s, 0, r[s], next, false))?;
        s = next;
    }
    Ok((agent.expanded_weights() - target).amax())
}

/// Settings for [`linear_convergence_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceSettings {
    pub gamma: f64,
    pub eta: f64,
    pub c: f64,
    pub t0: f64,
    pub samples: usize,
    /// Largest condition number of `Phi~` accepted from the generator.
    pub max_condition: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self { gamma: 0.5, eta: 1.0, c: 50.0, t0: 1000.0, samples: 1_000_000, max_condition: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceCase {
    pub system: usize,
    pub seed: u64,
    pub states: usize,
    pub features: usize,
    pub error: f64,
}

/// Linear differential TD on `num_systems` random continuing systems with
/// conditioned features, `seeds` sampling seeds each.
pub fn linear_convergence_suite(
    num_systems: usize,
    seeds: u64,
    settings: ConvergenceSettings,
    seed: u64,
) -> Result<Vec<ConvergenceCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = StepSchedule::RobbinsMonro { c: settings.c, t0: settings.t0 };
    let mut out = Vec::new();
    for system in 0..num_systems {
        let (n, d) = random_shape(&mut rng, 0);
        let (chain, features) = random_conditioned_case::<f64, _>(n, d, settings.max_condition, &mut rng)?;
        for k in 0..seeds {
            let error = linear_td_error(&chain, &features, settings.gamma, settings.eta, schedule, settings.samples, k)?;
            out.push(ConvergenceCase { system, seed: k, states: n, features: d, error });
        }
    }
    Ok(out)
}

/// Random transitions over a small table with a terminal index, then the
/// largest divergence between the two update forms.
pub fn reparameterization_divergence(gamma: f64, num_transitions: usize, seed: u64) -> Result<Divergence> {
    let (states, actions) = (6, 3);
    let terminal = states;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions: Vec<Transition<f64>> = (0..num_transitions)
        .map(|_| {
            let s = rng.random_range(0..states);
            let a = rng.random_range(0..actions);
            let r = rng.random_range(-1.0..1.0);
            if rng.random::<f64>() < 0.15 {
                Transition::new(s, a, r, terminal, true)
            } else {
                Transition::new(s, a, r, rng.random_range(0..states), false)
            }
        })
        .collect();
    let mut rows: Vec<Vec<f64>> = (0..states).map(|_| (0..actions).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    rows.push(Vec::new());
    let b0 = rng.random_range(-1.0..1.0);
    equivalence_harness(&transitions, gamma, 0.1, 0.5, b0, &QTable::from_rows(rows))
}

/// Greedy action sets of value iteration on `mdp` and on its shaped copy
/// for every `b`; returns the biases whose greedy sets differ.
pub fn shaping_invariance(mdp: &TabularMdp<f64>, biases: &[f64]) -> Result<Vec<f64>> {
    let gamma = mdp.gamma();
    let base = value_iteration(mdp, gamma)?.greedy;
    let mut bad = Vec::new();
    for &b in biases {
        let shaped = shaped_mdp(mdp, &PotentialSpec::new(b, gamma)?)?;
        if value_iteration(&shaped, gamma)?.greedy != base {
            bad.push(b);
        }
    }
    Ok(bad)
}

pub const SHAPING_BIASES: [f64; 5] = [-5.0, -1.0, 0.0, 1.0, 5.0];

/// Random episodic MDPs `random(n, a, seed)` with 3-8 states and 2-3
/// actions.
pub fn random_episodic_mdps(count: usize, seed: u64) -> Result<Vec<TabularMdp<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let which = Diagnostic::Random {
                states: rng.random_range(3..=8),
                actions: rng.random_range(2..=3),
                seed: rng.random(),
            };
            make_diagnostic(&which)
        })
        .collect()
}

/// The 10x10 grid worlds at gamma 0.9.
pub fn grid_worlds() -> Result<Vec<(RewardMode, TabularMdp<f64>)>> {
    [RewardMode::Painful, RewardMode::Sparse]
        .into_iter()
        .map(|m| Ok((m, make_gridworld(&GridSpec::new(10, 10, m, 0.9))?)))
        .collect()
}

/// Largest return-identity residual over `episodes` uniform-random episodes
/// on a grid world, for each bias.
pub fn grid_return_identity(mode: RewardMode, episodes: usize, biases: &[f64], seed: u64) -> Result<f64> {
    let mdp = make_gridworld::<f64>(&GridSpec::new(10, 10, mode, 0.9))?;
    let pi = PolicyTable::uniform(&mdp);
    let mut worst = 0.0f64;
    for &b in biases {
        worst = worst.max(verify_return_identity(&mdp, &pi, &PotentialSpec::unrolled(b, &mdp)?, episodes, seed)?);
    }
    Ok(worst)
}

/// Deterministic-length episodic problems: corridors under the always-right
/// policy and grid worlds under a shortest-path policy.
pub fn deterministic_length_cases() -> Result<Vec<(String, TabularMdp<f64>, PolicyTable<f64>)>> {
    let mut out = Vec::new();
    for k in [1, 2, 3, 5, 8] {
        let mdp: TabularMdp<f64> = make_diagnostic(&Diagnostic::Corridor(k))?;
        let right = vec![1; mdp.num_states()];
        let pi = PolicyTable::deterministic(&mdp, &right)?;
        out.push((format!("corridor({k})"), mdp, pi));
    }
    for (mode, mdp) in grid_worlds()? {
        let greedy = value_iteration(&mdp, 0.9)?.greedy;
        let first: Vec<usize> = greedy.iter().map(|g| g.first().copied().unwrap_or(0)).collect();
        let pi = PolicyTable::deterministic(&mdp, &first)?;
        out.push((format!("grid {}", mode.name()), mdp, pi));
    }
    Ok(out)
}

/// Largest gap between the two `b_star` estimates over the
/// deterministic-length cases and several discounts.
pub fn b_star_consistency() -> Result<(f64, Vec<(String, f64, BStar)>)> {
    let mut worst = 0.0f64;
    let mut all = Vec::new();
    for (name, mdp, pi) in deterministic_length_cases()? {
        for gamma in [0.5, 0.9, 0.99, 1.0] {
            let bs = b_star(&mdp, &pi, gamma)?;
            worst = worst.max(bs.gap());
            all.push((name.clone(), gamma, bs));
        }
    }
    Ok((worst, all))
}

/// Result of learning `b` with tabular differential TD prediction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnedBias {
    pub learned: f64,
    pub b_star: f64,
    /// Where `b` must end up if `V` converges: every update moves `b` by
    /// `eta` times the change of `sum_s V(s)`, so `b - eta sum_s V(s)` is
    /// fixed at its initial value 0.
    pub conserved_prediction: f64,
    pub values: Vec<f64>,
}

/// Differential TD prediction on `mdp` under `pi` for `steps` transitions
/// (restarting at termination), starting from `V = 0`, `b = 0`.
pub fn learn_bias(
    mdp: &TabularMdp<f64>,
    pi: &PolicyTable<f64>,
    eta: f64,
    form: UpdateForm,
    schedule: StepSchedule<f64>,
    steps: usize,
    seed: u64,
) -> Result<LearnedBias> {
    let gamma = mdp.gamma();
    if !mdp.has_terminal() {
        return Err(Error::Usage("learn_bias needs an episodic MDP".into()));
    }
    let config = AgentConfig::new(schedule, eta, gamma, form, TaskKind::Episodic);
    let mut agent = AgentState::new(vec![0.0; mdp.num_states()], config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = sample_start(mdp, &mut rng);
    for _ in 0..steps {
        let a = sample_action(pi.row(s), &mut rng);
        let out = sample_step(mdp, s, a, &mut rng)?;
        agent.diff_td_predict_step(&Transition::new(s, a, out.reward, out.next, out.terminal_next))?;
        s = if out.terminal_next { sample_start(mdp, &mut rng) } else { out.next };
    }
    let bs = b_star(mdp, pi, gamma)?;
    let conserved_prediction = conserved_bias(mdp, pi, eta, form)?;
    Ok(LearnedBias { learned: agent.bias, b_star: bs.formula, conserved_prediction, values: agent.weights })
}

/// Limit of `b` implied by the conservation law. At a fixed point
/// `V(s) = v(s) - b c(s)` with `c(s)` the value of a unit centering
/// penalty, so `b = eta sum v / (1 + eta sum c)`.
fn conserved_bias(mdp: &TabularMdp<f64>, pi: &PolicyTable<f64>, eta: f64, form: UpdateForm) -> Result<f64> {
    let gamma = mdp.gamma();
    let v = crate::mdp::exact_values(mdp, pi, gamma)?.v;
    // c(s): discounted sum of the centering subtracted per unit of b
    let per_step = match form {
        UpdateForm::Continuing => 1.0,
        UpdateForm::Episodic => 1.0 - gamma,
    };
    let terminal_value = match form {
        UpdateForm::Continuing => 1.0 / (1.0 - gamma),
        UpdateForm::Episodic => 1.0,
    };
    let unit = mdp.map_rewards(|_, _, o| if mdp.is_terminal(o.next) { terminal_value } else { per_step });
    let c = crate::mdp::exact_values(&unit, pi, gamma)?.v;
    let sv: f64 = mdp.non_terminal_states().map(|s| v[s]).sum();
    let sc: f64 = mdp.non_terminal_states().map(|s| c[s]).sum();
    Ok(eta * sv / (1.0 + eta * sc))
}

/// Settings for the `verify` suite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub random_mdps: usize,
    pub transitions: usize,
    pub episodes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, random_mdps: 20, transitions: 10_000, episodes: 100 }
    }
}

pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const RETURN_IDENTITY_TOL: f64 = 1e-8;
pub const B_STAR_TOL: f64 = 1e-10;

/// Shaping invariance, update-form equivalence, the return identity and
/// `b_star` consistency.
pub fn verify_suite(options: VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();

    let mut mdps: Vec<(String, TabularMdp<f64>)> =
        grid_worlds()?.into_iter().map(|(m, mdp)| (format!("grid {}", m.name()), mdp)).collect();
    mdps.push(("corridor(3)".into(), make_diagnostic(&Diagnostic::Corridor(3))?));
    for (i, mdp) in random_episodic_mdps(options.random_mdps, options.seed)?.into_iter().enumerate() {
        mdps.push((format!("random #{i}"), mdp));
    }
    let mut broken = Vec::new();
    for (name, mdp) in &mdps {
        for b in shaping_invariance(mdp, &SHAPING_BIASES)? {
            broken.push(format!("{name} at b = {b}"));
        }
    }
    out.push(CheckOutcome::at_most(
        "shaping_invariance",
        broken.len() as f64,
        0.0,
        if broken.is_empty() {
            format!("{} MDPs x {} biases agree", mdps.len(), SHAPING_BIASES.len())
        } else {
            format!("greedy sets differ: {}", broken.join(", "))
        },
    ));

    for gamma in [0.5, 0.9, 0.99] {
        let div = reparameterization_divergence(gamma, options.transitions, options.seed)?;
        out.push(CheckOutcome::at_most(
            format!("equivalence_harness(gamma={gamma})"),
            div.max(),
            EQUIVALENCE_TOL,
            format!("weights {:e}, bias {:e}", div.weights, div.bias),
        ));
    }

    for mode in [RewardMode::Painful, RewardMode::Sparse] {
        let r = grid_return_identity(mode, options.episodes, &SHAPING_BIASES, options.seed)?;
        out.push(CheckOutcome::at_most(
            format!("return_identity({})", mode.name()),
            r,
            RETURN_IDENTITY_TOL,
            format!("{} episodes", options.episodes),
        ));
    }

    let (gap, _) = b_star_consistency()?;
    out.push(CheckOutcome::at_most("b_star_consistency", gap, B_STAR_TOL, "deterministic-length corridors and grids"));
    Ok(out)
}
