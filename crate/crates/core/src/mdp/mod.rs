//! Finite MDPs, policies and the exact oracles built on them.

mod chain;
mod dp;
pub mod format;

pub use chain::{
    average_reward, check_ergodic, episode_visitation, policy_matrices, stationary_by_power_iteration,
    stationary_distribution, stationary_distribution_unichain, unroll, ChainView, ErgodicityReport,
};
pub use dp::{
    discounted_termination, exact_values, expected_remaining_length, greedy_action_sets, spectral_radius,
    value_iteration, OptimalValues, PolicyValues, GREEDY_TIE_TOL,
};

use serde::{Deserialize, Serialize};

use crate::scalar::tol;
use crate::{Error, Result, Scalar};

/// One `(s', r, p)` triple of `p(s', r | s, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub next: usize,
    pub reward: T,
    pub prob: T,
}

impl<T> Outcome<T> {
    pub fn new(next: usize, reward: T, prob: T) -> Self {
        Self { next, reward, prob }
    }
}

/// Action values laid out per state; terminal rows are empty.
pub type ActionValues<T> = Vec<Vec<T>>;

/// A finite MDP with an explicit terminal set.
///
/// Terminal states carry no actions and no stored transitions; every
/// analysis treats them according to the chain convention it needs
/// (absorbing zero-reward loop, or reset to the start distribution).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp<T> {
    actions_per_state: Vec<usize>,
    transitions: Vec<Vec<Vec<Outcome<T>>>>,
    start_dist: Vec<T>,
    terminal: Vec<bool>,
    gamma: T,
}

impl<T: Scalar> TabularMdp<T> {
    /// Validate and build an MDP. `transitions[s][a]` lists the outcomes of
    /// taking action `a` in state `s`.
    pub fn new(
        transitions: Vec<Vec<Vec<Outcome<T>>>>,
        start_dist: Vec<T>,
        terminal: Vec<bool>,
        gamma: T,
    ) -> Result<Self> {
        let n = transitions.len();
        if n == 0 {
            return Err(Error::Config("MDP needs at least one state".into()));
        }
        if start_dist.len() != n || terminal.len() != n {
            return Err(Error::Config(format!(
                "dimension mismatch: {n} states, start_dist has {}, terminal has {}",
                start_dist.len(),
                terminal.len()
            )));
        }
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
        }
        let sum_tol = tol::<T>(1e-12);
        for (s, actions) in transitions.iter().enumerate() {
            if terminal[s] {
                if !actions.is_empty() {
                    return Err(Error::Config(format!("terminal state {s} has outgoing transitions")));
                }
                continue;
            }
            if actions.is_empty() {
                return Err(Error::Config(format!("non-terminal state {s} has no actions")));
            }
            for (a, outcomes) in actions.iter().enumerate() {
                if outcomes.is_empty() {
                    return Err(Error::Config(format!("(s={s}, a={a}) has no outcomes")));
                }
                let mut total = T::zero();
                for o in outcomes {
                    if o.next >= n {
                        return Err(Error::Config(format!("(s={s}, a={a}) leads to unknown state {}", o.next)));
                    }
                    if !(o.prob >= T::zero()) || !o.reward.is_finite() {
                        return Err(Error::Config(format!("(s={s}, a={a}) has an invalid outcome {o:?}")));
                    }
                    total += o.prob;
                }
                if (total - T::one()).abs() > sum_tol {
                    return Err(Error::Config(format!("(s={s}, a={a}) probabilities sum to {total}")));
                }
            }
        }
        let mut total = T::zero();
        for (s, &p) in start_dist.iter().enumerate() {
            if !(p >= T::zero()) {
                return Err(Error::Config(format!("start_dist[{s}] = {p} is negative")));
            }
            if terminal[s] && p != T::zero() {
                return Err(Error::Config(format!("start_dist puts mass on terminal state {s}")));
            }
            total += p;
        }
        if (total - T::one()).abs() > sum_tol {
            return Err(Error::Config(format!("start_dist sums to {total}")));
        }
        let actions_per_state = transitions.iter().map(Vec::len).collect();
        Ok(Self { actions_per_state, transitions, start_dist, terminal, gamma })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions_per_state[s]
    }

    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome<T>] {
        &self.transitions[s][a]
    }

    pub fn transitions(&self) -> &[Vec<Vec<Outcome<T>>>] {
        &self.transitions
    }

    pub fn start_dist(&self) -> &[T] {
        &self.start_dist
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal(&self) -> &[bool] {
        &self.terminal
    }

    pub fn has_terminal(&self) -> bool {
        self.terminal.iter().any(|&t| t)
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&s| !self.terminal[s])
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> T {
        self.transitions[s][a].iter().fold(T::zero(), |acc, o| acc + o.prob * o.reward)
    }

    /// Same model with a different discount.
    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        Self::new(self.transitions.clone(), self.start_dist.clone(), self.terminal.clone(), gamma)
    }

    /// Same structure with every reward rewritten by `f(s, a, outcome)`.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, usize, &Outcome<T>) -> T) -> Self {
        let transitions = self
            .transitions
            .iter()
            .enumerate()
            .map(|(s, actions)| {
                actions
                    .iter()
                    .enumerate()
                    .map(|(a, outs)| outs.iter().map(|o| Outcome { reward: f(s, a, o), ..*o }).collect())
                    .collect()
            })
            .collect();
        Self { transitions, ..self.clone() }
    }
}

/// A stochastic tabular policy `pi(a | s)`. Terminal rows are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable<T> {
    probs: Vec<Vec<T>>,
}

impl<T: Scalar> PolicyTable<T> {
    /// Build from explicit rows. Empty rows are allowed (terminal states).
    pub fn new(probs: Vec<Vec<T>>) -> Result<Self> {
        let sum_tol = tol::<T>(1e-12);
        for (s, row) in probs.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            if row.iter().any(|&p| !(p >= T::zero())) {
                return Err(Error::Config(format!("policy row {s} has a negative probability")));
            }
            let total = row.iter().fold(T::zero(), |a, &b| a + b);
            if (total - T::one()).abs() > sum_tol {
                return Err(Error::Config(format!("policy row {s} sums to {total}")));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(mdp: &TabularMdp<T>) -> Self {
        let probs = (0..mdp.num_states())
            .map(|s| {
                let k = mdp.num_actions(s);
                vec![T::one() / T::from_count(k.max(1)); k]
            })
            .collect();
        Self { probs }
    }

    /// Deterministic policy; entries for terminal states are ignored.
    pub fn deterministic(mdp: &TabularMdp<T>, actions: &[usize]) -> Result<Self> {
        if actions.len() != mdp.num_states() {
            return Err(Error::Config("one action per state required".into()));
        }
        let sets: Vec<Vec<usize>> = actions.iter().map(|&a| vec![a]).collect();
        Self::uniform_over(mdp, &sets)
    }

    /// Uniform over the given action set in each non-terminal state.
    pub fn uniform_over(mdp: &TabularMdp<T>, sets: &[Vec<usize>]) -> Result<Self> {
        Self::epsilon_soft(mdp, sets, T::zero())
    }

    /// `epsilon`-soft policy around per-state greedy sets: with probability
    /// `epsilon` uniform over all actions, otherwise uniform over the set.
    pub fn epsilon_soft(mdp: &TabularMdp<T>, sets: &[Vec<usize>], epsilon: T) -> Result<Self> {
        if sets.len() != mdp.num_states() {
            return Err(Error::Config("one action set per state required".into()));
        }
        let mut probs = Vec::with_capacity(sets.len());
        for (s, set) in sets.iter().enumerate() {
            let k = mdp.num_actions(s);
            if mdp.is_terminal(s) {
                probs.push(Vec::new());
                continue;
            }
            if set.is_empty() || set.iter().any(|&a| a >= k) {
                return Err(Error::Config(format!("invalid action set {set:?} for state {s}")));
            }
            let mut row = vec![epsilon / T::from_count(k); k];
            let share = (T::one() - epsilon) / T::from_count(set.len());
            for &a in set {
                row[a] += share;
            }
            probs.push(row);
        }
        Ok(Self { probs })
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s]
    }

    /// Check that the policy covers every non-terminal state of `mdp`.
    pub fn check_against(&self, mdp: &TabularMdp<T>) -> Result<()> {
        if self.probs.len() != mdp.num_states() {
            return Err(Error::Config(format!(
                "policy has {} rows, MDP has {} states",
                self.probs.len(),
                mdp.num_states()
            )));
        }
        for s in mdp.non_terminal_states() {
            if self.probs[s].len() != mdp.num_actions(s) {
                return Err(Error::Config(format!(
                    "policy row {s} has {} entries, state has {} actions",
                    self.probs[s].len(),
                    mdp.num_actions(s)
                )));
            }
        }
        Ok(())
    }
}
