//! Potential-based reward shaping with the constant potential
//! `Phi(s) = b / (1 - gamma)`, zero at terminal states.
//!
//! With a single discount the shaping term is `-b` on ordinary transitions
//! and `-b / (1 - gamma)` on transitions into a terminal state. The
//! state-dependent form uses `Phi(s) = b / (1 - gamma(s))` with
//! `gamma(terminal) = 0` on the unrolled chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{sample_action, sample_start, sample_step};
use crate::mdp::{PolicyTable, TabularMdp};
use crate::{Error, Result, Scalar};

/// Frozen shaping potential.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec<T> {
    b: T,
    gamma: T,
    per_state_gamma: Option<Vec<T>>,
}

fn gamma_one_error() -> Error {
    Error::Domain(
        "constant potential b/(1-gamma) is undefined at gamma = 1; use the episodic-form update \
         (r - (1-gamma) b bootstrapping, terminal r - b) instead of shaping"
            .into(),
    )
}

impl<T: Scalar> PotentialSpec<T> {
    pub fn new(b: T, gamma: T) -> Result<Self> {
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
        }
        Ok(Self { b, gamma, per_state_gamma: None })
    }

    /// State-dependent discounts for the unrolled view. `discounts[s]` must
    /// be 0 exactly on the terminal states of `terminal`.
    pub fn with_state_discounts(b: T, gamma: T, discounts: Vec<T>, terminal: &[bool]) -> Result<Self> {
        let mut spec = Self::new(b, gamma)?;
        if discounts.len() != terminal.len() {
            return Err(Error::Config("one discount per state required".into()));
        }
        for (s, (&g, &term)) in discounts.iter().zip(terminal).enumerate() {
            if !(g >= T::zero() && g <= T::one()) {
                return Err(Error::Config(format!("gamma({s}) = {g} outside [0, 1]")));
            }
            if term != (g == T::zero()) {
                return Err(Error::Config(format!(
                    "gamma({s}) = {g}: discounts must vanish exactly on terminal states"
                )));
            }
        }
        spec.per_state_gamma = Some(discounts);
        Ok(spec)
    }

    /// Constant discount on non-terminal states, 0 on terminal states.
    pub fn unrolled(b: T, mdp: &TabularMdp<T>) -> Result<Self> {
        let g = mdp.gamma();
        if g == T::zero() && mdp.non_terminal_states().next().is_some() {
            return Err(Error::Config("gamma = 0 cannot mark non-terminal states".into()));
        }
        let discounts = mdp.terminal().iter().map(|&t| if t { T::zero() } else { g }).collect();
        Self::with_state_discounts(b, g, discounts, mdp.terminal())
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn per_state_gamma(&self) -> Option<&[T]> {
        self.per_state_gamma.as_deref()
    }

    /// `Phi` of a non-terminal state under the constant discount.
    pub fn potential(&self) -> Result<T> {
        if self.gamma == T::one() {
            return Err(gamma_one_error());
        }
        Ok(self.b / (T::one() - self.gamma))
    }

    /// `Phi(s) = b / (1 - gamma(s))` in the state-dependent form.
    pub fn potential_at(&self, s: usize) -> Result<T> {
        let g = self.state_gamma(s)?;
        if g == T::one() {
            return Err(gamma_one_error());
        }
        Ok(self.b / (T::one() - g))
    }

    fn state_gamma(&self, s: usize) -> Result<T> {
        let gs = self
            .per_state_gamma
            .as_ref()
            .ok_or_else(|| Error::Usage("potential has no per-state discounts".into()))?;
        gs.get(s).copied().ok_or_else(|| Error::Config(format!("no discount for state {s}")))
    }

    /// Two-case shaping term: `-b/(1-gamma)` into a terminal state, `-b`
    /// otherwise.
    pub fn shaping_term(&self, next_is_terminal: bool) -> Result<T> {
        if self.gamma == T::one() {
            return Err(gamma_one_error());
        }
        Ok(if next_is_terminal { -self.b / (T::one() - self.gamma) } else { -self.b })
    }

    /// Three-case shaping term for state-dependent discounting.
    pub fn shaping_term_state_dependent(&self, s: usize, next: usize) -> Result<T> {
        let (g, g2) = (self.state_gamma(s)?, self.state_gamma(next)?);
        if g == T::one() || g2 == T::one() {
            return Err(gamma_one_error());
        }
        let b = self.b;
        let one = T::one();
        Ok(if g2 == T::zero() {
            -b / (one - g)
        } else if g == T::zero() {
            g2 * b / (one - g2) - b
        } else {
            g2 * b / (one - g2) - b / (one - g)
        })
    }
}

/// Add the two-case shaping term to every reward.
pub fn shaped_mdp<T: Scalar>(mdp: &TabularMdp<T>, spec: &PotentialSpec<T>) -> Result<TabularMdp<T>> {
    let interior = spec.shaping_term(false)?;
    let into_terminal = spec.shaping_term(true)?;
    Ok(mdp.map_rewards(|_, _, o| o.reward + if mdp.is_terminal(o.next) { into_terminal } else { interior }))
}

/// Roll out `num_episodes` consecutive episodes of the unrolled chain and
/// compare, at every time step whose return is fully determined, the shaped
/// state-dependent return with the raw return minus `Phi(S_t)`. Returns the
/// largest absolute residual.
pub fn verify_return_identity<T: Scalar>(
    mdp: &TabularMdp<T>,
    pi: &PolicyTable<T>,
    spec: &PotentialSpec<T>,
    num_episodes: usize,
    seed: u64,
) -> Result<T> {
    pi.check_against(mdp)?;
    if !mdp.has_terminal() {
        return Err(Error::Usage("return identity needs an episodic MDP".into()));
    }
    let spec = match spec.per_state_gamma() {
        Some(_) => spec.clone(),
        None => PotentialSpec::with_state_discounts(
            spec.b(),
            spec.gamma(),
            mdp.terminal().iter().map(|&t| if t { T::zero() } else { spec.gamma() }).collect(),
            mdp.terminal(),
        )?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // states[k] and rewards[k] = R_{k+1}, the reward of leaving states[k]
    let mut states = Vec::new();
    let mut rewards = Vec::new();
    for _ in 0..num_episodes {
        let mut s = sample_start(mdp, &mut rng);
        loop {
            let a = sample_action(pi.row(s), &mut rng);
            let step = sample_step(mdp, s, a, &mut rng)?;
            states.push(s);
            rewards.push(step.reward);
            s = step.next;
            if step.terminal_next {
                states.push(s);
                // restart transition: zero reward
                rewards.push(T::zero());
                break;
            }
        }
    }
    // the final terminal's return is not observed but is multiplied by
    // gamma(terminal) = 0
    let last = match states.len() {
        0 => return Ok(T::zero()),
        n => n - 1,
    };
    let gamma_of: Vec<T> = states.iter().map(|&s| spec.state_gamma(s)).collect::<Result<_>>()?;
    let mut raw = T::zero();
    let mut shaped = T::zero();
    let mut worst = T::zero();
    for t in (0..last).rev() {
        let g_next = gamma_of[t + 1];
        let f = spec.shaping_term_state_dependent(states[t], states[t + 1])?;
        raw = rewards[t] + g_next * raw;
        shaped = rewards[t] + f + g_next * shaped;
        let residual = (shaped - (raw - spec.potential_at(states[t])?)).abs();
        worst = worst.max(residual);
    }
    Ok(worst)
}
