//! Incremental learners.
//!
//! Every learner is an [`AgentState`] over some weight container: a
//! [`QTable`] for control, a `Vec` of state values for tabular prediction,
//! or a `DVector` of raw linear weights. The centering scalar `b` lives
//! next to the weights and is updated from the same TD error with step
//! size `eta * alpha`.

mod explore;
mod linear;
mod reparam;
mod tabular;

pub use explore::epsilon_greedy;
pub use reparam::{equivalence_harness, reparameterize, Divergence};

use serde::{Deserialize, Serialize};

use crate::mdp::TabularMdp;
use crate::{Error, Result, Scalar};

/// Which TD error an agent uses.
///
/// `Continuing`: `r - b + gamma * next - current`, terminal
/// `r - b / (1 - gamma) - current`.
/// `Episodic`: `r - (1 - gamma) b + gamma * next - current`, terminal
/// `r - b - current`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateForm {
    Continuing,
    Episodic,
}

/// Whether the task the agent faces terminates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Continuing,
    Episodic,
}

/// Step-size schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule<T> {
    Constant(T),
    /// `alpha_t = c / (t0 + t)`.
    RobbinsMonro { c: T, t0: T },
}

impl<T: Scalar> StepSchedule<T> {
    /// Default decaying schedule, `1 / (1000 + t)`.
    pub fn robbins_monro() -> Self {
        StepSchedule::RobbinsMonro { c: T::one(), t0: T::lit(1000.0) }
    }

    #[inline]
    pub fn at(&self, t: u64) -> T {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::RobbinsMonro { c, t0 } => c / (t0 + T::lit(t as f64)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant(a) if a >= T::zero() && a <= T::one() => Ok(()),
            StepSchedule::Constant(a) => Err(Error::Config(format!("step size {a} outside [0, 1]"))),
            StepSchedule::RobbinsMonro { c, t0 } if c > T::zero() && t0 > T::zero() && c <= t0 => Ok(()),
            StepSchedule::RobbinsMonro { c, t0 } => {
                Err(Error::Config(format!("Robbins-Monro schedule c = {c}, t0 = {t0} needs 0 < c <= t0")))
            }
        }
    }
}

/// Hyperparameters shared by all learners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentConfig<T> {
    pub alpha: StepSchedule<T>,
    /// Bias step-size multiplier.
    pub eta: T,
    pub gamma: T,
    pub form: UpdateForm,
    pub task: TaskKind,
}

impl<T: Scalar> AgentConfig<T> {
    pub fn new(alpha: StepSchedule<T>, eta: T, gamma: T, form: UpdateForm, task: TaskKind) -> Self {
        Self { alpha, eta, gamma, form, task }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        if !(self.eta >= T::zero()) {
            return Err(Error::Config(format!("eta {} is negative", self.eta)));
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.gamma == T::one() {
            match (self.task, self.form) {
                (TaskKind::Episodic, UpdateForm::Continuing) => {
                    return Err(Error::Config(
                        "gamma = 1 on an episodic task requires the episodic update form".into(),
                    ))
                }
                (TaskKind::Continuing, UpdateForm::Episodic) => {
                    return Err(Error::Config(
                        "gamma = 1 on a continuing task requires the continuing update form".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A learner: weights, centering scalar, hyperparameters and update count.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState<T, W> {
    pub weights: W,
    pub bias: T,
    config: AgentConfig<T>,
    updates: u64,
}

impl<T: Scalar, W> AgentState<T, W> {
    /// New agent with `b = 0`.
    pub fn new(weights: W, config: AgentConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self { weights, bias: T::zero(), config, updates: 0 })
    }

    pub fn with_bias(mut self, bias: T) -> Self {
        self.bias = bias;
        self
    }

    pub fn config(&self) -> &AgentConfig<T> {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Step size for the next update.
    #[inline]
    pub fn alpha(&self) -> T {
        self.config.alpha.at(self.updates)
    }

    /// Apply `delta` to the bias and advance the schedule.
    #[inline]
    fn finish(&mut self, alpha: T, delta: T) {
        self.bias += self.config.eta * alpha * delta;
        self.updates += 1;
    }

    /// Centering term subtracted from non-terminal rewards.
    #[inline]
    fn centering(&self) -> T {
        match self.config.form {
            UpdateForm::Continuing => self.bias,
            UpdateForm::Episodic => (T::one() - self.config.gamma) * self.bias,
        }
    }

    /// Centering term on a transition into a terminal state.
    #[inline]
    fn terminal_centering(&self) -> Result<T> {
        match self.config.form {
            UpdateForm::Episodic => Ok(self.bias),
            UpdateForm::Continuing if self.config.gamma < T::one() => Ok(self.bias / (T::one() - self.config.gamma)),
            UpdateForm::Continuing => Err(Error::Config(
                "terminal transition with gamma = 1 needs the episodic update form".into(),
            )),
        }
    }
}

/// One observed transition `(s, a, r, s')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub s: usize,
    pub a: usize,
    pub r: T,
    pub next: usize,
    pub terminal_next: bool,
}

impl<T> Transition<T> {
    pub fn new(s: usize, a: usize, r: T, next: usize, terminal_next: bool) -> Self {
        Self { s, a, r, next, terminal_next }
    }
}

/// Ragged table of action values; terminal rows are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> QTable<T> {
    pub fn zeros(mdp: &TabularMdp<T>) -> Self {
        Self::from_rows(mdp.actions_per_state().iter().map(|&k| vec![T::zero(); k]).collect())
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.rows[s]
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> T {
        self.rows[s][a]
    }

    #[inline]
    pub fn max(&self, s: usize) -> T {
        let row = &self.rows[s];
        let mut best = row[0];
        for &x in &row[1..] {
            if x > best {
                best = x;
            }
        }
        best
    }

    /// `max_{s,a} |self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| (p - q).abs()))
            .fold(T::zero(), |a, b| a.max(b))
    }
}
