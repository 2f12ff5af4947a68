use serde::{Deserialize, Serialize};

use crate::mdp::{Outcome, TabularMdp};
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// -1 on every transition.
    Painful,
    /// 0 per step, +1 on the transition entering the terminal cell.
    Sparse,
}

impl RewardMode {
    pub fn name(self) -> &'static str {
        match self {
            RewardMode::Painful => "painful",
            RewardMode::Sparse => "sparse",
        }
    }
}

/// Action order is fixed for reproducible tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub reward: RewardMode,
    pub gamma: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, reward: RewardMode, gamma: f64) -> Self {
        Self { width, height, reward, gamma }
    }

    /// Row-major index of a cell.
    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn goal(&self) -> usize {
        self.width * self.height - 1
    }
}

/// Deterministic 4-connected grid; start top-left, terminal bottom-right,
/// moves off the edge keep the agent in place.
pub fn make_gridworld<T: Scalar>(spec: &GridSpec) -> Result<TabularMdp<T>> {
    if spec.width < 2 || spec.height < 2 {
        return Err(Error::Config(format!("grid must be at least 2x2, got {}x{}", spec.width, spec.height)));
    }
    let n = spec.width * spec.height;
    let goal = spec.goal();
    let mut transitions = Vec::with_capacity(n);
    for s in 0..n {
        if s == goal {
            transitions.push(Vec::new());
            continue;
        }
        let (row, col) = (s / spec.width, s % spec.width);
        let actions = GridAction::ALL
            .iter()
            .map(|&a| {
                let (r2, c2) = match a {
                    GridAction::Up => (row.saturating_sub(1), col),
                    GridAction::Down => ((row + 1).min(spec.height - 1), col),
                    GridAction::Left => (row, col.saturating_sub(1)),
                    GridAction::Right => (row, (col + 1).min(spec.width - 1)),
                };
                let next = spec.state(r2, c2);
                let reward = match spec.reward {
                    RewardMode::Painful => -1.0,
                    RewardMode::Sparse if next == goal => 1.0,
                    RewardMode::Sparse => 0.0,
                };
                vec![Outcome::new(next, T::lit(reward), T::one())]
            })
            .collect();
        transitions.push(actions);
    }
    let mut start = vec![T::zero(); n];
    start[spec.start()] = T::one();
    let terminal = (0..n).map(|s| s == goal).collect();
    TabularMdp::new(transitions, start, terminal, T::lit(spec.gamma))
}
