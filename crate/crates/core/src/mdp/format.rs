//! Human-readable JSON serialization of [`TabularMdp`].
//!
//! ```json
//! {
//!   "format": "difftd-mdp",
//!   "version": 1,
//!   "num_states": 3,
//!   "gamma": 0.9,
//!   "terminal": [false, false, true],
//!   "start_dist": [1.0, 0.0, 0.0],
//!   "actions_per_state": [1, 1, 0],
//!   "transitions": [
//!     { "state": 0, "action": 0, "next": 1, "reward": -1.0, "prob": 1.0 },
//!     { "state": 1, "action": 0, "next": 2, "reward": -1.0, "prob": 1.0 }
//!   ]
//! }
//! ```
//!
//! Transitions are listed in `(state, action)` order, outcomes in storage
//! order, so serialization is byte-stable.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Outcome, TabularMdp};
use crate::{Error, Result, Scalar};

pub const FORMAT_NAME: &str = "difftd-mdp";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry<T> {
    pub state: usize,
    pub action: usize,
    pub next: usize,
    pub reward: T,
    pub prob: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument<T> {
    pub format: String,
    pub version: u32,
    pub num_states: usize,
    pub gamma: T,
    pub terminal: Vec<bool>,
    pub start_dist: Vec<T>,
    pub actions_per_state: Vec<usize>,
    pub transitions: Vec<TransitionEntry<T>>,
}

impl<T: Scalar> From<&TabularMdp<T>> for MdpDocument<T> {
    fn from(mdp: &TabularMdp<T>) -> Self {
        let mut transitions = Vec::new();
        for (s, actions) in mdp.transitions().iter().enumerate() {
            for (a, outs) in actions.iter().enumerate() {
                transitions.extend(outs.iter().map(|o| TransitionEntry {
                    state: s,
                    action: a,
                    next: o.next,
                    reward: o.reward,
                    prob: o.prob,
                }));
            }
        }
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            num_states: mdp.num_states(),
            gamma: mdp.gamma(),
            terminal: mdp.terminal().to_vec(),
            start_dist: mdp.start_dist().to_vec(),
            actions_per_state: mdp.actions_per_state().to_vec(),
            transitions,
        }
    }
}

impl<T: Scalar> TryFrom<MdpDocument<T>> for TabularMdp<T> {
    type Error = Error;

    fn try_from(doc: MdpDocument<T>) -> Result<Self> {
        if doc.format != FORMAT_NAME || doc.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "expected {FORMAT_NAME} version {FORMAT_VERSION}, found {} version {}",
                doc.format, doc.version
            )));
        }
        let n = doc.num_states;
        if doc.actions_per_state.len() != n {
            return Err(Error::Format(format!(
                "actions_per_state has {} entries for {n} states",
                doc.actions_per_state.len()
            )));
        }
        let mut transitions: Vec<Vec<Vec<Outcome<T>>>> =
            doc.actions_per_state.iter().map(|&k| vec![Vec::new(); k]).collect();
        for (i, e) in doc.transitions.into_iter().enumerate() {
            let slot = transitions
                .get_mut(e.state)
                .and_then(|acts| acts.get_mut(e.action))
                .ok_or_else(|| {
                    Error::Format(format!("transition {i} refers to undeclared (state {}, action {})", e.state, e.action))
                })?;
            slot.push(Outcome::new(e.next, e.reward, e.prob));
        }
        TabularMdp::new(transitions, doc.start_dist, doc.terminal, doc.gamma)
    }
}

impl<T: Scalar + Serialize + DeserializeOwned> TabularMdp<T> {
    /// Pretty-printed JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MdpDocument::from(self)).expect("MDP documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument<T> = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.try_into()
    }
}
