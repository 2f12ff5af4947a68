use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{check_ergodic, unroll, Outcome, PolicyTable, TabularMdp};
use crate::{Error, Result, Scalar};

/// Small named MDPs used throughout the tests.
///
/// Textual names: `corridor(k)`, `two_state_loop`, `random(n,a,seed)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Diagnostic {
    /// `k` non-terminal cells in a line followed by a terminal cell. Actions
    /// are (Left, Right); Left at the first cell stays put. -1 per step.
    Corridor(usize),
    /// Continuing two-state chain, actions (stay, switch), reward 1 for
    /// transitions landing in state 1.
    TwoStateLoop,
    /// `n` non-terminal states plus one terminal, `a` actions each, drawn
    /// from `seed`. Every action terminates with probability in [0.05, 0.3]
    /// and the unrolled chain under the uniform policy is ergodic.
    Random { states: usize, actions: usize, seed: u64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Corridor(k) => write!(f, "corridor({k})"),
            Diagnostic::TwoStateLoop => write!(f, "two_state_loop"),
            Diagnostic::Random { states, actions, seed } => write!(f, "random({states},{actions},{seed})"),
        }
    }
}

impl FromStr for Diagnostic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "two_state_loop" {
            return Ok(Diagnostic::TwoStateLoop);
        }
        let parse_args = |prefix: &str| -> Option<Vec<u64>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.split(',').map(|x| x.trim().parse().ok()).collect()
        };
        if let Some(args) = parse_args("corridor") {
            if let [k] = args[..] {
                if k >= 1 {
                    return Ok(Diagnostic::Corridor(k as usize));
                }
            }
        }
        if let Some(args) = parse_args("random") {
            if let [n, a, seed] = args[..] {
                if n >= 1 && a >= 1 {
                    return Ok(Diagnostic::Random { states: n as usize, actions: a as usize, seed });
                }
            }
        }
        Err(Error::Config(format!(
            "unknown diagnostic MDP {s:?} (expected corridor(k), two_state_loop or random(n,a,seed))"
        )))
    }
}

impl TryFrom<String> for Diagnostic {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Diagnostic> for String {
    fn from(d: Diagnostic) -> String {
        d.to_string()
    }
}

const DIAGNOSTIC_GAMMA: f64 = 0.9;
const MAX_REJECTIONS: usize = 10_000;

pub fn make_diagnostic<T: Scalar>(which: &Diagnostic) -> Result<TabularMdp<T>> {
    match *which {
        Diagnostic::Corridor(k) => corridor(k),
        Diagnostic::TwoStateLoop => two_state_loop(),
        Diagnostic::Random { states, actions, seed } => random_episodic(states, actions, seed),
    }
}

fn corridor<T: Scalar>(k: usize) -> Result<TabularMdp<T>> {
    if k == 0 {
        return Err(Error::Config("corridor needs at least one non-terminal cell".into()));
    }
    let step = |next| vec![Outcome::new(next, T::lit(-1.0), T::one())];
    let mut t: Vec<Vec<Vec<Outcome<T>>>> = (0..k).map(|s| vec![step(s.saturating_sub(1)), step(s + 1)]).collect();
    t.push(Vec::new());
    let mut start = vec![T::zero(); k + 1];
    start[0] = T::one();
    let terminal = (0..=k).map(|s| s == k).collect();
    TabularMdp::new(t, start, terminal, T::lit(DIAGNOSTIC_GAMMA))
}

fn two_state_loop<T: Scalar>() -> Result<TabularMdp<T>> {
    let r = |s: usize| T::lit(if s == 1 { 1.0 } else { 0.0 });
    let t = (0..2)
        .map(|s| {
            let other = 1 - s;
            vec![
                vec![Outcome::new(s, r(s), T::one())],
                vec![Outcome::new(other, r(other), T::lit(0.9)), Outcome::new(s, r(s), T::lit(0.1))],
            ]
        })
        .collect();
    TabularMdp::new(t, vec![T::one(), T::zero()], vec![false, false], T::lit(DIAGNOSTIC_GAMMA))
}

fn random_episodic<T: Scalar>(n: usize, num_actions: usize, seed: u64) -> Result<TabularMdp<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terminal_state = n;
    for _ in 0..MAX_REJECTIONS {
        let mut t = Vec::with_capacity(n + 1);
        for _ in 0..n {
            let actions = (0..num_actions)
                .map(|_| {
                    let p_term = rng.random_range(0.05..0.3);
                    let fan = rng.random_range(1..=3.min(n));
                    let mut targets: Vec<usize> = Vec::with_capacity(fan);
                    while targets.len() < fan {
                        let c = rng.random_range(0..n);
                        if !targets.contains(&c) {
                            targets.push(c);
                        }
                    }
                    let weights: Vec<f64> = (0..fan).map(|_| rng.random_range(0.1..1.0)).collect();
                    let total: f64 = weights.iter().sum();
                    let mut outs: Vec<Outcome<T>> = targets
                        .iter()
                        .zip(&weights)
                        .map(|(&s2, &w)| {
                            Outcome::new(s2, T::lit(rng.random_range(-1.0..1.0)), T::lit((1.0 - p_term) * w / total))
                        })
                        .collect();
                    outs.push(Outcome::new(terminal_state, T::lit(rng.random_range(-1.0..1.0)), T::lit(p_term)));
                    outs
                })
                .collect();
            t.push(actions);
        }
        t.push(Vec::new());
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut start: Vec<T> = weights.iter().map(|&w| T::lit(w / total)).collect();
        start.push(T::zero());
        let terminal = (0..=n).map(|s| s == terminal_state).collect();
        let mdp = TabularMdp::new(t, start, terminal, T::lit(DIAGNOSTIC_GAMMA))?;
        let chain = unroll(&mdp, &PolicyTable::uniform(&mdp))?;
        if check_ergodic(&chain).is_ergodic() {
            return Ok(mdp);
        }
    }
    Err(Error::Domain(format!("no ergodic random MDP found for ({n}, {num_actions}, {seed})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_values, stationary_distribution};

    #[test]
    fn names_round_trip() {
        for name in ["corridor(3)", "two_state_loop", "random(5,2,7)"] {
            assert_eq!(name.parse::<Diagnostic>().unwrap().to_string(), name);
        }
        assert!("corridor(0)".parse::<Diagnostic>().is_err());
        assert!("maze".parse::<Diagnostic>().is_err());
    }

    #[test]
    fn corridor_contract() {
        let mdp: TabularMdp<f64> = make_diagnostic(&Diagnostic::Corridor(3)).unwrap();
        assert_eq!(mdp.non_terminal_states().count(), 3);
        let right = PolicyTable::deterministic(&mdp, &[1, 1, 1, 0]).unwrap();
        let v = exact_values(&mdp, &right, 0.9).unwrap().v;
        assert!((v[0] + 2.71).abs() < 1e-14);
    }

    #[test]
    fn two_state_loop_is_ergodic() {
        let mdp: TabularMdp<f64> = make_diagnostic(&Diagnostic::TwoStateLoop).unwrap();
        assert!(!mdp.has_terminal());
        let chain = unroll(&mdp, &PolicyTable::uniform(&mdp)).unwrap();
        assert!(check_ergodic(&chain).is_ergodic());
        let d = stationary_distribution(&chain).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_is_reproducible_and_ergodic() {
        let which = Diagnostic::Random { states: 5, actions: 2, seed: 7 };
        let a: TabularMdp<f64> = make_diagnostic(&which).unwrap();
        let b: TabularMdp<f64> = make_diagnostic(&which).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let chain = unroll(&a, &PolicyTable::uniform(&a)).unwrap();
        assert!(check_ergodic(&chain).is_ergodic());
    }
}
