//! Grid worlds, small diagnostic MDPs and transition sampling.

mod diagnostic;
mod grid;

pub use diagnostic::{make_diagnostic, Diagnostic};
pub use grid::{make_gridworld, GridAction, GridSpec, RewardMode};

use rand::Rng;

use crate::mdp::{ChainView, TabularMdp};
use crate::{Error, Result, Scalar};

/// One sampled environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step<T> {
    pub next: usize,
    pub reward: T,
    pub terminal_next: bool,
}

/// Draw `(s', r)` from `p(., . | s, a)`. Deterministic transitions consume
/// no randomness.
pub fn sample_step<T: Scalar, R: Rng + ?Sized>(mdp: &TabularMdp<T>, s: usize, a: usize, rng: &mut R) -> Result<Step<T>> {
    if mdp.is_terminal(s) {
        return Err(Error::Usage(format!("cannot act in terminal state {s}")));
    }
    if a >= mdp.num_actions(s) {
        return Err(Error::Usage(format!("action {a} is not available in state {s}")));
    }
    let outs = mdp.outcomes(s, a);
    let o = if outs.len() == 1 {
        &outs[0]
    } else {
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        let mut pick = &outs[outs.len() - 1];
        for o in outs {
            acc += o.prob;
            if u < acc {
                pick = o;
                break;
            }
        }
        pick
    };
    Ok(Step { next: o.next, reward: o.reward, terminal_next: mdp.is_terminal(o.next) })
}

/// Draw a start state.
pub fn sample_start<T: Scalar, R: Rng + ?Sized>(mdp: &TabularMdp<T>, rng: &mut R) -> usize {
    let d = mdp.start_dist();
    if let Some(s) = d.iter().position(|&p| p == T::one()) {
        return s;
    }
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (s, &p) in d.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    d.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
}

/// Draw an action from a policy row.
pub fn sample_action<T: Scalar, R: Rng + ?Sized>(row: &[T], rng: &mut R) -> usize {
    if row.len() == 1 {
        return 0;
    }
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (a, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    row.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
}

/// Next-state sampler for a Markov chain, with per-row cumulative
/// probabilities precomputed.
#[derive(Clone, Debug)]
pub struct ChainSampler {
    cdf: Vec<Vec<f64>>,
}

impl ChainSampler {
    pub fn new<T: Scalar>(chain: &ChainView<T>) -> Self {
        let p = chain.p();
        let cdf = (0..chain.len())
            .map(|i| {
                let mut acc = 0.0;
                p.row(i)
                    .iter()
                    .map(|x| {
                        acc += x.to_f64_lossy();
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { cdf }
    }

    pub fn next<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let row = &self.cdf[s];
        let u = rng.random::<f64>() * row[row.len() - 1];
        row.partition_point(|&c| c <= u).min(row.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mdp::Outcome;

    #[test]
    fn fifty_fifty_branch_is_binomial() {
        let t = vec![
            vec![vec![Outcome::new(1, 0.0, 0.5), Outcome::new(2, 1.0, 0.5)]],
            vec![],
            vec![],
        ];
        let mdp = TabularMdp::new(t, vec![1.0, 0.0, 0.0], vec![false, true, true], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_step(&mdp, 0, 0, &mut rng).unwrap().next == 1).count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((hits as f64 - n as f64 * 0.5).abs() < 3.0 * sigma, "hits = {hits}");
    }

    #[test]
    fn acting_in_terminal_is_a_usage_error() {
        let mdp: TabularMdp<f64> = make_diagnostic(&Diagnostic::Corridor(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_step(&mdp, 2, 0, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn chain_sampler_frequencies() {
        use nalgebra::{dmatrix, dvector};
        use rand::SeedableRng;
        let chain = ChainView::new(dmatrix![0.0, 1.0, 0.0; 0.25, 0.0, 0.75; 0.5, 0.5, 0.0], dvector![0.0, 0.0, 0.0]).unwrap();
        let sampler = ChainSampler::new(&chain);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        assert!((0..100).all(|_| sampler.next(0, &mut rng) == 1));
        let hits = (0..40_000).filter(|_| sampler.next(1, &mut rng) == 2).count();
        // binomial(40000, 0.75): sd ~ 87
        assert!((hits as f64 - 30_000.0).abs() < 300.0);
    }
}
