//! Random test systems for the spectral property suites.
//!
//! Raw features are Gaussian with the bias column projected out, so that
//! `[bias, Phi]` has full column rank with probability one.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{expand_features, expand_features_with_terminals, FeatureMode, FeatureSet};
use crate::envs::{make_diagnostic, Diagnostic};
use crate::mdp::{check_ergodic, stationary_distribution, unroll, ChainView, PolicyTable, TabularMdp};
use crate::{Error, Result, Scalar};

/// Dense random ergodic chain with uniform rewards in [-1, 1].
pub fn random_ergodic_chain<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ChainView<T>> {
    let p = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.05..1.0f64));
    let p = DMatrix::from_fn(n, n, |i, j| T::lit(p[(i, j)] / p.row(i).sum()));
    let r = DVector::from_fn(n, |_, _| T::lit(rng.random_range(-1.0..1.0)));
    let chain = ChainView::new(p, r)?;
    let d = stationary_distribution(&chain)?;
    chain.with_stationary(d)
}

/// Gaussian `n x d` features orthogonalised against `bias`.
pub fn random_features<T: Scalar, R: Rng + ?Sized>(n: usize, d: usize, bias: &DVector<f64>, rng: &mut R) -> DMatrix<T> {
    let mut phi = DMatrix::<f64>::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let norm2 = bias.dot(bias);
    if norm2 > 0.0 {
        for mut col in phi.column_iter_mut() {
            let c = col.dot(bias) / norm2;
            col.axpy(-c, bias, 1.0);
        }
    }
    phi.map(T::lit)
}

/// A random continuing case: ergodic chain on `n` states with `d` raw
/// features.
pub fn random_continuing_case<T: Scalar, R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<(ChainView<T>, FeatureSet<T>)> {
    loop {
        let chain = random_ergodic_chain(n, rng)?;
        let phi = random_features(n, d, &DVector::from_element(n, 1.0), rng);
        match expand_features_with_terminals(phi, &vec![false; n], FeatureMode::Continuing) {
            Ok(fs) => return Ok((chain, fs)),
            Err(_) => continue,
        }
    }
}

/// As [`random_continuing_case`], redrawing features until the condition
/// number of `Phi~` is at most `max_condition`.
pub fn random_conditioned_case<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    d: usize,
    max_condition: f64,
    rng: &mut R,
) -> Result<(ChainView<T>, FeatureSet<T>)> {
    let chain = random_ergodic_chain(n, rng)?;
    let ones = DVector::from_element(n, 1.0);
    for _ in 0..10_000 {
        let phi: DMatrix<T> = random_features(n, d, &ones, rng);
        if let Ok(fs) = expand_features_with_terminals(phi, &vec![false; n], FeatureMode::Continuing) {
            let (lo, hi) = fs.singular_value_range();
            if hi.to_f64_lossy() <= lo.to_f64_lossy() * max_condition {
                return Ok((chain, fs));
            }
        }
    }
    Err(Error::Domain(format!("no features with condition number <= {max_condition} for n = {n}, d = {d}")))
}

/// A random episodic case.
#[derive(Clone, Debug)]
pub struct EpisodicCase<T: Scalar> {
    pub mdp: TabularMdp<T>,
    pub policy: PolicyTable<T>,
    /// Unrolled chain with its stationary distribution attached.
    pub chain: ChainView<T>,
    pub features: FeatureSet<T>,
}

/// Random episodic MDP with `n - 1` non-terminal states and one terminal,
/// a random stochastic policy, its unrolled (ergodic) chain and `d` raw
/// features with terminal rows zeroed.
pub fn random_episodic_case<T: Scalar, R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<EpisodicCase<T>> {
    if n < d + 2 {
        return Err(Error::Config(format!(
            "{n} states leave {} non-terminal rows, too few for {d} features plus the bias",
            n.saturating_sub(1)
        )));
    }
    let actions = 2;
    loop {
        let which = Diagnostic::Random { states: n - 1, actions, seed: rng.random() };
        let mdp: TabularMdp<T> = make_diagnostic(&which)?;
        let probs = (0..mdp.num_states())
            .map(|s| {
                let k = mdp.num_actions(s);
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = w.iter().sum();
                w.iter().map(|x| T::lit(x / total)).collect()
            })
            .collect();
        let policy = PolicyTable::new(probs)?;
        let chain = unroll(&mdp, &policy)?;
        if !check_ergodic(&chain).is_ergodic() {
            continue;
        }
        let dist = stationary_distribution(&chain)?;
        let chain = chain.with_stationary(dist)?;
        let e = DVector::from_fn(n, |s, _| if mdp.is_terminal(s) { 0.0 } else { 1.0 });
        let phi = random_features(n, d, &e, rng);
        if let Ok(features) = expand_features(phi, &mdp, FeatureMode::Episodic) {
            return Ok(EpisodicCase { mdp, policy, chain, features });
        }
    }
}
