use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{PolicyTable, TabularMdp};
use crate::scalar::tol;
use crate::{Error, Result, Scalar};

/// A Markov chain induced by a policy: transition matrix, expected one-step
/// reward and (optionally) its stationary distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainView<T: Scalar> {
    p: DMatrix<T>,
    r: DVector<T>,
    d: Option<DVector<T>>,
}

impl<T: Scalar> ChainView<T> {
    /// Build a chain, checking that `p` is square, row-stochastic and
    /// matches `r`.
    pub fn new(p: DMatrix<T>, r: DVector<T>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || r.len() != n {
            return Err(Error::Config(format!(
                "chain dimensions disagree: P is {}x{}, r has {}",
                p.nrows(),
                p.ncols(),
                r.len()
            )));
        }
        let row_tol = tol::<T>(1e-10);
        for (i, row) in p.row_iter().enumerate() {
            if row.iter().any(|&x| !(x >= T::zero())) {
                return Err(Error::Config(format!("row {i} of P has a negative entry")));
            }
            let s = row.sum();
            if (s - T::one()).abs() > row_tol {
                return Err(Error::Config(format!("row {i} of P sums to {s}")));
            }
        }
        Ok(Self { p, r, d: None })
    }

    /// Attach a stationary distribution after checking `d^T P = d^T`.
    pub fn with_stationary(mut self, d: DVector<T>) -> Result<Self> {
        if d.len() != self.len() {
            return Err(Error::Config("stationary distribution has the wrong length".into()));
        }
        let residual = (self.p.tr_mul(&d) - &d).amax();
        let mass = d.sum();
        if residual > tol::<T>(1e-8) || (mass - T::one()).abs() > tol::<T>(1e-8) {
            return Err(Error::Domain(format!(
                "vector is not stationary (residual {residual}, mass {mass})"
            )));
        }
        self.d = Some(d);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }

    pub fn r(&self) -> &DVector<T> {
        &self.r
    }

    pub fn d(&self) -> Option<&DVector<T>> {
        self.d.as_ref()
    }

    /// Stored stationary distribution, or compute it (requires ergodicity).
    pub fn stationary(&self) -> Result<DVector<T>> {
        match &self.d {
            Some(d) => Ok(d.clone()),
            None => stationary_distribution(self),
        }
    }
}

/// `P_pi` and `r_pi` with terminal states as zero-reward self-loops.
pub fn policy_matrices<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>) -> Result<ChainView<T>> {
    pi.check_against(mdp)?;
    let n = mdp.num_states();
    let mut p = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for s in 0..n {
        if mdp.is_terminal(s) {
            p[(s, s)] = T::one();
            continue;
        }
        for a in 0..mdp.num_actions(s) {
            let w = pi.prob(s, a);
            if w == T::zero() {
                continue;
            }
            for o in mdp.outcomes(s, a) {
                p[(s, o.next)] += w * o.prob;
                r[s] += w * o.prob * o.reward;
            }
        }
    }
    ChainView::new(p, r)
}

/// The unrolled chain: like [`policy_matrices`] but every terminal row
/// restarts from the start distribution with zero reward.
pub fn unroll<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>) -> Result<ChainView<T>> {
    if mdp.start_dist().iter().all(|&x| x == T::zero()) {
        return Err(Error::Config("start distribution is all zero".into()));
    }
    let chain = policy_matrices(mdp, pi)?;
    let ChainView { mut p, r, .. } = chain;
    for s in 0..mdp.num_states() {
        if mdp.is_terminal(s) {
            for (j, &x) in mdp.start_dist().iter().enumerate() {
                p[(s, j)] = x;
            }
        }
    }
    ChainView::new(p, r)
}

/// Result of the irreducibility / aperiodicity analysis of a chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErgodicityReport {
    pub irreducible: bool,
    /// Period of the communicating class containing the reference state
    /// (0 if that class has no cycle).
    pub period: usize,
    /// Number of closed (recurrent) communicating classes.
    pub closed_classes: usize,
    pub reference_state: usize,
    /// A state not mutually reachable with the reference state, if any.
    pub witness: Option<usize>,
}

impl ErgodicityReport {
    pub fn aperiodic(&self) -> bool {
        self.period == 1
    }

    pub fn is_ergodic(&self) -> bool {
        self.irreducible && self.aperiodic()
    }

    /// Human-readable description of the first violated property.
    pub fn violation(&self) -> Option<String> {
        if !self.irreducible {
            Some(format!(
                "chain is reducible: state {} does not communicate with state {} ({} closed classes)",
                self.witness.unwrap_or(0),
                self.reference_state,
                self.closed_classes
            ))
        } else if !self.aperiodic() {
            Some(format!(
                "chain is periodic: state {} has period {}",
                self.reference_state, self.period
            ))
        } else {
            None
        }
    }
}

fn support<T: Scalar>(p: &DMatrix<T>) -> Vec<Vec<usize>> {
    (0..p.nrows())
        .map(|i| (0..p.ncols()).filter(|&j| p[(i, j)] > T::zero()).collect())
        .collect()
}

fn reach_from(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility via reachability on the support graph and the period of
/// state 0 via BFS levels (gcd of `level[u] + 1 - level[v]` over edges in
/// its class).
pub fn check_ergodic<T: Scalar>(chain: &ChainView<T>) -> ErgodicityReport {
    let n = chain.len();
    let adj = support(chain.p());
    let reach: Vec<Vec<bool>> = (0..n).map(|s| reach_from(&adj, s)).collect();

    let reference = 0;
    let witness = (0..n).find(|&s| !(reach[reference][s] && reach[s][reference]));

    // A class is closed if nothing reachable from it lies outside it.
    let mut closed_classes = 0;
    let mut assigned = vec![false; n];
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&t| reach[s][t] && reach[t][s]).collect();
        for &t in &class {
            assigned[t] = true;
        }
        let closed = (0..n).all(|t| !reach[s][t] || reach[t][s]);
        if closed {
            closed_classes += 1;
        }
    }

    let in_class: Vec<bool> = (0..n).map(|s| reach[reference][s] && reach[s][reference]).collect();
    let mut level = vec![usize::MAX; n];
    level[reference] = 0;
    let mut queue = VecDeque::from([reference]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if in_class[v] && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0;
    for u in (0..n).filter(|&u| in_class[u]) {
        for &v in adj[u].iter().filter(|&&v| in_class[v]) {
            let diff = (level[u] + 1).abs_diff(level[v]);
            period = gcd(period, diff);
        }
    }

    ErgodicityReport {
        irreducible: witness.is_none(),
        period,
        closed_classes,
        reference_state: reference,
        witness,
    }
}

/// Solve `(P^T - I) d = 0` with one equation replaced by `sum(d) = 1`.
fn solve_stationary<T: Scalar>(p: &DMatrix<T>) -> Result<DVector<T>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = T::one();
    }
    rhs[n - 1] = T::one();
    let d = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("stationary system is singular".into()))?;
    let residual = (p.tr_mul(&d) - &d).amax();
    if residual > tol::<T>(1e-8) {
        return Err(Error::Numerical {
            message: "stationary solve is inaccurate".into(),
            residual: residual.to_f64_lossy(),
        });
    }
    Ok(d)
}

/// Unique stationary distribution of an ergodic chain, by direct solve.
pub fn stationary_distribution<T: Scalar>(chain: &ChainView<T>) -> Result<DVector<T>> {
    let report = check_ergodic(chain);
    if let Some(v) = report.violation() {
        return Err(Error::Domain(v));
    }
    let d = solve_stationary(chain.p())?;
    if let Some(i) = d.iter().position(|&x| !(x > T::zero())) {
        return Err(Error::Numerical {
            message: format!("stationary mass of state {i} is not positive"),
            residual: d[i].to_f64_lossy(),
        });
    }
    Ok(d)
}

/// Stationary distribution of a chain with exactly one closed class
/// (periodicity and transient states allowed). Transient states get zero
/// mass.
pub fn stationary_distribution_unichain<T: Scalar>(chain: &ChainView<T>) -> Result<DVector<T>> {
    let report = check_ergodic(chain);
    if report.closed_classes != 1 {
        return Err(Error::Domain(format!(
            "chain has {} closed classes; stationary distribution is not unique",
            report.closed_classes
        )));
    }
    let mut d = solve_stationary(chain.p())?;
    for x in d.iter_mut() {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
    let mass = d.sum();
    Ok(d / mass)
}

/// Independent cross-check: power iteration on the lazy chain `(P + I) / 2`,
/// which has the same stationary distribution and is aperiodic.
pub fn stationary_by_power_iteration<T: Scalar>(
    chain: &ChainView<T>,
    tolerance: T,
    max_iter: usize,
) -> Result<DVector<T>> {
    let n = chain.len();
    let half = T::lit(0.5);
    let lazy = (chain.p() + DMatrix::identity(n, n)) * half;
    let lazy_t = lazy.transpose();
    let mut d = DVector::from_element(n, T::one() / T::from_count(n));
    let mut change = T::zero();
    for _ in 0..max_iter {
        let next = &lazy_t * &d;
        change = (&next - &d).abs().sum();
        d = next;
        if change < tolerance {
            let mass = d.sum();
            return Ok(d / mass);
        }
    }
    Err(Error::Numerical {
        message: format!("power iteration did not converge in {max_iter} iterations"),
        residual: change.to_f64_lossy(),
    })
}

/// Long-run reward per step `d^T r`. Uses the chain's stored distribution
/// when present, otherwise the unique stationary distribution of its closed
/// class.
pub fn average_reward<T: Scalar>(chain: &ChainView<T>) -> Result<T> {
    let d = match chain.d() {
        Some(d) => d.clone(),
        None => stationary_distribution_unichain(chain)?,
    };
    Ok(d.dot(chain.r()))
}

/// Expected number of visits to each state during one episode started from
/// the start distribution (terminal entries are 0). Normalised, this is the
/// non-terminal part of the unrolled chain's stationary distribution.
pub fn episode_visitation<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>) -> Result<DVector<T>> {
    let chain = policy_matrices(mdp, pi)?;
    let idx: Vec<usize> = mdp.non_terminal_states().collect();
    let m = idx.len();
    let mut a = DMatrix::identity(m, m);
    for (i, &s) in idx.iter().enumerate() {
        for (j, &t) in idx.iter().enumerate() {
            a[(i, j)] -= chain.p()[(s, t)];
        }
    }
    super::dp::require_proper(&a, mdp)?;
    let d0 = DVector::from_iterator(m, idx.iter().map(|&s| mdp.start_dist()[s]));
    let counts = a
        .transpose()
        .lu()
        .solve(&d0)
        .ok_or_else(|| Error::Domain("policy does not terminate".into()))?;
    let mut out = DVector::zeros(mdp.num_states());
    for (i, &s) in idx.iter().enumerate() {
        out[s] = counts[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use nalgebra::{dmatrix, dvector};

    use super::*;
    use crate::mdp::Outcome;

    fn chain(p: DMatrix<f64>) -> ChainView<f64> {
        let n = p.nrows();
        ChainView::new(p, DVector::zeros(n)).unwrap()
    }

    #[test]
    fn two_cycle_is_periodic() {
        let r = check_ergodic(&chain(dmatrix![0.0, 1.0; 1.0, 0.0]));
        assert!(r.irreducible);
        assert_eq!(r.period, 2);
        assert!(!r.is_ergodic());
        assert!(r.violation().unwrap().contains("periodic"));
    }

    #[test]
    fn identity_is_reducible() {
        let r = check_ergodic(&chain(dmatrix![1.0, 0.0; 0.0, 1.0]));
        assert!(!r.irreducible);
        assert_eq!(r.witness, Some(1));
        assert_eq!(r.closed_classes, 2);
        let err = stationary_distribution(&chain(dmatrix![1.0, 0.0; 0.0, 1.0])).unwrap_err();
        assert!(err.to_string().contains("reducible"), "{err}");
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let d = stationary_distribution(&chain(dmatrix![0.5, 0.5; 0.5, 0.5])).unwrap();
        assert!((d - dvector![0.5, 0.5]).amax() < 1e-15);
    }

    #[test]
    fn two_state_stationary_and_average_reward() {
        // d0 * 0.1 = d1 * 0.5 with d0 + d1 = 1 gives (5/6, 1/6).
        let c = ChainView::new(dmatrix![0.9f64, 0.1; 0.5, 0.5], dvector![0.0, 1.0]).unwrap();
        let d = stationary_distribution(&c).unwrap();
        assert!((d[0] - 5.0 / 6.0).abs() < 1e-14);
        assert!((d[1] - 1.0 / 6.0).abs() < 1e-14);
        assert!((average_reward(&c).unwrap() - 1.0 / 6.0).abs() < 1e-14);
        let pw = stationary_by_power_iteration(&c, 1e-14, 100_000).unwrap();
        assert!((pw - d).amax() < 1e-10);
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(ChainView::new(dmatrix![0.5, 0.4; 0.5, 0.5], dvector![0.0, 0.0]).is_err());
    }

    fn corridor2() -> TabularMdp<f64> {
        let t = vec![
            vec![vec![Outcome::new(1, -1.0, 1.0)]],
            vec![vec![Outcome::new(2, -1.0, 1.0)]],
            vec![],
        ];
        TabularMdp::new(t, vec![1.0, 0.0, 0.0], vec![false, false, true], 0.9).unwrap()
    }

    #[test]
    fn terminal_rows_are_self_loops() {
        let mdp = corridor2();
        let c = policy_matrices(&mdp, &PolicyTable::uniform(&mdp)).unwrap();
        assert_eq!(c.p()[(2, 2)], 1.0);
        assert_eq!(c.r()[2], 0.0);
        // absorbing terminal: average reward of a terminating policy is zero
        assert_eq!(average_reward(&c).unwrap(), 0.0);
    }

    #[test]
    fn unrolled_terminal_restarts() {
        let mdp = corridor2();
        let c = unroll(&mdp, &PolicyTable::uniform(&mdp)).unwrap();
        assert_eq!(c.p().row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        let rep = check_ergodic(&c);
        assert!(rep.irreducible);
        assert_eq!(rep.period, 3);
    }

    #[test]
    fn unroll_copies_start_distribution() {
        let t = vec![
            vec![vec![Outcome::new(2, 0.0, 1.0)]],
            vec![vec![Outcome::new(2, 0.0, 1.0)]],
            vec![],
        ];
        let mdp = TabularMdp::new(t, vec![0.3, 0.7, 0.0], vec![false, false, true], 1.0).unwrap();
        let c = unroll(&mdp, &PolicyTable::uniform(&mdp)).unwrap();
        assert_eq!(c.p().row(2).iter().copied().collect::<Vec<_>>(), vec![0.3, 0.7, 0.0]);
    }

    #[test]
    fn visitation_counts_on_corridor() {
        let mdp = corridor2();
        let v = episode_visitation(&mdp, &PolicyTable::uniform(&mdp)).unwrap();
        assert!((v - dvector![1.0, 1.0, 0.0]).amax() < 1e-14);
    }
}
