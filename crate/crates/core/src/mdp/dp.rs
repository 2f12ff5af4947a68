use nalgebra::{DMatrix, DVector};

use super::{policy_matrices, ActionValues, PolicyTable, TabularMdp};
use crate::scalar::tol;
use crate::{Error, Result, Scalar};

/// Absolute tolerance on q-values when collecting greedy action sets.
pub const GREEDY_TIE_TOL: f64 = 1e-9;

/// Margin below 1 the spectral radius of the non-terminal block must keep
/// for undiscounted quantities to be finite.
const PROPER_MARGIN: f64 = 1e-8;

const VI_MAX_ITER: usize = 200_000;

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re * c.re + c.im * c.im).sqrt())
        .fold(T::zero(), |a, b| a.max(b))
}

/// `identity_minus_block` is `I - P_NN`; reject it unless the spectral
/// radius of `P_NN` is below `1 - 1e-8`.
pub(crate) fn require_proper<T: Scalar>(identity_minus_block: &DMatrix<T>, mdp: &TabularMdp<T>) -> Result<()> {
    let m = identity_minus_block.nrows();
    let block = DMatrix::identity(m, m) - identity_minus_block;
    let rho = spectral_radius(&block);
    if rho >= T::one() - T::lit(PROPER_MARGIN) {
        return Err(Error::Domain(format!(
            "policy does not terminate with probability 1: spectral radius of the non-terminal block is {rho} \
             ({} states)",
            mdp.num_states()
        )));
    }
    Ok(())
}

fn non_terminal_index<T: Scalar>(mdp: &TabularMdp<T>) -> Vec<usize> {
    mdp.non_terminal_states().collect()
}

/// `I - scale * P_NN` over the non-terminal states.
fn block_system<T: Scalar>(p: &DMatrix<T>, idx: &[usize], scale: T) -> DMatrix<T> {
    let m = idx.len();
    DMatrix::from_fn(m, m, |i, j| {
        let id = if i == j { T::one() } else { T::zero() };
        id - scale * p[(idx[i], idx[j])]
    })
}

fn scatter<T: Scalar>(n: usize, idx: &[usize], vals: &DVector<T>, fill: T) -> DVector<T> {
    let mut out = DVector::from_element(n, fill);
    for (i, &s) in idx.iter().enumerate() {
        out[s] = vals[i];
    }
    out
}

/// State and action values of a fixed policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyValues<T: Scalar> {
    pub v: DVector<T>,
    pub q: ActionValues<T>,
}

/// Solve `(I - gamma P_pi) v = r_pi` on non-terminal states with
/// `v(terminal) = 0`, then `q(s, a) = E[r] + gamma * E[v(s')]`.
pub fn exact_values<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>, gamma: T) -> Result<PolicyValues<T>> {
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
    }
    let chain = policy_matrices(mdp, pi)?;
    let idx = non_terminal_index(mdp);
    let a = block_system(chain.p(), &idx, gamma);
    if gamma == T::one() {
        require_proper(&a, mdp)?;
    }
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&s| chain.r()[s]));
    let v_nt = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("Bellman system is singular".into()))?;
    let v = scatter(mdp.num_states(), &idx, &v_nt, T::zero());
    let q = action_values(mdp, &v, gamma);
    Ok(PolicyValues { v, q })
}

fn action_values<T: Scalar>(mdp: &TabularMdp<T>, v: &DVector<T>, gamma: T) -> ActionValues<T> {
    (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions(s))
                .map(|a| {
                    mdp.outcomes(s, a)
                        .iter()
                        .fold(T::zero(), |acc, o| acc + o.prob * (o.reward + gamma * v[o.next]))
                })
                .collect()
        })
        .collect()
}

/// All actions within `tie_tol` of the row maximum, per state.
pub fn greedy_action_sets<T: Scalar>(q: &ActionValues<T>, tie_tol: T) -> Vec<Vec<usize>> {
    q.iter()
        .map(|row| {
            let Some(best) = row.iter().copied().reduce(|a, b| a.max(b)) else {
                return Vec::new();
            };
            (0..row.len()).filter(|&a| row[a] >= best - tie_tol).collect()
        })
        .collect()
}

/// Optimal action values and every maximising action.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalValues<T: Scalar> {
    pub q: ActionValues<T>,
    pub v: DVector<T>,
    pub greedy: Vec<Vec<usize>>,
    pub iterations: usize,
}

/// Synchronous value iteration on `q`, run until the sup-norm distance to
/// the Bellman-optimality fixed point is certified below 1e-12 (for
/// `gamma < 1`) or the update falls below 1e-13 (for `gamma = 1`).
pub fn value_iteration<T: Scalar>(mdp: &TabularMdp<T>, gamma: T) -> Result<OptimalValues<T>> {
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
    }
    if gamma == T::one() {
        // some proper policy must exist; the uniform policy is proper iff
        // every state can reach termination
        let chain = policy_matrices(mdp, &PolicyTable::uniform(mdp))?;
        let idx = non_terminal_index(mdp);
        require_proper(&block_system(chain.p(), &idx, T::one()), mdp)?;
    }
    let n = mdp.num_states();
    let mut v = DVector::zeros(n);
    let target = tol::<T>(1e-12);
    let mut residual = T::zero();
    for it in 1..=VI_MAX_ITER {
        let q = action_values(mdp, &v, gamma);
        let next = DVector::from_iterator(
            n,
            q.iter()
                .map(|row| row.iter().copied().reduce(|a, b| a.max(b)).unwrap_or(T::zero())),
        );
        residual = (&next - &v).amax();
        v = next;
        let bound = if gamma < T::one() {
            residual * gamma / (T::one() - gamma)
        } else {
            residual * T::lit(10.0)
        };
        if bound <= target {
            let q = action_values(mdp, &v, gamma);
            let greedy = greedy_action_sets(&q, T::lit(GREEDY_TIE_TOL));
            return Ok(OptimalValues { q, v, greedy, iterations: it });
        }
    }
    Err(Error::Numerical {
        message: format!("value iteration did not converge in {VI_MAX_ITER} sweeps"),
        residual: residual.to_f64_lossy(),
    })
}

/// Expected remaining episode length `T(s)`: solves `T = 1 + P_NN T`.
pub fn expected_remaining_length<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>) -> Result<DVector<T>> {
    let chain = policy_matrices(mdp, pi)?;
    let idx = non_terminal_index(mdp);
    let a = block_system(chain.p(), &idx, T::one());
    require_proper(&a, mdp)?;
    let ones = DVector::from_element(idx.len(), T::one());
    let t = a
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::Domain("policy does not terminate".into()))?;
    Ok(scatter(mdp.num_states(), &idx, &t, T::zero()))
}

/// `E[gamma^T | S_0 = s]` where `T` is the (random) remaining episode
/// length; 1 on terminal states.
pub fn discounted_termination<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>, gamma: T) -> Result<DVector<T>> {
    let chain = policy_matrices(mdp, pi)?;
    let idx = non_terminal_index(mdp);
    let a = block_system(chain.p(), &idx, gamma);
    require_proper(&block_system(chain.p(), &idx, T::one()), mdp)?;
    let rhs = DVector::from_iterator(
        idx.len(),
        idx.iter().map(|&s| {
            let into_terminal = (0..mdp.num_states())
                .filter(|&t| mdp.is_terminal(t))
                .fold(T::zero(), |acc, t| acc + chain.p()[(s, t)]);
            gamma * into_terminal
        }),
    );
    let g = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("termination system is singular".into()))?;
    Ok(scatter(mdp.num_states(), &idx, &g, T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Outcome;

    /// k non-terminal states in a line, one action, -1 per step.
    fn line(k: usize, gamma: f64) -> TabularMdp<f64> {
        let mut t: Vec<Vec<Vec<Outcome<f64>>>> = (0..k).map(|s| vec![vec![Outcome::new(s + 1, -1.0, 1.0)]]).collect();
        t.push(vec![]);
        let mut start = vec![0.0; k + 1];
        start[0] = 1.0;
        let mut term = vec![false; k + 1];
        term[k] = true;
        TabularMdp::new(t, start, term, gamma).unwrap()
    }

    #[test]
    fn one_step_episode() {
        let t = vec![vec![vec![Outcome::new(1, 5.0, 1.0)]], vec![]];
        let mdp = TabularMdp::new(t, vec![1.0, 0.0], vec![false, true], 1.0).unwrap();
        let pi = PolicyTable::uniform(&mdp);
        for g in [0.0, 0.5, 1.0] {
            assert_eq!(exact_values(&mdp, &pi, g).unwrap().v[0], 5.0);
        }
        assert_eq!(expected_remaining_length(&mdp, &pi).unwrap()[0], 1.0);
    }

    #[test]
    fn corridor_geometric_sum() {
        let mdp = line(3, 0.9);
        let pi = PolicyTable::uniform(&mdp);
        let v = exact_values(&mdp, &pi, 0.9).unwrap().v;
        assert!((v[0] + 2.71).abs() < 1e-14);
        assert_eq!(v[3], 0.0);
        let t = expected_remaining_length(&mdp, &pi).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-14);
        let g = discounted_termination(&mdp, &pi, 0.9).unwrap();
        assert!((g[0] - 0.729).abs() < 1e-14);
    }

    #[test]
    fn non_terminating_policy_is_rejected_at_gamma_one() {
        // state 0 loops on itself forever
        let t = vec![vec![vec![Outcome::new(0, 1.0, 1.0)], vec![Outcome::new(1, 0.0, 1.0)]], vec![]];
        let mdp = TabularMdp::new(t, vec![1.0, 0.0], vec![false, true], 1.0).unwrap();
        let stay = PolicyTable::deterministic(&mdp, &[0, 0]).unwrap();
        assert!(matches!(exact_values(&mdp, &stay, 1.0), Err(Error::Domain(_))));
        assert!(matches!(expected_remaining_length(&mdp, &stay), Err(Error::Domain(_))));
        // discounted is fine
        let v = exact_values(&mdp, &stay, 0.5f64).unwrap().v;
        assert!((v[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_action_value_iteration_matches_policy_evaluation() {
        let mdp = line(4, 0.9);
        let opt = value_iteration(&mdp, 0.9).unwrap();
        let pe = exact_values(&mdp, &PolicyTable::uniform(&mdp), 0.9).unwrap();
        for s in 0..4 {
            assert!((opt.q[s][0] - pe.q[s][0]).abs() < 1e-10);
        }
    }

    #[test]
    fn greedy_sets_keep_ties() {
        let q = vec![vec![1.0, 1.0 - 1e-12, 0.5], vec![], vec![-3.0]];
        assert_eq!(greedy_action_sets(&q, GREEDY_TIE_TOL), vec![vec![0, 1], vec![], vec![0]]);
    }
}
