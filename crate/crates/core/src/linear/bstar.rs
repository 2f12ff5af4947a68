use nalgebra::DVector;
use serde::Serialize;

use crate::mdp::{discounted_termination, episode_visitation, exact_values, expected_remaining_length, PolicyTable, TabularMdp};
use crate::{Error, Result, Scalar};

/// The centering value `b` predicted for an episodic problem, computed two
/// ways.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BStar {
    /// `E_d[v(s) (1 - gamma) / (1 - gamma^{T(s)})]` with `T(s)` the expected
    /// remaining length.
    pub formula: f64,
    /// Same with `gamma^{T(s)}` replaced by the exact `E[gamma^T | s]`.
    pub exact_discount: f64,
    /// Normalised visitation distribution over non-terminal states.
    pub visitation: Vec<f64>,
}

impl BStar {
    pub fn gap(&self) -> f64 {
        (self.formula - self.exact_discount).abs()
    }
}

/// Both estimates of the centering value. `d` is the expected per-episode
/// visitation over non-terminal states, normalised; this is the unrolled
/// chain's stationary distribution restricted to non-terminal states.
pub fn b_star<T: Scalar>(mdp: &TabularMdp<T>, pi: &PolicyTable<T>, gamma: T) -> Result<BStar> {
    if !mdp.has_terminal() {
        return Err(Error::Usage("b_star is defined for episodic MDPs".into()));
    }
    let v = exact_values(mdp, pi, gamma)?.v;
    let lengths = expected_remaining_length(mdp, pi)?;
    let disc = discounted_termination(mdp, pi, gamma)?;
    let counts = episode_visitation(mdp, pi)?;
    let total = counts.sum();
    let d: DVector<T> = counts / total;
    let one = T::one();
    let mut formula = T::zero();
    let mut exact = T::zero();
    for s in mdp.non_terminal_states() {
        let (w_formula, w_exact) = if gamma == one {
            // limit of (1 - g) / (1 - g^t) as g -> 1
            (one / lengths[s], one / lengths[s])
        } else {
            ((one - gamma) / (one - gamma.powf(lengths[s])), (one - gamma) / (one - disc[s]))
        };
        formula += d[s] * v[s] * w_formula;
        exact += d[s] * v[s] * w_exact;
    }
    Ok(BStar {
        formula: formula.to_f64_lossy(),
        exact_discount: exact.to_f64_lossy(),
        visitation: d.iter().map(|x| x.to_f64_lossy()).collect(),
    })
}
