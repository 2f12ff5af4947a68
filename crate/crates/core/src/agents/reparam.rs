use serde::Serialize;

use super::{AgentConfig, AgentState, QTable, StepSchedule, TaskKind, Transition, UpdateForm};
use crate::{Error, Result, Scalar};

/// Map episodic-form parameters `(b, eta)` to continuing-form parameters
/// `(b^, eta^) = ((1 - gamma) b, (1 - gamma) eta)`.
pub fn reparameterize<T: Scalar>(b: T, eta: T, gamma: T) -> Result<(T, T)> {
    if gamma == T::one() {
        return Err(Error::Domain(
            "reparameterization is undefined at gamma = 1; use the episodic form directly".into(),
        ));
    }
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1)")));
    }
    let k = T::one() - gamma;
    Ok((k * b, k * eta))
}

/// Largest disagreement seen while replaying a transition sequence through
/// both update forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Divergence {
    /// `max_t ||w_A - w_B||_inf`.
    pub weights: f64,
    /// `max_t |(1 - gamma) b_A - b^_B|`.
    pub bias: f64,
}

impl Divergence {
    pub fn max(&self) -> f64 {
        self.weights.max(self.bias)
    }
}

/// Replay `transitions` through the episodic form with `(b0, eta)` and the
/// continuing form with the reparameterized `(b^0, eta^)`, from the same
/// initial table and with a constant step size.
pub fn equivalence_harness<T: Scalar>(
    transitions: &[Transition<T>],
    gamma: T,
    alpha: T,
    eta: T,
    b0: T,
    w0: &QTable<T>,
) -> Result<Divergence> {
    let (b_hat, eta_hat) = reparameterize(b0, eta, gamma)?;
    let schedule = StepSchedule::Constant(alpha);
    let cfg_a = AgentConfig::new(schedule, eta, gamma, UpdateForm::Episodic, TaskKind::Episodic);
    let cfg_b = AgentConfig::new(schedule, eta_hat, gamma, UpdateForm::Continuing, TaskKind::Episodic);
    let mut a = AgentState::new(w0.clone(), cfg_a)?.with_bias(b0);
    let mut b = AgentState::new(w0.clone(), cfg_b)?.with_bias(b_hat);
    let k = T::one() - gamma;
    let mut out = Divergence { weights: 0.0, bias: 0.0 };
    for t in transitions {
        a.diff_q_step(t)?;
        b.diff_q_step(t)?;
        out.weights = out.weights.max(a.weights.max_abs_diff(&b.weights).to_f64_lossy());
        out.bias = out.bias.max((k * a.bias - b.bias).abs().to_f64_lossy());
    }
    Ok(out)
}
