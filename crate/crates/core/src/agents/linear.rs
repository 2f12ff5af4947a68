use nalgebra::DVector;

use super::{AgentState, Transition};
use crate::linear::FeatureSet;
use crate::{Error, Result, Scalar};

impl<T: Scalar> AgentState<T, DVector<T>> {
    /// Expanded-feature linear TD: with `w~ = [b, w]`,
    /// `delta = r + gamma phi~(s')^T w~ - phi~(s)^T w~` and
    /// `w~ += alpha delta K phi~(s)`, `K = diag(eta, 1, ..., 1)`.
    /// A terminal successor has value zero.
    pub fn linear_diff_td_step(&mut self, features: &FeatureSet<T>, t: &Transition<T>) -> Result<T> {
        let d = self.weights.len();
        if features.dim() != d + 1 {
            return Err(Error::Config(format!(
                "agent has {d} raw weights, features have {} expanded columns",
                features.dim()
            )));
        }
        let n = features.num_states();
        if t.s >= n || t.next >= n {
            return Err(Error::Config(format!("transition {t:?} outside a {n}-state feature set")));
        }
        let phi = features.phi_tilde();
        let value = |s: usize, w: &DVector<T>, b: T| {
            let mut v = phi[(s, 0)] * b;
            for j in 0..d {
                v += phi[(s, j + 1)] * w[j];
            }
            v
        };
        let alpha = self.alpha();
        let next = if t.terminal_next { T::zero() } else { value(t.next, &self.weights, self.bias) };
        let delta = t.r + self.config.gamma * next - value(t.s, &self.weights, self.bias);
        let step = alpha * delta;
        for j in 0..d {
            self.weights[j] += step * phi[(t.s, j + 1)];
        }
        self.bias += self.config.eta * step * phi[(t.s, 0)];
        self.updates += 1;
        Ok(delta)
    }

    /// `[b, w]`.
    pub fn expanded_weights(&self) -> DVector<T> {
        let mut out = DVector::zeros(self.weights.len() + 1);
        out[0] = self.bias;
        out.rows_mut(1, self.weights.len()).copy_from(&self.weights);
        out
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::super::{AgentConfig, StepSchedule, TaskKind, UpdateForm};
    use super::*;
    use crate::linear::{expand_features_with_terminals, FeatureMode};

    #[test]
    fn one_update_by_hand() {
        let phi = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let fs = expand_features_with_terminals(phi, &[false, false], FeatureMode::Continuing).unwrap();
        let cfg = AgentConfig::new(StepSchedule::Constant(0.5), 0.1, 0.9, UpdateForm::Continuing, TaskKind::Continuing);
        let mut ag = AgentState::new(DVector::from_element(1, 2.0f64), cfg).unwrap().with_bias(1.0);
        // v(0) = 1 + 2 = 3, v(1) = 1 - 2 = -1
        let delta = ag.linear_diff_td_step(&fs, &Transition::new(0, 0, 1.0, 1, false)).unwrap();
        assert!((delta - (1.0 - 0.9 - 3.0)).abs() < 1e-12);
        assert!((ag.weights[0] - (2.0 + 0.5 * delta)).abs() < 1e-12);
        assert!((ag.bias - (1.0 + 0.05 * delta)).abs() < 1e-12);
        assert_eq!(ag.expanded_weights().as_slice(), &[ag.bias, ag.weights[0]]);
    }

    #[test]
    fn terminal_rows_never_update() {
        let phi = DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 3.0]);
        let fs = expand_features_with_terminals(phi, &[false, false, true], FeatureMode::Episodic).unwrap();
        let cfg = AgentConfig::new(StepSchedule::Constant(0.5), 1.0, 1.0, UpdateForm::Episodic, TaskKind::Episodic);
        let mut ag = AgentState::new(DVector::from_element(1, 2.0f64), cfg).unwrap().with_bias(1.0);
        let before = ag.expanded_weights();
        ag.linear_diff_td_step(&fs, &Transition::new(2, 0, 5.0, 0, false)).unwrap();
        assert_eq!(ag.expanded_weights(), before);
        let delta = ag.linear_diff_td_step(&fs, &Transition::new(0, 0, 0.0, 2, true)).unwrap();
        assert_eq!(delta, -3.0);
    }

    #[test]
    fn dimension_mismatch() {
        let phi = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let fs = expand_features_with_terminals(phi, &[false, false], FeatureMode::Continuing).unwrap();
        let cfg = AgentConfig::new(StepSchedule::Constant(0.5), 0.1, 0.9, UpdateForm::Continuing, TaskKind::Continuing);
        let mut ag = AgentState::new(DVector::<f64>::zeros(2), cfg).unwrap();
        assert!(ag.linear_diff_td_step(&fs, &Transition::new(0, 0, 1.0, 1, false)).is_err());
    }
}
