use super::{AgentState, QTable, Transition};
use crate::{Error, Result, Scalar};

impl<T: Scalar> AgentState<T, QTable<T>> {
    /// Uncentered Q-learning: `Q(s,a) += alpha (r + gamma max Q(s',.) - Q(s,a))`.
    /// The bias is untouched.
    pub fn q_step(&mut self, t: &Transition<T>) -> T {
        let alpha = self.alpha();
        let q_sa = self.weights.get(t.s, t.a);
        let delta = if t.terminal_next {
            t.r - q_sa
        } else {
            t.r + self.config.gamma * self.weights.max(t.next) - q_sa
        };
        self.weights.rows[t.s][t.a] += alpha * delta;
        self.updates += 1;
        delta
    }

    /// Generalized differential Q-learning. One TD error, computed from the
    /// pre-update values, drives both `Q(s,a) += alpha delta` and
    /// `b += eta alpha delta`. Terminal transitions never read successor
    /// values.
    pub fn diff_q_step(&mut self, t: &Transition<T>) -> Result<T> {
        let alpha = self.alpha();
        let q_sa = self.weights.get(t.s, t.a);
        let delta = if t.terminal_next {
            t.r - self.terminal_centering()? - q_sa
        } else {
            t.r - self.centering() + self.config.gamma * self.weights.max(t.next) - q_sa
        };
        self.weights.rows[t.s][t.a] += alpha * delta;
        self.finish(alpha, delta);
        Ok(delta)
    }
}

impl<T: Scalar> AgentState<T, Vec<T>> {
    /// Differential TD prediction on tabular state values.
    pub fn diff_td_predict_step(&mut self, t: &Transition<T>) -> Result<T> {
        let n = self.weights.len();
        if t.s >= n || (!t.terminal_next && t.next >= n) {
            return Err(Error::Config(format!("transition {t:?} outside a {n}-state value table")));
        }
        let alpha = self.alpha();
        let v = self.weights[t.s];
        let delta = if t.terminal_next {
            t.r - self.terminal_centering()? - v
        } else {
            t.r - self.centering() + self.config.gamma * self.weights[t.next] - v
        };
        self.weights[t.s] += alpha * delta;
        self.finish(alpha, delta);
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AgentConfig, StepSchedule, TaskKind, UpdateForm};
    use super::*;

    fn q_agent(alpha: f64, eta: f64, gamma: f64, form: UpdateForm) -> AgentState<f64, QTable<f64>> {
        let cfg = AgentConfig::new(StepSchedule::Constant(alpha), eta, gamma, form, TaskKind::Episodic);
        AgentState::new(QTable::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![]]), cfg).unwrap()
    }

    #[test]
    fn q_step_terminal() {
        let mut ag = q_agent(0.5, 0.0, 0.9, UpdateForm::Continuing);
        ag.q_step(&Transition::new(0, 1, 1.0, 2, true));
        assert_eq!(ag.weights.get(0, 1), 0.5);
        assert_eq!(ag.bias, 0.0);
    }

    #[test]
    fn zero_step_size_is_identity() {
        let mut ag = q_agent(0.0, 1.0, 0.9, UpdateForm::Continuing);
        ag.weights.rows[1][0] = 3.0;
        let before = ag.clone();
        ag.q_step(&Transition::new(0, 0, 1.0, 1, false));
        ag.diff_q_step(&Transition::new(0, 0, 1.0, 1, false)).unwrap();
        assert_eq!(ag.weights, before.weights);
        assert_eq!(ag.bias, before.bias);
    }

    #[test]
    fn continuing_form_terminal_error() {
        let mut ag = q_agent(0.1, 1.0, 0.9, UpdateForm::Continuing).with_bias(1.0);
        let delta = ag.diff_q_step(&Transition::new(0, 0, 0.0, 2, true)).unwrap();
        assert!((delta + 10.0).abs() < 1e-12);
    }

    #[test]
    fn episodic_form_at_gamma_one() {
        let mut ag = q_agent(1.0, 0.0, 1.0, UpdateForm::Episodic).with_bias(5.0);
        ag.weights.rows[1] = vec![2.0, 4.0];
        ag.weights.rows[0][0] = 1.0;
        let delta = ag.diff_q_step(&Transition::new(0, 0, 0.5, 1, false)).unwrap();
        assert_eq!(delta, 0.5 + 4.0 - 1.0);
        let delta = ag.diff_q_step(&Transition::new(1, 1, 0.5, 2, true)).unwrap();
        assert_eq!(delta, 0.5 - 5.0 - 4.0);
    }

    #[test]
    fn invalid_form_for_gamma_one() {
        let cfg = AgentConfig::new(StepSchedule::Constant(0.1), 1.0, 1.0, UpdateForm::Continuing, TaskKind::Episodic);
        assert!(AgentState::new(QTable::<f64>::from_rows(vec![]), cfg).is_err());
        let cfg = AgentConfig::new(StepSchedule::Constant(0.1), 1.0, 1.0, UpdateForm::Episodic, TaskKind::Continuing);
        assert!(AgentState::new(QTable::<f64>::from_rows(vec![]), cfg).is_err());
    }

    #[test]
    fn zero_eta_matches_q_learning_bitwise() {
        let ts = [
            Transition::new(0, 0, -1.0, 1, false),
            Transition::new(1, 1, 0.3, 0, false),
            Transition::new(0, 1, 2.0, 2, true),
            Transition::new(1, 0, -0.7, 2, true),
        ];
        let mut a = q_agent(0.3, 0.0, 0.9, UpdateForm::Continuing);
        let mut b = a.clone();
        for _ in 0..50 {
            for t in &ts {
                a.q_step(t);
                b.diff_q_step(t).unwrap();
            }
        }
        assert_eq!(a.weights, b.weights);
        assert_eq!(b.bias, 0.0);
    }

    #[test]
    fn prediction_all_zero_is_fixed() {
        let cfg = AgentConfig::new(StepSchedule::Constant(0.5), 1.0, 0.9, UpdateForm::Episodic, TaskKind::Episodic);
        let mut ag = AgentState::new(vec![0.0; 3], cfg).unwrap();
        ag.diff_td_predict_step(&Transition::new(0, 0, 0.0, 1, false)).unwrap();
        ag.diff_td_predict_step(&Transition::new(1, 0, 0.0, 2, true)).unwrap();
        assert_eq!(ag.weights, vec![0.0; 3]);
        assert_eq!(ag.bias, 0.0);
    }

    #[test]
    fn one_state_loop_learns_average_reward() {
        let cfg = AgentConfig::new(StepSchedule::Constant(0.1), 1.0, 1.0, UpdateForm::Continuing, TaskKind::Continuing);
        let mut ag = AgentState::new(vec![0.0f64], cfg).unwrap();
        for _ in 0..2000 {
            ag.diff_td_predict_step(&Transition::new(0, 0, 2.0, 0, false)).unwrap();
        }
        assert!((ag.bias - 2.0).abs() < 1e-9);
    }
}
