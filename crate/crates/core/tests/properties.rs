//! Randomized invariants.

use difftd::agents::{
    epsilon_greedy, AgentConfig, AgentState, QTable, StepSchedule, TaskKind, Transition, UpdateForm,
};
use difftd::checks::reparameterization_divergence;
use difftd::envs::{make_diagnostic, sample_start, sample_step, Diagnostic};
use difftd::experiments::{aggregate_series, mean_stderr, run_trial, Algorithm, EnvSpec, ExperimentConfig};
use difftd::linear::random::random_ergodic_chain;
use difftd::mdp::{
    exact_values, greedy_action_sets, policy_matrices, stationary_by_power_iteration, stationary_distribution, unroll,
    value_iteration, PolicyTable, TabularMdp,
};
use difftd::shaping::{shaped_mdp, verify_return_identity, PotentialSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mdp(n: usize, a: usize, seed: u64) -> TabularMdp<f64> {
    make_diagnostic(&Diagnostic::Random { states: n, actions: a, seed }).unwrap()
}

/// A trajectory of uniformly random actions, restarting after termination.
fn trajectory(mdp: &TabularMdp<f64>, len: usize, seed: u64) -> Vec<Transition<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = sample_start(mdp, &mut rng);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let a = rng.random_range(0..mdp.num_actions(s));
        let step = sample_step(mdp, s, a, &mut rng).unwrap();
        out.push(Transition::new(s, a, step.reward, step.next, step.terminal_next));
        s = if step.terminal_next { sample_start(mdp, &mut rng) } else { step.next };
    }
    out
}

fn agent(mdp: &TabularMdp<f64>, alpha: f64, eta: f64, gamma: f64, form: UpdateForm) -> AgentState<f64, QTable<f64>> {
    let cfg = AgentConfig::new(StepSchedule::Constant(alpha), eta, gamma, form, TaskKind::Episodic);
    AgentState::new(QTable::zeros(mdp), cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_eta_is_bitwise_q_learning(
        n in 2usize..7,
        a in 1usize..4,
        seed in any::<u64>(),
        alpha in 0.01f64..1.0,
        gamma in 0.0f64..1.0,
        episodic in any::<bool>(),
    ) {
        let mdp = random_mdp(n, a, seed);
        let form = if episodic { UpdateForm::Episodic } else { UpdateForm::Continuing };
        let mut q = agent(&mdp, alpha, 0.0, gamma, form);
        let mut d = agent(&mdp, alpha, 0.0, gamma, form);
        for t in trajectory(&mdp, 500, seed ^ 1) {
            let dq = q.q_step(&t);
            let dd = d.diff_q_step(&t).unwrap();
            prop_assert_eq!(dq.to_bits(), dd.to_bits());
        }
        for (x, y) in q.weights.rows().iter().flatten().zip(d.weights.rows().iter().flatten()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(d.bias, 0.0);
    }

    #[test]
    fn reparameterized_forms_stay_together(gamma in 0.0f64..0.995, seed in any::<u64>()) {
        let div = reparameterization_divergence(gamma, 2_000, seed).unwrap();
        prop_assert!(div.max() <= 1e-12, "divergence {:e}", div.max());
    }

    #[test]
    fn episodic_terminal_update_ignores_successor(
        r in -10.0f64..10.0,
        b in -5.0f64..5.0,
        junk in -1e6f64..1e6,
        gamma in 0.0f64..=1.0,
    ) {
        let mdp = random_mdp(3, 2, 0);
        let mut clean = agent(&mdp, 0.5, 0.1, gamma, UpdateForm::Episodic).with_bias(b);
        let mut dirty = clean.clone();
        dirty.weights = QTable::from_rows(vec![vec![0.0, 0.0], vec![junk, junk], vec![0.0, 0.0], vec![]]);
        let t = Transition::new(0, 1, r, 1, true);
        prop_assert_eq!(clean.diff_q_step(&t).unwrap(), dirty.diff_q_step(&t).unwrap());
        prop_assert_eq!(clean.bias, dirty.bias);
    }

    #[test]
    fn shaping_keeps_greedy_sets_and_shifts_rows(
        n in 2usize..8,
        a in 2usize..4,
        seed in any::<u64>(),
        b in -5.0f64..5.0,
        gamma in 0.5f64..0.99,
    ) {
        let mdp = random_mdp(n, a, seed).with_gamma(gamma).unwrap();
        let spec = PotentialSpec::new(b, gamma).unwrap();
        let shaped = shaped_mdp(&mdp, &spec).unwrap();
        let plain = value_iteration(&mdp, gamma).unwrap();
        let moved = value_iteration(&shaped, gamma).unwrap();
        prop_assert_eq!(&plain.greedy, &moved.greedy);
        for (p, m) in plain.q.iter().zip(&moved.q) {
            let shifts: Vec<f64> = p.iter().zip(m).map(|(x, y)| y - x).collect();
            if let Some(&first) = shifts.first() {
                for s in &shifts {
                    prop_assert!((s - first).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn state_dependent_shaping_collapses_to_two_cases(
        n in 2usize..8,
        seed in any::<u64>(),
        b in -5.0f64..5.0,
        gamma in 0.01f64..0.99,
    ) {
        let mdp = random_mdp(n, 2, seed);
        let discounts = mdp.terminal().iter().map(|&t| if t { 0.0 } else { gamma }).collect();
        let spec = PotentialSpec::with_state_discounts(b, gamma, discounts, mdp.terminal()).unwrap();
        let flat = PotentialSpec::new(b, gamma).unwrap();
        for s in mdp.non_terminal_states() {
            for next in 0..mdp.num_states() {
                let two = flat.shaping_term(mdp.is_terminal(next)).unwrap();
                let general = spec.shaping_term_state_dependent(s, next).unwrap();
                prop_assert!((two - general).abs() <= 1e-9 * (1.0 + two.abs()));
            }
        }
    }

    #[test]
    fn shaped_returns_track_raw_returns(seed in any::<u64>(), b in -5.0f64..5.0, gamma in 0.1f64..0.95) {
        let mdp = random_mdp(4, 2, seed % 64).with_gamma(gamma).unwrap();
        let pi = PolicyTable::uniform(&mdp);
        let spec = PotentialSpec::new(b, gamma).unwrap();
        let residual = verify_return_identity(&mdp, &pi, &spec, 20, seed).unwrap();
        prop_assert!(residual <= 1e-8, "residual {:e}", residual);
    }

    #[test]
    fn stationary_solvers_agree(n in 2usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = random_ergodic_chain::<f64, _>(n, &mut rng).unwrap();
        for row in chain.p().row_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-10);
        }
        let d = stationary_distribution(&chain).unwrap();
        prop_assert!((d.sum() - 1.0).abs() <= 1e-10);
        let moved = chain.p().transpose() * &d;
        prop_assert!((moved - &d).amax() <= 1e-8);
        let power = stationary_by_power_iteration(&chain, 1e-14, 1_000_000).unwrap();
        prop_assert!((power - d).amax() <= 1e-8);
    }

    #[test]
    fn policy_values_satisfy_bellman(n in 2usize..8, a in 1usize..4, seed in any::<u64>(), gamma in 0.0f64..=1.0) {
        let mdp = random_mdp(n, a, seed);
        let pi = PolicyTable::uniform(&mdp);
        let values = exact_values(&mdp, &pi, gamma).unwrap();
        for s in 0..mdp.num_states() {
            let backed: f64 = if mdp.is_terminal(s) {
                0.0
            } else {
                (0..mdp.num_actions(s))
                    .map(|a| {
                        pi.prob(s, a)
                            * mdp.outcomes(s, a).iter().map(|o| o.prob * (o.reward + gamma * values.v[o.next])).sum::<f64>()
                    })
                    .sum()
            };
            prop_assert!((backed - values.v[s]).abs() <= 1e-9 * (1.0 + backed.abs()));
        }
    }

    #[test]
    fn optimal_values_are_a_fixed_point(n in 2usize..8, a in 1usize..4, seed in any::<u64>(), gamma in 0.0f64..0.99) {
        let mdp = random_mdp(n, a, seed);
        let opt = value_iteration(&mdp, gamma).unwrap();
        let vmax = |s: usize| opt.q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for s in mdp.non_terminal_states() {
            for a in 0..mdp.num_actions(s) {
                let backed: f64 = mdp
                    .outcomes(s, a)
                    .iter()
                    .map(|o| o.prob * (o.reward + if mdp.is_terminal(o.next) { 0.0 } else { gamma * vmax(o.next) }))
                    .sum();
                prop_assert!((backed - opt.q[s][a]).abs() <= 1e-9);
            }
        }
        prop_assert_eq!(greedy_action_sets(&opt.q, 1e-9), opt.greedy);
    }

    #[test]
    fn epsilon_greedy_returns_valid_actions(
        row in prop::collection::vec(-10.0f64..10.0, 1..8),
        epsilon in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..50 {
            let a = epsilon_greedy(&row, epsilon, &mut rng);
            prop_assert!(a < row.len());
            if epsilon == 0.0 {
                prop_assert_eq!(row[a], best);
            }
        }
    }

    #[test]
    fn mdp_json_round_trips(n in 1usize..8, a in 1usize..4, seed in any::<u64>()) {
        let mdp = random_mdp(n, a, seed);
        let text = mdp.to_json();
        let back = TabularMdp::<f64>::from_json(&text).unwrap();
        prop_assert_eq!(&back, &mdp);
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(random_mdp(n, a, seed).to_json(), mdp.to_json());
    }

    #[test]
    fn aggregate_mean_lies_within_the_runs(
        series in (1usize..20).prop_flat_map(|len| prop::collection::vec(prop::collection::vec(-100.0f64..100.0, len), 1..10)),
    ) {
        let curves = aggregate_series(&series).unwrap();
        prop_assert_eq!(curves.len(), series[0].len());
        for t in 0..curves.len() {
            let column: Vec<f64> = series.iter().map(|s| s[t]).collect();
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(curves.mean[t] >= lo - 1e-9 && curves.mean[t] <= hi + 1e-9);
            prop_assert!(curves.stderr[t] >= 0.0);
            let (m, se) = mean_stderr(&column);
            prop_assert_eq!(m, curves.mean[t]);
            prop_assert_eq!(se, curves.stderr[t]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cumulative_episode_counts_never_decrease(
        seed in any::<u64>(),
        k in 1usize..6,
        alpha in 0.1f64..1.0,
        eta in 0.0f64..1.0,
        diff in any::<bool>(),
    ) {
        let algorithm = if diff { Algorithm::DiffQ } else { Algorithm::Q };
        let etas = if diff { vec![eta] } else { vec![] };
        let mut config = ExperimentConfig::new(EnvSpec::Diagnostic { name: Diagnostic::Corridor(k) }, algorithm, vec![alpha], etas, 0.9);
        config.num_steps = 2_000;
        config.num_runs = 1;
        let record = run_trial(&config, seed).unwrap();
        prop_assert_eq!(record.cumulative.len(), 2_000);
        prop_assert!(record.cumulative.windows(2).all(|w| w[0] <= w[1] && w[1] - w[0] <= 1));
        prop_assert_eq!(record.cumulative.last().copied(), Some(record.total_episodes));
    }

    #[test]
    fn continuing_unroll_equals_policy_matrices(stay in 0.0f64..=1.0) {
        let mdp = make_diagnostic::<f64>(&Diagnostic::TwoStateLoop).unwrap();
        let pi = PolicyTable::new(vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]]).unwrap();
        let a = unroll(&mdp, &pi).unwrap();
        let b = policy_matrices(&mdp, &pi).unwrap();
        prop_assert_eq!(a.p(), b.p());
        prop_assert_eq!(a.r(), b.r());
    }
}
