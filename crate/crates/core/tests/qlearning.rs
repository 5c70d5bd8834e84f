use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhox::envsim::{ActionId, Observation};
use rhox::nnet::MlpParams;
use rhox::qlearn::{AgentConfig, AgentState, Variant};
use rhox::replay::Transition;

fn random_batch(rng: &mut ChaCha8Rng, dim: usize, actions: usize, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            s: Observation::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()),
            a: ActionId(rng.random_range(0..actions)),
            r: rng.random_range(-2.0..2.0),
            s_next: Observation::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()),
            done: rng.random_bool(0.2),
        })
        .collect()
}

fn agent(online: MlpParams, target: MlpParams, variant: Variant) -> AgentState {
    let cfg = AgentConfig {
        variant,
        ..AgentConfig::default()
    };
    AgentState::with_networks(online, target, &cfg).unwrap()
}

proptest! {
    /// With identical online and target nets, the double estimator picks the
    /// same action the max does, so both targets coincide.
    #[test]
    fn ddqn_equals_dqn_when_networks_agree(seed in any::<u64>(), n in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = MlpParams::he_uniform(&[3, 8, 8, 4], &mut rng).unwrap();
        let batch = random_batch(&mut rng, 3, 4, n);
        let ddqn = agent(net.clone(), net.clone(), Variant::Ddqn).td_targets(&batch).unwrap();
        let dqn = agent(net.clone(), net, Variant::Dqn).td_targets(&batch).unwrap();
        prop_assert_eq!(ddqn, dqn);
    }

    /// The double estimator never bootstraps above the plain max.
    #[test]
    fn ddqn_target_never_exceeds_dqn(seed in any::<u64>(), n in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = MlpParams::he_uniform(&[3, 8, 8, 4], &mut rng).unwrap();
        let target = MlpParams::he_uniform(&[3, 8, 8, 4], &mut rng).unwrap();
        let batch = random_batch(&mut rng, 3, 4, n);
        let ddqn = agent(online.clone(), target.clone(), Variant::Ddqn).td_targets(&batch).unwrap();
        let dqn = agent(online, target, Variant::Dqn).td_targets(&batch).unwrap();
        for (d, q) in ddqn.iter().zip(&dqn) {
            prop_assert!(d <= q);
        }
    }

    /// Actions absent from the batch get no gradient on their output row.
    #[test]
    fn only_taken_actions_receive_gradient(seed in any::<u64>(), n in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = MlpParams::he_uniform(&[3, 8, 8, 4], &mut rng).unwrap();
        let mut batch = random_batch(&mut rng, 3, 4, n);
        for t in &mut batch {
            t.a = ActionId(t.a.0 % 2);
        }
        let a = agent(net.clone(), net, Variant::Ddqn);
        let targets: Vec<f64> = batch.iter().map(|t| t.r + 5.0).collect();
        let (_, grads) = a.loss_and_gradient(&batch, &targets).unwrap();
        let last = &grads.layers()[2];
        for action in 2..4 {
            prop_assert!(last.weights[action * 8..(action + 1) * 8].iter().all(|&g| g == 0.0));
            prop_assert_eq!(last.biases[action], 0.0);
        }
    }

    #[test]
    fn targets_are_finite_and_terminal_exact(seed in any::<u64>(), n in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = MlpParams::he_uniform(&[3, 8, 8, 4], &mut rng).unwrap();
        let target = MlpParams::he_uniform(&[3, 8, 8, 4], &mut rng).unwrap();
        let batch = random_batch(&mut rng, 3, 4, n);
        let y = agent(online, target, Variant::Ddqn).td_targets(&batch).unwrap();
        for (t, y) in batch.iter().zip(&y) {
            prop_assert!(y.is_finite());
            if t.done {
                prop_assert_eq!(*y, t.r);
            }
        }
    }
}

#[test]
fn repeated_steps_fit_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut batch = random_batch(&mut rng, 3, 2, 32);
    for t in &mut batch {
        t.done = true;
    }
    let cfg = AgentConfig::default();
    let mut a = AgentState::new(3, 2, &cfg, &mut rng).unwrap();
    let first = a.train_step(&batch).unwrap();
    let mut last = first;
    for _ in 0..2000 {
        last = a.train_step(&batch).unwrap();
    }
    assert!(last < 0.05 * first, "{first} -> {last}");
}
