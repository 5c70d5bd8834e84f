//! Fixtures and independent oracles shared by the integration and acceptance suites.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhox::envsim::{make_env, ActionId, ChainEnv, Environment, Observation, StepResult};
use rhox::explore::{rho_explore_action, sample_perturbation, score_rollout, RhoConfig};
use rhox::nnet::MlpParams;
use rhox::replay::Transition;

/// Rewards for the chain fixture, indexed `[state][action]`.
pub const CHAIN_REWARDS: [[f64; 2]; 5] =
    [[0.5, 1.0], [0.0, 2.0], [-1.0, 3.0], [0.0, 4.0], [0.0, 0.0]];

/// A network that reproduces a Q table on one-hot chain states: two identity
/// hidden layers, then a readout whose weights are the table.
pub fn tabular(table: &[[f64; 2]; 5]) -> MlpParams {
    let mut p = MlpParams::zeros(&[5, 5, 5, 2]).unwrap();
    for k in 0..2 {
        for i in 0..5 {
            p.layers_mut()[k].weights[i * 5 + i] = 1.0;
        }
    }
    for (s, row) in table.iter().enumerate() {
        for (a, q) in row.iter().enumerate() {
            p.layers_mut()[2].weights[a * 5 + s] = *q;
        }
    }
    p
}

/// Walk the chain by hand: greedy on the table, lowest action on ties, and a
/// `max_a Q` bootstrap unless the walk reached the terminal state.
pub fn chain_score_by_hand(table: &[[f64; 2]; 5], start: usize, lambda: usize) -> f64 {
    let mut pos = start;
    let mut total = 0.0;
    for _ in 0..lambda {
        let a = if table[pos][1] > table[pos][0] { 1 } else { 0 };
        total += CHAIN_REWARDS[pos][a];
        pos = if a == 0 {
            pos.saturating_sub(1)
        } else {
            pos + 1
        };
        if pos == 4 {
            return total;
        }
    }
    total + table[pos][0].max(table[pos][1])
}

/// Compare rollout scores on the chain with the hand walk for random Q tables.
/// Returns `(cases checked, mismatches)`; a mismatch is any difference at all.
pub fn chain_oracle(lambda: usize, tables: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = ChainEnv::new(CHAIN_REWARDS);
    env.reset(0);
    let snap = env.snapshot();
    let (mut cases, mut mismatches) = (0, 0);
    for _ in 0..tables {
        let mut table = [[0.0; 2]; 5];
        for row in &mut table {
            for q in row.iter_mut() {
                // quarter steps make ties between the two actions common
                *q = rng.random_range(-8..=8) as f64 / 4.0;
            }
        }
        let q = tabular(&table);
        for start in 0..4 {
            let mut s_prime = ChainEnv::one_hot(start);
            for v in &mut s_prime {
                *v += rng.random_range(-0.02..0.02);
            }
            let got =
                score_rollout(&mut env, &snap, &Observation::new(s_prime), &q, lambda).unwrap();
            cases += 1;
            if got.score != chain_score_by_hand(&table, start, lambda) {
                mismatches += 1;
            }
        }
    }
    (cases, mismatches)
}

fn random_params(widths: &[usize], rng: &mut ChaCha8Rng) -> MlpParams {
    let mut p = MlpParams::zeros(widths).unwrap();
    for layer in p.layers_mut() {
        for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *w = rng.random_range(-1.0..1.0);
        }
    }
    p
}

/// `sum_b <forward(x_b), u_b>`, the scalar whose gradient `backward_batch` returns.
fn contraction(p: &MlpParams, inputs: &[f64], upstream: &[f64], batch: usize) -> f64 {
    let out = p.forward_batch(inputs, batch).unwrap();
    out.iter().zip(upstream).map(|(o, u)| o * u).sum()
}

/// Smallest |pre-activation| over the hidden units for any row of `inputs`.
fn hidden_margin(p: &MlpParams, inputs: &[f64], batch: usize) -> f64 {
    let layers = p.layers();
    let mut margin = f64::INFINITY;
    for row in inputs.chunks(inputs.len() / batch) {
        let mut x = row.to_vec();
        for layer in &layers[..layers.len() - 1] {
            let z: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    layer.biases[o]
                        + (0..layer.inputs)
                            .map(|i| layer.weight(o, i) * x[i])
                            .sum::<f64>()
                })
                .collect();
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            x = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    margin
}

/// Inputs whose hidden pre-activations all sit at least this far from the ReLU kink.
const KINK_MARGIN: f64 = 1e-3;

/// Relative error floor: gradients smaller than this are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Largest relative error between backprop and central differences over
/// `networks` random three-layer networks, each on a batch of three inputs
/// kept clear of the ReLU kinks.
pub fn gradient_check(networks: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let batch = 3;
    let mut worst: f64 = 0.0;
    for _ in 0..networks {
        let widths = [
            rng.random_range(1..=8),
            rng.random_range(1..=16),
            rng.random_range(1..=16),
            rng.random_range(1..=5),
        ];
        let mut p = random_params(&widths, &mut rng);
        let inputs = loop {
            let x: Vec<f64> = (0..batch * widths[0])
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            if hidden_margin(&p, &x, batch) >= KINK_MARGIN {
                break x;
            }
        };
        let upstream: Vec<f64> = (0..batch * widths[3])
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let grads = p.backward_batch(&inputs, &upstream, batch).unwrap();
        let analytic: Vec<f64> = grads.values().collect();

        let mut index = 0;
        for k in 0..p.layers().len() {
            let n_weights = p.layers()[k].weights.len();
            let n_biases = p.layers()[k].biases.len();
            for j in 0..n_weights + n_biases {
                let probe = |p: &mut MlpParams, delta: f64| {
                    let layer = &mut p.layers_mut()[k];
                    if j < n_weights {
                        layer.weights[j] += delta;
                    } else {
                        layer.biases[j - n_weights] += delta;
                    }
                };
                let original = p.clone();
                probe(&mut p, h);
                let plus = contraction(&p, &inputs, &upstream, batch);
                p = original.clone();
                probe(&mut p, -h);
                let minus = contraction(&p, &inputs, &upstream, batch);
                p = original;
                let numeric = (plus - minus) / (2.0 * h);
                let a = analytic[index];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
                worst = worst.max(err);
                index += 1;
            }
        }
        assert_eq!(index, analytic.len());
    }
    worst
}

/// `(violations of the strict bound, largest norm seen)` over l2 perturbations of a `dim`-vector.
pub fn perturbation_stats(rho: f64, samples: usize, dim: usize, seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RhoConfig {
        rho,
        ..RhoConfig::default()
    };
    let s: Vec<f64> = (0..dim).map(|i| 0.1 * i as f64 - 0.2).collect();
    let mut violations = 0;
    let mut max_norm: f64 = 0.0;
    for _ in 0..samples {
        let p = sample_perturbation(&s, &cfg, &mut rng);
        let norm = p
            .iter()
            .zip(&s)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if norm >= rho {
            violations += 1;
        }
        max_norm = max_norm.max(norm);
    }
    (violations, max_norm)
}

fn transition(a: usize, s: [f64; 2], s_next: [f64; 2]) -> Transition {
    Transition {
        s: Observation::new(s.to_vec()),
        a: ActionId(a),
        r: 0.0,
        s_next: Observation::new(s_next.to_vec()),
        done: false,
    }
}

/// Six transitions over three actions, with state changes of length 5, 1, 2, 0, 10 and 4.
pub fn kappa_fixture() -> Vec<Transition> {
    vec![
        transition(0, [0.0, 0.0], [3.0, 4.0]),
        transition(0, [1.0, 1.0], [1.0, 2.0]),
        transition(1, [0.0, 0.0], [0.0, 2.0]),
        transition(2, [2.0, 0.0], [2.0, 0.0]),
        transition(2, [0.0, 0.0], [6.0, 8.0]),
        transition(1, [1.0, 0.0], [1.0, 4.0]),
    ]
}

/// Hand-computed `(action, kappa, count, members, probability)` for [`kappa_fixture`]:
/// kappa = (5+1)/2, (2+4)/2, (0+10)/2, normalized by their sum 11.
pub fn kappa_expected() -> Vec<(usize, f64, usize, Vec<usize>, f64)> {
    vec![
        (0, 3.0, 2, vec![0, 1], 3.0 / 11.0),
        (1, 3.0, 2, vec![2, 5], 3.0 / 11.0),
        (2, 5.0, 2, vec![3, 4], 5.0 / 11.0),
    ]
}

fn same_step(a: &StepResult, b: &StepResult) -> bool {
    a.reward.to_bits() == b.reward.to_bits()
        && a.done == b.done
        && a.truncated == b.truncated
        && a.observation.len() == b.observation.len()
        && a.observation
            .iter()
            .zip(b.observation.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Run two copies of `env_id` through the same actions, calling rho-explore on
/// one of them mid-episode. Returns the number of trials whose later
/// trajectories differ in any bit.
pub fn side_effect_trials(env_id: &str, trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diverged = 0;
    for _ in 0..trials {
        let mut live = make_env(env_id).unwrap();
        let mut twin = make_env(env_id).unwrap();
        let episode_seed: u64 = rng.random();
        let mut s = live.reset(episode_seed);
        twin.reset(episode_seed);
        let actions = live.action_count();
        let widths = [live.obs_dim(), 16, 16, actions];
        let q = random_params(&widths, &mut rng);
        let cfg = RhoConfig {
            rho: rng.random_range(0.01..0.2),
            n: rng.random_range(1..8),
            lambda: rng.random_range(1..6),
            ..RhoConfig::default()
        };

        let warm = rng.random_range(0..40);
        let mut ok = true;
        for _ in 0..warm {
            let a = ActionId(rng.random_range(0..actions));
            let (x, y) = (live.step(a).unwrap(), twin.step(a).unwrap());
            ok &= same_step(&x, &y);
            if x.done {
                break;
            }
            s = x.observation;
        }
        if !live.is_done() {
            let mut explore_rng = ChaCha8Rng::seed_from_u64(rng.random());
            rho_explore_action(live.as_mut(), &s, &q, &cfg, &mut explore_rng).unwrap();
            ok &= live.snapshot() == twin.snapshot();
            for _ in 0..60 {
                let a = ActionId(rng.random_range(0..actions));
                let (x, y) = (live.step(a).unwrap(), twin.step(a).unwrap());
                ok &= same_step(&x, &y);
                if x.done {
                    break;
                }
            }
        }
        if !ok {
            diverged += 1;
        }
    }
    diverged
}

pub fn step_in_bounds(env: &dyn Environment, obs: &[f64]) -> bool {
    obs.iter()
        .zip(env.bounds())
        .all(|(&v, &(lo, hi))| v.is_finite() && v >= lo && v <= hi)
}
