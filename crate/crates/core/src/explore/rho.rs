//! Perturb, roll out, pick.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ExploreError, PerturbNorm, RhoConfig, RhoHeuristic};
use crate::envsim::{ActionId, EnvSnapshot, Environment, Observation};
use crate::qlearn::QFunction;

/// Draw `s + delta` with `delta` uniform in the open ball `||delta|| < rho`.
///
/// The result is not clipped; environments clip when the state is injected.
pub fn sample_perturbation<R: Rng + ?Sized>(
    s: &[f64],
    cfg: &RhoConfig,
    rng: &mut R,
) -> Observation {
    let d = s.len();
    let rho = cfg.rho;
    let delta: Vec<f64> = match cfg.norm {
        PerturbNorm::L2 => loop {
            let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 {
                continue;
            }
            let radius = rho * rng.random::<f64>().powf(1.0 / d as f64);
            dir.iter_mut().for_each(|x| *x *= radius / len);
            // rounding can land exactly on the sphere
            if dir.iter().map(|x| x * x).sum::<f64>().sqrt() < rho {
                break dir;
            }
        },
        PerturbNorm::Linf => (0..d)
            .map(|_| loop {
                let x = rho * (2.0 * rng.random::<f64>() - 1.0);
                if x.abs() < rho {
                    break x;
                }
            })
            .collect(),
    };
    Observation::new(s.iter().zip(delta).map(|(a, b)| a + b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutScore {
    /// Undiscounted reward sum plus the max-Q bootstrap (omitted after termination).
    pub score: f64,
    /// The injected start state, i.e. the perturbed state after clipping.
    pub start: Observation,
    /// Simulator steps consumed.
    pub sim_steps: usize,
}

/// Score a perturbed state with a `lambda`-step greedy mini-rollout.
///
/// Restores `snap`, injects `s_prime`, follows the greedy policy for up to
/// `lambda` steps and adds `max_a Q` at the state reached. A rollout that
/// terminates contributes no bootstrap; one cut off by the step cap still
/// bootstraps from where it stopped. The environment is left restored to `snap`.
pub fn score_rollout<E, Q>(
    env: &mut E,
    snap: &EnvSnapshot,
    s_prime: &Observation,
    q: &Q,
    lambda: usize,
) -> Result<RolloutScore, ExploreError>
where
    E: Environment + ?Sized,
    Q: QFunction + ?Sized,
{
    env.restore(snap)?;
    env.inject_state(s_prime)?;
    let start = env.observation();

    let mut obs = start.clone();
    let mut total = 0.0;
    let mut sim_steps = 0;
    let mut terminal = false;
    for _ in 0..lambda {
        let action = q.greedy_action(&obs)?;
        let step = env.step(action)?;
        sim_steps += 1;
        total += step.reward;
        obs = step.observation;
        if step.done {
            terminal = !step.truncated;
            break;
        }
    }
    if !terminal {
        total += q.max_q(&obs)?;
    }
    env.restore(snap)?;
    Ok(RolloutScore {
        score: total,
        start,
        sim_steps,
    })
}

/// Choose an action from `(score, greedy action)` pairs.
///
/// `Max` takes the action of the first highest-scoring candidate. `Mode` ranks
/// candidates by score (stable on ties), keeps the top `ceil(k% * n)` and returns
/// their most common action, lowest index on ties.
pub fn pick_candidate(
    candidates: &[(f64, ActionId)],
    heuristic: RhoHeuristic,
    top_k_percent: f64,
) -> ActionId {
    assert!(!candidates.is_empty(), "no candidates to pick from");
    match heuristic {
        RhoHeuristic::Max => {
            let mut best = 0;
            for (i, c) in candidates.iter().enumerate().skip(1) {
                if c.0 > candidates[best].0 {
                    best = i;
                }
            }
            candidates[best].1
        }
        RhoHeuristic::Mode => {
            let n = candidates.len();
            let keep = ((top_k_percent * n as f64 / 100.0).ceil() as usize).clamp(1, n);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| candidates[b].0.total_cmp(&candidates[a].0));

            let mut votes: Vec<(ActionId, usize)> = Vec::new();
            for &i in &order[..keep] {
                let action = candidates[i].1;
                match votes.iter_mut().find(|(a, _)| *a == action) {
                    Some((_, count)) => *count += 1,
                    None => votes.push((action, 1)),
                }
            }
            votes
                .into_iter()
                .max_by(|(a1, c1), (a2, c2)| c1.cmp(c2).then(a2.cmp(a1)))
                .map(|(a, _)| a)
                .unwrap()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoOutcome {
    pub action: ActionId,
    /// `(score, greedy action at the perturbed state)` per sample.
    pub candidates: Vec<(f64, ActionId)>,
    pub sim_queries: usize,
}

/// Pick an exploratory action by surveying `cfg.n` perturbed neighbors of `s`.
///
/// `env` must currently be in state `s`; it is restored to that exact state
/// before returning, so the live episode is unaffected.
pub fn rho_explore_action<E, Q, R>(
    env: &mut E,
    s: &Observation,
    q: &Q,
    cfg: &RhoConfig,
    rng: &mut R,
) -> Result<RhoOutcome, ExploreError>
where
    E: Environment + ?Sized,
    Q: QFunction + ?Sized,
    R: Rng + ?Sized,
{
    let snap = env.snapshot();
    let mut candidates = Vec::with_capacity(cfg.n);
    let mut sim_queries = 0;
    for _ in 0..cfg.n.max(1) {
        let s_prime = sample_perturbation(s, cfg, rng);
        let scored = score_rollout(env, &snap, &s_prime, q, cfg.lambda)?;
        sim_queries += scored.sim_steps;
        candidates.push((scored.score, q.greedy_action(&scored.start)?));
    }
    env.restore(&snap)?;
    Ok(RhoOutcome {
        action: pick_candidate(&candidates, cfg.heuristic, cfg.top_k_percent),
        candidates,
        sim_queries,
    })
}
