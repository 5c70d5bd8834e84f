//! Change-based exploration: favour actions that historically move the state a lot.

use std::borrow::Borrow;

use rand::Rng;

use super::{ChangeBasedConfig, ChangeMode, ExploreError};
use crate::envsim::{ActionId, Observation};
use crate::qlearn::QFunction;
use crate::replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEntry {
    pub action: ActionId,
    /// Mean l2 norm of `s_next - s` over this action's tuples.
    pub kappa: f64,
    pub count: usize,
    /// Indices into the tuple list the table was built from.
    pub members: Vec<usize>,
    pub probability: f64,
}

/// Per-action kappa statistics, ordered by action index.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaTable {
    entries: Vec<KappaEntry>,
}

impl KappaTable {
    pub fn entries(&self) -> &[KappaEntry] {
        &self.entries
    }

    pub fn get(&self, action: ActionId) -> Option<&KappaEntry> {
        self.entries.iter().find(|e| e.action == action)
    }

    /// Largest kappa, lowest action index on ties.
    pub fn select_max(&self) -> &KappaEntry {
        let mut best = &self.entries[0];
        for e in &self.entries[1..] {
            if e.kappa > best.kappa {
                best = e;
            }
        }
        best
    }

    /// Draw an entry with probability proportional to its kappa.
    pub fn sample_weighted<R: Rng + ?Sized>(&self, rng: &mut R) -> &KappaEntry {
        let u = rng.random::<f64>();
        let mut cumulative = 0.0;
        for e in &self.entries {
            cumulative += e.probability;
            if u < cumulative {
                return e;
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        self.entries
            .iter()
            .rev()
            .find(|e| e.probability > 0.0)
            .unwrap_or(&self.entries[0])
    }
}

/// Group tuples by action and compute each action's mean state change.
///
/// Probabilities are `kappa_a / sum kappa`, or uniform over the present actions
/// when every kappa is zero.
pub fn kappa_table<T: Borrow<Transition>>(tuples: &[T]) -> Result<KappaTable, ExploreError> {
    if tuples.is_empty() {
        return Err(ExploreError::EmptyInput);
    }
    let mut entries: Vec<KappaEntry> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    for (i, t) in tuples.iter().enumerate() {
        let t = t.borrow();
        let change = t.s_next.l2_distance(&t.s);
        let slot = match entries.binary_search_by_key(&t.a, |e| e.action) {
            Ok(slot) => slot,
            Err(slot) => {
                entries.insert(
                    slot,
                    KappaEntry {
                        action: t.a,
                        kappa: 0.0,
                        count: 0,
                        members: Vec::new(),
                        probability: 0.0,
                    },
                );
                sums.insert(slot, 0.0);
                slot
            }
        };
        entries[slot].count += 1;
        entries[slot].members.push(i);
        sums[slot] += change;
    }
    for (e, sum) in entries.iter_mut().zip(&sums) {
        e.kappa = sum / e.count as f64;
    }
    let total: f64 = entries.iter().map(|e| e.kappa).sum();
    let groups = entries.len() as f64;
    for e in &mut entries {
        e.probability = if total > 0.0 {
            e.kappa / total
        } else {
            1.0 / groups
        };
    }
    Ok(KappaTable { entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeBasedChoice {
    pub action: ActionId,
    /// The action group chosen from the kappa table.
    pub group: ActionId,
    /// The stored state the greedy policy was queried at.
    pub state: Observation,
}

/// Draw tuples, pick an action group by kappa, then act greedily at one of its states.
pub fn change_based_action<Q, R>(
    buffer: &ReplayBuffer,
    q: &Q,
    cfg: &ChangeBasedConfig,
    rng: &mut R,
) -> Result<ChangeBasedChoice, ExploreError>
where
    Q: QFunction + ?Sized,
    R: Rng + ?Sized,
{
    let tuples = if cfg.temporal {
        buffer.latest(cfg.n)?
    } else {
        buffer.sample_uniform(cfg.n, rng)?
    };
    let table = kappa_table(&tuples)?;
    let entry = match cfg.mode {
        ChangeMode::Weighted => table.sample_weighted(rng),
        ChangeMode::Max => table.select_max(),
    };
    let member = entry.members[rng.random_range(0..entry.members.len())];
    let state = tuples[member].s.clone();
    Ok(ChangeBasedChoice {
        action: q.greedy_action(&state)?,
        group: entry.action,
        state,
    })
}
