//! Single-seed training runs and their CSV logs.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ExperimentConfig, HarnessError};
use crate::envsim::{make_env, ActionId, Environment};
use crate::explore::{Branch, Explorer};
use crate::qlearn::{AgentState, QFunction};
use crate::replay::{ReplayBuffer, Transition};

pub const CSV_HEADER: [&str; 10] = [
    "step",
    "train_return_mean",
    "eval_return_mean",
    "eval_return_std",
    "greedy_count",
    "random_count",
    "rho_count",
    "change_count",
    "sim_queries",
    "wall_ms",
];

/// Completed training episodes averaged into `train_return_mean`.
pub const TRAIN_RETURN_WINDOW: usize = 10;

/// One evaluation point. Counts cover the steps since the previous row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub train_return_mean: f64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub greedy_count: u64,
    pub random_count: u64,
    pub rho_count: u64,
    pub change_count: u64,
    pub sim_queries: u64,
    pub wall_ms: u64,
}

impl LogRow {
    fn record(&self) -> [String; 10] {
        [
            self.step.to_string(),
            self.train_return_mean.to_string(),
            self.eval_return_mean.to_string(),
            self.eval_return_std.to_string(),
            self.greedy_count.to_string(),
            self.random_count.to_string(),
            self.rho_count.to_string(),
            self.change_count.to_string(),
            self.sim_queries.to_string(),
            self.wall_ms.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BranchCounts {
    pub greedy: u64,
    pub random: u64,
    pub rho: u64,
    pub change: u64,
    pub sim_queries: u64,
}

impl BranchCounts {
    fn add(&mut self, branch: Branch, sim_queries: usize) {
        match branch {
            Branch::Greedy => self.greedy += 1,
            Branch::Random => self.random += 1,
            Branch::Rho => self.rho += 1,
            Branch::ChangeBased => self.change += 1,
        }
        self.sim_queries += sim_queries as u64;
    }

    pub fn total(&self) -> u64 {
        self.greedy + self.random + self.rho + self.change
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub cell: String,
    pub seed: u64,
    pub rows: Vec<LogRow>,
    /// Real environment steps taken during training, evaluation excluded.
    pub real_steps: u64,
    /// Totals over the whole run, including steps after the last row.
    pub totals: BranchCounts,
}

impl RunLog {
    pub fn file_name(&self) -> String {
        csv_file_name(&self.cell, self.seed)
    }

    pub fn final_eval(&self) -> Option<f64> {
        self.rows.last().map(|r| r.eval_return_mean)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        write_rows(out, &self.rows)
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        self.write_csv(std::fs::File::create(&path)?)?;
        Ok(path)
    }
}

pub fn csv_file_name(cell: &str, seed: u64) -> String {
    format!("{cell}_{seed}.csv")
}

pub fn write_rows<W: Write>(out: W, rows: &[LogRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a log written by [`write_rows`]; the header must match exactly.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<LogRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::BadLog(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let f = |i: usize| -> Result<f64, HarnessError> {
            record[i].parse().map_err(|_| {
                HarnessError::BadLog(format!(
                    "column {} is not a number: `{}`",
                    CSV_HEADER[i], &record[i]
                ))
            })
        };
        let u = |i: usize| -> Result<u64, HarnessError> {
            record[i].parse().map_err(|_| {
                HarnessError::BadLog(format!(
                    "column {} is not an integer: `{}`",
                    CSV_HEADER[i], &record[i]
                ))
            })
        };
        rows.push(LogRow {
            step: u(0)?,
            train_return_mean: f(1)?,
            eval_return_mean: f(2)?,
            eval_return_std: f(3)?,
            greedy_count: u(4)?,
            random_count: u(5)?,
            rho_count: u(6)?,
            change_count: u(7)?,
            sim_queries: u(8)?,
            wall_ms: u(9)?,
        });
    }
    Ok(rows)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    // Welford's update keeps identical inputs at exactly zero spread.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, (m2 / values.len() as f64).sqrt())
}

/// Greedy episode returns of `q` on `env`, episode `i` reset with seed `first_seed + i`.
pub fn evaluate<Q: QFunction + ?Sized>(
    env: &mut dyn Environment,
    q: &Q,
    first_seed: u64,
    episodes: usize,
) -> Result<Vec<f64>, HarnessError> {
    let mut returns = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut s = env.reset(first_seed + i as u64);
        let mut total = 0.0;
        loop {
            let a = q.greedy_action(&s)?;
            let r = env.step(a)?;
            total += r.reward;
            if r.done {
                break;
            }
            s = r.observation;
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Train one agent for `cfg.total_steps` real steps under `seed`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunLog, HarnessError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = make_env(cfg.env.id())?;
    let mut eval_env = make_env(cfg.env.id())?;
    let h = &cfg.hyper;
    let mut agent = AgentState::new(env.obs_dim(), env.action_count(), &h.agent, &mut rng)?;
    let mut buffer = ReplayBuffer::new(h.buffer_capacity);
    let mut explorer = Explorer::new(cfg.strategy.clone(), cfg.schedule)?;

    let mut log = RunLog {
        cell: cfg.cell_hash(),
        seed,
        rows: Vec::new(),
        real_steps: 0,
        totals: BranchCounts::default(),
    };
    let mut interval = BranchCounts::default();
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(TRAIN_RETURN_WINDOW);
    let mut episode_return = 0.0;
    let mut eval_index: u64 = 0;
    let mut s = env.reset(rng.random());

    for step in 0..cfg.total_steps {
        let (action, branch, sim_queries) = if step < h.warmup {
            (
                ActionId(rng.random_range(0..env.action_count())),
                Branch::Random,
                0,
            )
        } else {
            let d = explorer.select_action(step, &s, env.as_mut(), &agent, &buffer, &mut rng)?;
            (d.action, d.branch, d.sim_queries)
        };
        interval.add(branch, sim_queries);
        log.totals.add(branch, sim_queries);

        let result = env.step(action)?;
        log.real_steps += 1;
        episode_return += result.reward;
        buffer.push(Transition {
            s: s.clone(),
            a: action,
            r: result.reward,
            s_next: result.observation.clone(),
            done: result.terminated(),
        })?;
        if result.done {
            if recent.len() == TRAIN_RETURN_WINDOW {
                recent.pop_front();
            }
            recent.push_back(episode_return);
            episode_return = 0.0;
            s = env.reset(rng.random());
        } else {
            s = result.observation;
        }

        let done_steps = step + 1;
        if done_steps >= h.warmup && done_steps % h.train_every == 0 && buffer.len() >= h.batch_size
        {
            for _ in 0..h.gradient_steps {
                let batch = buffer.sample_uniform(h.batch_size, &mut rng)?;
                agent.train_step(&batch)?;
            }
        }

        if done_steps % cfg.eval_interval == 0 {
            let first = seed * 1_000_000 + eval_index;
            let returns = evaluate(eval_env.as_mut(), &agent, first, cfg.eval_episodes)?;
            eval_index += cfg.eval_episodes as u64;
            let (eval_mean, eval_std) = mean_std(&returns);
            // Before the first episode ends, report the running return.
            let train_mean = if recent.is_empty() {
                episode_return
            } else {
                recent.iter().sum::<f64>() / recent.len() as f64
            };
            log.rows.push(LogRow {
                step: done_steps,
                train_return_mean: train_mean,
                eval_return_mean: eval_mean,
                eval_return_std: eval_std,
                greedy_count: interval.greedy,
                random_count: interval.random,
                rho_count: interval.rho,
                change_count: interval.change,
                sim_queries: interval.sim_queries,
                wall_ms: if cfg.log_wall_time {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            });
            interval = BranchCounts::default();
        }
    }
    Ok(log)
}

/// Run every seed of `cfg` in parallel; logs come back in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunLog>, HarnessError> {
    cfg.seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed))
        .collect()
}
