//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # LanderLite, rho-explore
//! env = lander-lite
//! strategy = rho
//! seeds = 0, 1, 2
//! rho.rho = 0.05
//! rho.n = 10
//! ```
//!
//! Unset keys take their defaults. `rho.*` keys are only accepted with
//! `strategy = rho` and `cb.*` keys only with `strategy = change_based`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::envsim::EnvKind;
use crate::explore::{ChangeBasedConfig, EpsilonSchedule, RhoConfig, Strategy};
use crate::nnet::AdamConfig;
use crate::qlearn::{AgentConfig, Variant};

const TOP_LEVEL: &[&str] = &[
    "env",
    "strategy",
    "variant",
    "total_steps",
    "eval_interval",
    "eval_episodes",
    "seeds",
    "out_dir",
    "log.wall_time",
];
const EPS_KEYS: &[&str] = &["start", "floor", "decay_steps"];
const AGENT_KEYS: &[&str] = &[
    "gamma",
    "lr",
    "hidden",
    "batch_size",
    "buffer_capacity",
    "warmup",
    "target_sync",
    "grad_clip",
    "huber_delta",
    "train_every",
    "gradient_steps",
];
const RHO_KEYS: &[&str] = &[
    "rho",
    "norm",
    "n",
    "lambda",
    "heuristic",
    "top_k",
    "period",
    "phi",
    "gate",
];
const CB_KEYS: &[&str] = &["n", "mode", "temporal", "switch_step"];

/// Keys that do not change what a run computes, so they stay out of the cell hash.
const UNHASHED: &[&str] = &["seeds", "out_dir", "log.wall_time"];

/// Whether `key` names a config field.
pub fn is_known_key(key: &str) -> bool {
    if TOP_LEVEL.contains(&key) {
        return true;
    }
    let Some((block, field)) = key.split_once('.') else {
        return false;
    };
    match block {
        "eps" => EPS_KEYS.contains(&field),
        "agent" => AGENT_KEYS.contains(&field),
        "rho" => RHO_KEYS.contains(&field),
        "cb" => CB_KEYS.contains(&field),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentHyper {
    pub agent: AgentConfig,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Uniform-random steps before the first gradient update.
    pub warmup: u64,
    pub train_every: u64,
    /// Gradient steps taken at each training tick.
    pub gradient_steps: u64,
}

impl Default for AgentHyper {
    fn default() -> Self {
        AgentHyper {
            agent: AgentConfig::default(),
            batch_size: 64,
            buffer_capacity: crate::replay::ReplayBuffer::DEFAULT_CAPACITY,
            warmup: 1000,
            train_every: 1,
            gradient_steps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub strategy: Strategy,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub schedule: EpsilonSchedule,
    pub hyper: AgentHyper,
    pub out_dir: PathBuf,
    /// Record real wall time in the `wall_ms` column; off by default so logs are byte-reproducible.
    pub log_wall_time: bool,
}

/// Step budget used when `total_steps` is not given.
pub fn default_total_steps(env: EnvKind) -> u64 {
    match env {
        EnvKind::Lander => 150_000,
        _ => 60_000,
    }
}

/// Parsed but not yet validated `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigEntries {
    entries: BTreeMap<String, String>,
}

impl ConfigEntries {
    /// Parse a config file body. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut out = ConfigEntries::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::ConfigInvalid {
                    field: format!("line {}", lineno + 1),
                    message: format!("expected `key = value`, got `{line}`"),
                })?;
            out.set(key.trim(), value.trim())?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(&path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Insert or replace one entry; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        if !is_known_key(key) {
            return Err(HarnessError::UnknownField(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `key=value` override as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), HarnessError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| HarnessError::ConfigInvalid {
                field: pair.to_string(),
                message: "override must look like key=value".into(),
            })?;
        self.set(key.trim(), value.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn build(&self) -> Result<ExperimentConfig, HarnessError> {
        ExperimentConfig::from_entries(self)
    }
}

pub(super) fn invalid(field: &str, message: impl Display) -> HarnessError {
    HarnessError::ConfigInvalid {
        field: field.to_string(),
        message: message.to_string(),
    }
}

struct Reader<'a> {
    entries: &'a ConfigEntries,
}

impl Reader<'_> {
    fn get<T>(&self, key: &str, default: T) -> Result<T, HarnessError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| invalid(key, format!("cannot parse `{raw}`: {e}"))),
        }
    }

    fn list<T>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, HarnessError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse()
                        .map_err(|e| invalid(key, format!("cannot parse `{item}`: {e}")))
                })
                .collect(),
        }
    }

    fn block_keys(&self, block: &str) -> Vec<&str> {
        self.entries
            .iter()
            .map(|(k, _)| k)
            .filter(|k| k.split_once('.').is_some_and(|(b, _)| b == block))
            .collect()
    }
}

fn parse_variant(raw: &str) -> Result<Variant, String> {
    match raw {
        "dqn" => Ok(Variant::Dqn),
        "ddqn" => Ok(Variant::Ddqn),
        other => Err(format!("expected one of [dqn, ddqn], got `{other}`")),
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Dqn => "dqn",
        Variant::Ddqn => "ddqn",
    }
}

impl ExperimentConfig {
    pub fn from_entries(entries: &ConfigEntries) -> Result<Self, HarnessError> {
        let r = Reader { entries };

        let env: EnvKind = match entries.get("env") {
            None => {
                return Err(invalid(
                    "env",
                    "missing; expected one of cartpole-lite, mountaincar-lite, lander-lite",
                ))
            }
            Some(raw) => raw.parse().map_err(|e| invalid("env", e))?,
        };

        let strategy_name = entries.get("strategy").unwrap_or("baseline");
        let rho_keys = r.block_keys("rho");
        let cb_keys = r.block_keys("cb");
        if strategy_name != "rho" {
            if let Some(k) = rho_keys.first() {
                return Err(invalid(
                    k,
                    format!("only valid with strategy = rho, not {strategy_name}"),
                ));
            }
        }
        if strategy_name != "change_based" {
            if let Some(k) = cb_keys.first() {
                return Err(invalid(
                    k,
                    format!("only valid with strategy = change_based, not {strategy_name}"),
                ));
            }
        }

        let strategy = match strategy_name {
            "baseline" => Strategy::Baseline,
            "rho" => {
                let d = RhoConfig::default();
                let cfg = RhoConfig {
                    rho: r.get("rho.rho", d.rho)?,
                    norm: r.get("rho.norm", d.norm)?,
                    n: r.get("rho.n", d.n)?,
                    lambda: r.get("rho.lambda", d.lambda)?,
                    heuristic: r.get("rho.heuristic", d.heuristic)?,
                    top_k_percent: r.get("rho.top_k", d.top_k_percent)?,
                    period: r.get("rho.period", d.period)?,
                    phi: r.get("rho.phi", d.phi)?,
                    gate: r.get("rho.gate", d.gate)?,
                };
                cfg.validate().map_err(|e| invalid("rho", e))?;
                Strategy::Rho(cfg)
            }
            "change_based" => {
                let d = ChangeBasedConfig::default();
                let cfg = ChangeBasedConfig {
                    n: r.get("cb.n", d.n)?,
                    mode: r.get("cb.mode", d.mode)?,
                    temporal: r.get("cb.temporal", d.temporal)?,
                    switch_step: r.get("cb.switch_step", d.switch_step)?,
                };
                cfg.validate().map_err(|e| invalid("cb", e))?;
                Strategy::ChangeBased(cfg)
            }
            other => {
                return Err(invalid(
                    "strategy",
                    format!("expected one of [baseline, rho, change_based], got `{other}`"),
                ))
            }
        };

        let d = EpsilonSchedule::default();
        let schedule = EpsilonSchedule {
            eps_start: r.get("eps.start", d.eps_start)?,
            eps_floor: r.get("eps.floor", d.eps_floor)?,
            decay_steps: r.get("eps.decay_steps", d.decay_steps)?,
        };
        if !(schedule.is_valid() && schedule.eps_start <= 1.0) {
            return Err(invalid("eps", "need 0 <= eps.floor <= eps.start <= 1"));
        }

        let dh = AgentHyper::default();
        let grad_clip = match entries.get("agent.grad_clip") {
            None => dh.agent.grad_clip,
            Some("none") => None,
            Some(_) => Some(r.get("agent.grad_clip", 0.0)?),
        };
        let agent = AgentConfig {
            variant: match entries.get("variant") {
                None => dh.agent.variant,
                Some(raw) => parse_variant(raw).map_err(|e| invalid("variant", e))?,
            },
            gamma: r.get("agent.gamma", dh.agent.gamma)?,
            adam: AdamConfig {
                lr: r.get("agent.lr", dh.agent.adam.lr)?,
                ..dh.agent.adam
            },
            hidden: r.list("agent.hidden", dh.agent.hidden.clone())?,
            target_sync: r.get("agent.target_sync", dh.agent.target_sync)?,
            grad_clip,
            huber_delta: r.get("agent.huber_delta", dh.agent.huber_delta)?,
        };
        let hyper = AgentHyper {
            agent,
            batch_size: r.get("agent.batch_size", dh.batch_size)?,
            buffer_capacity: r.get("agent.buffer_capacity", dh.buffer_capacity)?,
            warmup: r.get("agent.warmup", dh.warmup)?,
            train_every: r.get("agent.train_every", dh.train_every)?,
            gradient_steps: r.get("agent.gradient_steps", dh.gradient_steps)?,
        };
        check_agent(&hyper)?;

        let cfg = ExperimentConfig {
            env,
            strategy,
            total_steps: r.get("total_steps", default_total_steps(env))?,
            eval_interval: r.get("eval_interval", 1000)?,
            eval_episodes: r.get("eval_episodes", 10)?,
            seeds: r.list("seeds", vec![0, 1, 2])?,
            schedule,
            hyper,
            out_dir: PathBuf::from(entries.get("out_dir").unwrap_or("runs")),
            log_wall_time: r.get("log.wall_time", false)?,
        };
        if cfg.eval_interval == 0 {
            return Err(invalid("eval_interval", "must be at least 1"));
        }
        if cfg.eval_episodes == 0 {
            return Err(invalid("eval_episodes", "must be at least 1"));
        }
        if cfg.seeds.is_empty() {
            return Err(invalid("seeds", "need at least one seed"));
        }
        Ok(cfg)
    }

    /// Every field in canonical `key = value` form, defaults included, sorted by key.
    pub fn canonical_entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("env", self.env.id().to_string());
        put("strategy", self.strategy.name().to_string());
        put(
            "variant",
            variant_name(self.hyper.agent.variant).to_string(),
        );
        put("total_steps", self.total_steps.to_string());
        put("eval_interval", self.eval_interval.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("seeds", join(&self.seeds));
        put("out_dir", self.out_dir.display().to_string());
        put("log.wall_time", self.log_wall_time.to_string());
        put("eps.start", self.schedule.eps_start.to_string());
        put("eps.floor", self.schedule.eps_floor.to_string());
        put("eps.decay_steps", self.schedule.decay_steps.to_string());
        let h = &self.hyper;
        put("agent.gamma", h.agent.gamma.to_string());
        put("agent.lr", h.agent.adam.lr.to_string());
        put("agent.hidden", join(&h.agent.hidden));
        put("agent.batch_size", h.batch_size.to_string());
        put("agent.buffer_capacity", h.buffer_capacity.to_string());
        put("agent.warmup", h.warmup.to_string());
        put("agent.target_sync", h.agent.target_sync.to_string());
        put(
            "agent.grad_clip",
            h.agent
                .grad_clip
                .map_or_else(|| "none".to_string(), |c| c.to_string()),
        );
        put("agent.huber_delta", h.agent.huber_delta.to_string());
        put("agent.train_every", h.train_every.to_string());
        put("agent.gradient_steps", h.gradient_steps.to_string());
        match &self.strategy {
            Strategy::Baseline => {}
            Strategy::Rho(c) => {
                put("rho.rho", c.rho.to_string());
                put("rho.norm", c.norm.to_string());
                put("rho.n", c.n.to_string());
                put("rho.lambda", c.lambda.to_string());
                put("rho.heuristic", c.heuristic.to_string());
                put("rho.top_k", c.top_k_percent.to_string());
                put("rho.period", c.period.to_string());
                put("rho.phi", c.phi.to_string());
                put("rho.gate", c.gate.to_string());
            }
            Strategy::ChangeBased(c) => {
                put("cb.n", c.n.to_string());
                put("cb.mode", c.mode.to_string());
                put("cb.temporal", c.temporal.to_string());
                put("cb.switch_step", c.switch_step.to_string());
            }
        }
        out.sort();
        out
    }

    /// Canonical config file text; parsing it back yields an equal config.
    pub fn to_config_text(&self) -> String {
        self.canonical_entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Identifier of the configuration cell: a hash over every field except
    /// seeds and output settings. Two configs that run identically share it.
    pub fn cell_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical_entries() {
            if UNHASHED.contains(&k.as_str()) {
                continue;
            }
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn check_agent(h: &AgentHyper) -> Result<(), HarnessError> {
    let a = &h.agent;
    if !(0.0..=1.0).contains(&a.gamma) {
        return Err(invalid("agent.gamma", "must lie in [0, 1]"));
    }
    if !(a.adam.lr > 0.0 && a.adam.lr.is_finite()) {
        return Err(invalid("agent.lr", "must be positive"));
    }
    if a.hidden.is_empty() || a.hidden.contains(&0) {
        return Err(invalid(
            "agent.hidden",
            "need at least one hidden width, all positive",
        ));
    }
    if h.batch_size == 0 {
        return Err(invalid("agent.batch_size", "must be at least 1"));
    }
    if h.buffer_capacity == 0 {
        return Err(invalid("agent.buffer_capacity", "must be at least 1"));
    }
    if a.target_sync == 0 {
        return Err(invalid("agent.target_sync", "must be at least 1"));
    }
    if h.train_every == 0 {
        return Err(invalid("agent.train_every", "must be at least 1"));
    }
    if h.gradient_steps == 0 {
        return Err(invalid("agent.gradient_steps", "must be at least 1"));
    }
    if a.grad_clip.is_some_and(|c| c.is_nan() || c <= 0.0) {
        return Err(invalid("agent.grad_clip", "must be positive or `none`"));
    }
    if a.huber_delta.is_nan() || a.huber_delta <= 0.0 {
        return Err(invalid("agent.huber_delta", "must be positive"));
    }
    Ok(())
}
