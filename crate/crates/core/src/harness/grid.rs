//! Hyperparameter grids and multi-seed aggregation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::invalid;
use super::runner::{mean_std, read_rows, run_seed, LogRow, RunLog};
use super::{is_known_key, ConfigEntries, ExperimentConfig, HarnessError};

/// Ordered map from config key to the values swept over.
///
/// File form is one key per line with whitespace-separated values:
///
/// ```text
/// rho.rho = 0.03 0.05 0.07 0.1
/// rho.n = 10 20 30
/// ```
///
/// A bare key such as `n` refers to the active strategy's block (`rho.n` or `cb.n`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grid {
    axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    pub fn new() -> Self {
        Grid::default()
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut grid = Grid::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, values) =
                line.split_once('=')
                    .ok_or_else(|| HarnessError::ConfigInvalid {
                        field: format!("grid line {}", lineno + 1),
                        message: format!("expected `key = v1 v2 ...`, got `{line}`"),
                    })?;
            grid = grid.axis(key.trim(), values.split_whitespace())?;
        }
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(&path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Add one swept key. Repeating a key replaces its values.
    pub fn axis<I, S>(mut self, key: &str, values: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(HarnessError::ConfigInvalid {
                field: key.to_string(),
                message: "grid axis has no values".into(),
            });
        }
        match self.axes.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = values,
            None => self.axes.push((key.to_string(), values)),
        }
        Ok(self)
    }

    pub fn axes(&self) -> &[(String, Vec<String>)] {
        &self.axes
    }

    /// Cartesian product of the axes; the last axis varies fastest.
    pub fn cells(&self) -> Vec<Vec<(String, String)>> {
        let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for (key, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut cell = prefix.clone();
                        cell.push((key.clone(), v.clone()));
                        cell
                    })
                })
                .collect();
        }
        cells
    }
}

/// Map a grid key onto a config key, resolving bare names into the strategy block.
fn resolve_key(key: &str, base: &ConfigEntries) -> Result<String, HarnessError> {
    if is_known_key(key) {
        return Ok(key.to_string());
    }
    if !key.contains('.') {
        let block = match base.get("strategy") {
            Some("rho") => Some("rho"),
            Some("change_based") => Some("cb"),
            _ => None,
        };
        if let Some(block) = block {
            let full = format!("{block}.{key}");
            if is_known_key(&full) {
                return Ok(full);
            }
        }
    }
    Err(HarnessError::UnknownField(key.to_string()))
}

#[derive(Debug, Clone)]
pub struct GridCell {
    /// Resolved config keys and values applied on top of the base.
    pub overrides: Vec<(String, String)>,
    pub config: ExperimentConfig,
    pub logs: Vec<RunLog>,
}

impl GridCell {
    pub fn label(&self) -> String {
        self.overrides
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn summary(&self) -> SummaryRow {
        let finals: Vec<f64> = self.logs.iter().filter_map(RunLog::final_eval).collect();
        let (mean, std) = mean_std(&finals);
        SummaryRow {
            cell: self.config.cell_hash(),
            label: self.label(),
            final_eval_mean: mean,
            final_eval_std: std,
            n_seeds: finals.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub label: String,
    /// Mean over seeds of the last eval point.
    pub final_eval_mean: f64,
    pub final_eval_std: f64,
    pub n_seeds: usize,
}

pub const SUMMARY_HEADER: [&str; 5] = [
    "cell",
    "overrides",
    "final_eval_mean",
    "final_eval_std",
    "n_seeds",
];

/// Resolved overrides of one grid cell and the config they produce.
pub type ExpandedCell = (Vec<(String, String)>, ExperimentConfig);

/// Build every cell's config without running anything.
pub fn expand_grid(base: &ConfigEntries, grid: &Grid) -> Result<Vec<ExpandedCell>, HarnessError> {
    let mut resolved = Grid::new();
    for (key, values) in grid.axes() {
        resolved = resolved.axis(&resolve_key(key, base)?, values.iter().cloned())?;
    }
    resolved
        .cells()
        .into_iter()
        .map(|overrides| {
            let mut entries = base.clone();
            for (k, v) in &overrides {
                entries.set(k, v)?;
            }
            Ok((overrides, entries.build()?))
        })
        .collect()
}

/// Run every (cell, seed) pair, in parallel across pairs.
pub fn run_grid(base: &ConfigEntries, grid: &Grid) -> Result<Vec<GridCell>, HarnessError> {
    let cells = expand_grid(base, grid)?;
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, (_, cfg))| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let logs: Vec<(usize, RunLog)> = jobs
        .par_iter()
        .map(|&(i, seed)| run_seed(&cells[i].1, seed).map(|log| (i, log)))
        .collect::<Result<_, _>>()?;
    let mut out: Vec<GridCell> = cells
        .into_iter()
        .map(|(overrides, config)| GridCell {
            overrides,
            config,
            logs: Vec::new(),
        })
        .collect();
    for (i, log) in logs {
        out[i].logs.push(log);
    }
    Ok(out)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.cell.clone(),
            r.label.clone(),
            r.final_eval_mean.to_string(),
            r.final_eval_std.to_string(),
            r.n_seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write each cell's logs and canonical config, plus `summary.csv`, into `dir`.
pub fn write_grid(dir: &Path, cells: &[GridCell]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    for cell in cells {
        std::fs::write(
            dir.join(format!("{}.cfg", cell.config.cell_hash())),
            cell.config.to_config_text(),
        )?;
        for log in &cell.logs {
            log.write_to_dir(dir)?;
        }
    }
    let summary: Vec<SummaryRow> = cells.iter().map(GridCell::summary).collect();
    write_summary(std::fs::File::create(dir.join("summary.csv"))?, &summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub train_return_mean: f64,
    pub train_return_std: f64,
    pub n_seeds: usize,
}

/// Pointwise mean and population stddev across seeds of the per-seed means.
pub fn aggregate(logs: &[Vec<LogRow>]) -> Result<Vec<CurvePoint>, HarnessError> {
    let Some(first) = logs.first() else {
        return Err(HarnessError::MisalignedLogs("no logs to aggregate".into()));
    };
    for (i, log) in logs.iter().enumerate() {
        if log.len() != first.len() || log.iter().zip(first).any(|(a, b)| a.step != b.step) {
            return Err(HarnessError::MisalignedLogs(format!(
                "log {i} has different eval steps from log 0"
            )));
        }
    }
    Ok((0..first.len())
        .map(|j| {
            let eval: Vec<f64> = logs.iter().map(|l| l[j].eval_return_mean).collect();
            let train: Vec<f64> = logs.iter().map(|l| l[j].train_return_mean).collect();
            let (eval_return_mean, eval_return_std) = mean_std(&eval);
            let (train_return_mean, train_return_std) = mean_std(&train);
            CurvePoint {
                step: first[j].step,
                eval_return_mean,
                eval_return_std,
                train_return_mean,
                train_return_std,
                n_seeds: logs.len(),
            }
        })
        .collect())
}

pub const AGGREGATE_HEADER: [&str; 7] = [
    "cell",
    "step",
    "eval_return_mean",
    "eval_return_std",
    "train_return_mean",
    "train_return_std",
    "n_seeds",
];

/// Split `{cell}_{seed}.csv` into its parts.
pub fn parse_log_name(name: &str) -> Option<(&str, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (cell, seed) = stem.rsplit_once('_')?;
    if cell.is_empty() {
        return None;
    }
    Some((cell, seed.parse().ok()?))
}

/// Aggregate every `{cell}_{seed}.csv` in `dir`, grouped by cell. Other files are ignored.
pub fn aggregate_dir(dir: &Path) -> Result<BTreeMap<String, Vec<CurvePoint>>, HarnessError> {
    let mut groups: BTreeMap<String, BTreeMap<u64, Vec<LogRow>>> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((cell, seed)) = parse_log_name(name) else {
            continue;
        };
        let rows = read_rows(std::fs::File::open(&path)?)?;
        groups
            .entry(cell.to_string())
            .or_default()
            .insert(seed, rows);
    }
    if groups.is_empty() {
        return Err(HarnessError::MisalignedLogs(format!(
            "no run logs found in {}",
            dir.display()
        )));
    }
    groups
        .into_iter()
        .map(|(cell, seeds)| {
            let logs: Vec<Vec<LogRow>> = seeds.into_values().collect();
            let curve = aggregate(&logs).map_err(|e| match e {
                HarnessError::MisalignedLogs(m) => {
                    HarnessError::MisalignedLogs(format!("cell {cell}: {m}"))
                }
                other => other,
            })?;
            Ok((cell, curve))
        })
        .collect()
}

pub fn write_aggregate<W: Write>(
    out: W,
    curves: &BTreeMap<String, Vec<CurvePoint>>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for (cell, curve) in curves {
        for p in curve {
            w.write_record([
                cell.clone(),
                p.step.to_string(),
                p.eval_return_mean.to_string(),
                p.eval_return_std.to_string(),
                p.train_return_mean.to_string(),
                p.train_return_std.to_string(),
                p.n_seeds.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
