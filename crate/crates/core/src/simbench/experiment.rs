//! Repeated simulated sessions and per-round aggregation.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::concept::Concept;
use super::labels::{assign_labels, simulated_select, CalibratedTask};
use crate::catalog::DesignId;
use crate::error::{Error, Result};
use crate::metrics::{auc, mean_std};
use crate::preference::PreferenceModel;
use crate::proposer::Strategy;
use crate::session::{Session, SessionConfig};
use crate::space::DesignSpace;

pub const DEFAULT_ROUNDS: usize = 26;
pub const DEFAULT_RUNS: usize = 90;
pub const DEFAULT_HOLDOUT: usize = 2000;

const HOLDOUT_STREAM: u64 = 2;

pub const CSV_HEADER: [&str; 8] = [
    "strategy",
    "task",
    "round",
    "auc_mean",
    "auc_std",
    "nsel_mean",
    "nsel_std",
    "runs_completed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub rounds: usize,
    pub runs: usize,
    pub holdout: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn new(strategy: Strategy, base_seed: u64) -> Self {
        Self {
            strategy,
            rounds: DEFAULT_ROUNDS,
            runs: DEFAULT_RUNS,
            holdout: DEFAULT_HOLDOUT,
            base_seed,
        }
    }

    pub fn run_seed(&self, run_index: usize) -> u64 {
        self.base_seed.wrapping_add(run_index as u64)
    }
}

/// Per-round measurements of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run_index: usize,
    /// Held-out AUC after each round; `None` while the model is cold.
    pub auc: Vec<Option<f64>>,
    pub num_selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: usize,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub nsel_mean: Option<f64>,
    pub nsel_std: Option<f64>,
    pub runs_completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub strategy: Strategy,
    pub task: Concept,
    pub rows: Vec<MetricsRow>,
    pub traces: Vec<RunTrace>,
    pub failures: Vec<RunFailure>,
}

impl MetricsTable {
    /// True when some runs failed and the rows cover only the rest.
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn row(&self, round: usize) -> Option<&MetricsRow> {
        self.rows.get(round.checked_sub(1)?)
    }
}

/// Held-out designs, stratified on always-positive membership.
pub fn stratified_holdout(task: &CalibratedTask, space: &DesignSpace, size: usize, seed: u64) -> Result<BTreeSet<DesignId>> {
    let catalog = space.catalog();
    if size >= catalog.len() {
        return Err(Error::Config(format!(
            "holdout of {size} needs a catalog larger than {}",
            catalog.len()
        )));
    }
    let (always, rest): (Vec<(DesignId, f64)>, Vec<(DesignId, f64)>) = catalog
        .ids()
        .zip(task.scores.iter().copied())
        .partition(|&(_, s)| task.task.is_always_positive(s));
    let from_always = ((size as f64) * always.len() as f64 / catalog.len() as f64).round() as usize;
    let from_always = from_always.min(always.len()).min(size);
    let from_rest = size - from_always;
    if from_rest > rest.len() {
        return Err(Error::Config("holdout larger than the negative stratum".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(HOLDOUT_STREAM);
    let mut held = BTreeSet::new();
    held.extend(sample(&mut rng, always.len(), from_always).into_iter().map(|i| always[i].0));
    held.extend(sample(&mut rng, rest.len(), from_rest).into_iter().map(|i| rest[i].0));
    Ok(held)
}

fn holdout_auc(model: &PreferenceModel, space: &DesignSpace, holdout: &[DesignId], truth: &[bool]) -> Result<Option<f64>> {
    let logits = holdout
        .iter()
        .map(|&id| model.logit(space, id))
        .collect::<Result<Vec<_>>>()?;
    Ok(auc(&logits, truth))
}

/// One simulated session of `config.rounds` rounds.
pub fn run_single(space: &DesignSpace, task: &CalibratedTask, config: &ExperimentConfig, run_index: usize) -> Result<RunTrace> {
    let seed = config.run_seed(run_index);
    let holdout = stratified_holdout(task, space, config.holdout, seed)?;
    let labels = assign_labels(&task.task, &task.scores, space.catalog(), seed);
    let held: Vec<DesignId> = holdout.iter().copied().collect();
    let truth: Vec<bool> = held.iter().map(|&id| labels.label(id)).collect();
    let session_config = SessionConfig::new(config.strategy, seed).with_reserved(holdout.iter().copied());
    let mut session = Session::create(space, session_config, format!("run-{run_index}"))?;

    let mut trace = RunTrace {
        run_index,
        auc: Vec::with_capacity(config.rounds),
        num_selected: Vec::with_capacity(config.rounds),
    };
    for _ in 0..config.rounds {
        if let Some(leak) = session.current_proposals().iter().find(|id| holdout.contains(id)) {
            return Err(Error::Validation(format!("held-out design {leak} was proposed")));
        }
        let selected = simulated_select(&labels, session.current_proposals());
        trace.num_selected.push(selected.len());
        session.submit_feedback(space, &selected)?;
        trace.auc.push(match session.model() {
            Some(model) => holdout_auc(model, space, &held, &truth)?,
            None => None,
        });
    }
    Ok(trace)
}

/// Runs every repetition (in parallel) and merges them in run order.
pub fn run_experiment(space: &DesignSpace, task: &CalibratedTask, config: &ExperimentConfig) -> Result<MetricsTable> {
    if config.rounds == 0 || config.runs == 0 {
        return Err(Error::Config("rounds and runs must be positive".into()));
    }
    if task.scores.len() != space.len() {
        return Err(Error::Config("task was calibrated on a different catalog".into()));
    }
    let results: Vec<Result<RunTrace>> = (0..config.runs)
        .into_par_iter()
        .map(|i| run_single(space, task, config, i))
        .collect();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (run_index, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                log::warn!("run {run_index} failed: {e}");
                failures.push(RunFailure {
                    run_index,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(MetricsTable {
        strategy: config.strategy,
        task: task.task.concept,
        rows: aggregate(&traces, config.rounds),
        traces,
        failures,
    })
}

/// Per-round mean and sample std across runs.
pub fn aggregate(traces: &[RunTrace], rounds: usize) -> Vec<MetricsRow> {
    (0..rounds)
        .map(|r| {
            let aucs: Vec<f64> = traces.iter().filter_map(|t| t.auc.get(r).copied().flatten()).collect();
            let nsel: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.num_selected.get(r).map(|&n| n as f64))
                .collect();
            let a = mean_std(&aucs);
            let s = mean_std(&nsel);
            MetricsRow {
                round: r + 1,
                auc_mean: a.map(|v| v.0),
                auc_std: a.map(|v| v.1),
                nsel_mean: s.map(|v| v.0),
                nsel_std: s.map(|v| v.1),
                runs_completed: traces.len(),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Writes one header and every table's rows. Undefined values are empty.
pub fn write_csv<W: Write>(tables: &[MetricsTable], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Validation(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for t in tables {
        for row in &t.rows {
            w.write_record([
                t.strategy.name().to_string(),
                t.task.name().to_string(),
                row.round.to_string(),
                cell(row.auc_mean),
                cell(row.auc_std),
                cell(row.nsel_mean),
                cell(row.nsel_std),
                row.runs_completed.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Validation(format!("csv: {e}")))?;
    Ok(())
}
