//! Seeded replications over every (method, seed) pair, with crash-safe persistence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{run_replication, Replication};
use crate::error::{Error, Result};
use crate::metrics::{Trace, TraceRow};
use crate::sac::STATE_FEATURES_VERSION;

/// Version of the CSV layouts written by [`run_experiment`].
pub const SCHEMA_VERSION: u32 = 1;

pub const TRACES_FILE: &str = "traces.csv";
pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const METADATA_FILE: &str = "metadata.json";
const PARTS_DIR: &str = "parts";

/// Interpretation choices recorded in every run's metadata.
pub const DESIGN_DECISIONS: &[(&str, &str)] = &[
    ("phi-normalisation", "min-max over the full candidate x labeled pairwise matrix, per metric, per iteration; zero range maps to 0"),
    ("ties", "argmax ties resolve to the lowest pool position; pool and labeled lists start sorted by row index"),
    ("horizon", "decay horizon T is the initial pool size"),
    ("linear-decay", "clamped at 0 when c > 1"),
    ("ucb-bonus", "mean + c * sqrt(ln n / n_i), arms pulled once each in order first"),
    ("sac-first-reward", "no transition is stored until two CV values exist"),
    ("sac-exploration", "native squashed-Gaussian sampling, no extra additive noise"),
    ("sac-updates", "one gradient update per iteration once the buffer holds a batch"),
    ("sac-state", STATE_FEATURES_VERSION),
    ("ridge-variance", "sigma2_hat * x_c^T (X_c^T X_c + alpha I)^-1 x_c with sigma2_hat = RSS / max(k - p - 1, 1)"),
    ("committee", "bootstrap committees of model.committee_size ridge members"),
    ("egal", "Gaussian similarity with bandwidth = mean pairwise distance on a seeded sample; candidates below the diversity quantile of nearest-labeled distance are filtered out"),
    ("milestones", "threshold (1 - q) * RMSE0, anchored to the shared initial RMSE and the final RMSE of 0"),
    ("relative-auc", "mean of per-seed ratios; curves include the initial RMSE"),
    ("wilcoxon", "exact for n <= 12 non-zero differences, normal approximation with tie correction and continuity correction otherwise"),
    ("seeds", "replication seed = base_seed + index; per-purpose streams via SplitMix64 mixing"),
    ("dgp-scaling", "built-in generator features are used unscaled"),
    ("dgp-draw", "one dataset per experiment, drawn from dataset.seed; replications vary the split and all algorithm randomness"),
];

/// A pair that failed; the others still complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub method: String,
    pub seed: u64,
    pub error: String,
}

/// All traces of an experiment, ordered by method (config order) then seed.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub dataset: String,
    pub traces: Vec<Trace>,
    pub failures: Vec<ReplicationFailure>,
}

impl RunRecord {
    pub fn method_labels(&self) -> Vec<String> {
        self.config.methods.iter().map(|m| m.label()).collect()
    }

    pub fn traces_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a Trace> + 'a {
        self.traces.iter().filter(move |t| t.method == method)
    }

    pub fn trace(&self, method: &str, seed: u64) -> Option<&Trace> {
        self.traces
            .iter()
            .find(|t| t.method == method && t.seed == seed)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceCsvRow {
    dataset: String,
    method: String,
    seed: u64,
    iteration: usize,
    labeled_count: usize,
    rmse: f64,
    cc: Option<f64>,
    weight: Option<f64>,
    selector_score: f64,
    chosen_index: usize,
    x_position: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReplicationCsvRow {
    dataset: String,
    method: String,
    seed: u64,
    pool_size: Option<usize>,
    initial_rmse: Option<f64>,
    initial_cc: Option<f64>,
    status: String,
    error: String,
}

#[derive(Debug, Serialize)]
struct TimingCsvRow<'a> {
    dataset: &'a str,
    method: &'a str,
    seed: u64,
    iteration: usize,
    wall_ms: f64,
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

fn trace_rows(t: &Trace) -> impl Iterator<Item = TraceCsvRow> + '_ {
    t.rows.iter().map(move |r| TraceCsvRow {
        dataset: t.dataset.clone(),
        method: t.method.clone(),
        seed: t.seed,
        iteration: r.iteration,
        labeled_count: r.labeled_count,
        rmse: r.rmse,
        cc: r.cc,
        weight: r.weight,
        selector_score: r.selector_score,
        chosen_index: r.chosen_index,
        x_position: r.x_position,
    })
}

/// Runs every (method, seed) pair and writes the record into `output_dir`.
pub fn run_experiment(config: &ExperimentConfig, output_dir: &Path) -> Result<RunRecord> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    for w in dataset.warnings() {
        log::warn!("{w}");
    }
    let parts = output_dir.join(PARTS_DIR);
    fs::create_dir_all(&parts).map_err(|e| Error::io(&parts, e))?;

    let pairs: Vec<(usize, u64)> = (0..config.methods.len())
        .flat_map(|m| config.seeds().into_iter().map(move |s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.experiment.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<std::result::Result<Replication, String>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(m, seed)| {
                let method = &config.methods[m];
                let outcome = run_replication(config, &dataset, method, seed).map_err(|e| {
                    log::error!("{e}");
                    e.to_string()
                });
                if let Err(e) = persist_part(&parts, m, seed, &outcome) {
                    log::error!("could not persist {} seed {seed}: {e}", method.label());
                }
                log::info!("finished {} seed {seed}", method.label());
                outcome
            })
            .collect()
    });

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut replication_rows = Vec::new();
    let mut timing = Vec::new();
    for (&(m, seed), outcome) in pairs.iter().zip(outcomes) {
        let label = config.methods[m].label();
        match outcome {
            Ok(rep) => {
                replication_rows.push(ReplicationCsvRow {
                    dataset: dataset.name().to_string(),
                    method: label,
                    seed,
                    pool_size: Some(rep.trace.pool_size),
                    initial_rmse: Some(rep.trace.initial_rmse),
                    initial_cc: rep.trace.initial_cc,
                    status: "ok".into(),
                    error: String::new(),
                });
                timing.push(rep.wall_ms);
                traces.push(rep.trace);
            }
            Err(error) => {
                replication_rows.push(ReplicationCsvRow {
                    dataset: dataset.name().to_string(),
                    method: label.clone(),
                    seed,
                    pool_size: None,
                    initial_rmse: None,
                    initial_cc: None,
                    status: "error".into(),
                    error: error.clone(),
                });
                failures.push(ReplicationFailure {
                    method: label,
                    seed,
                    error,
                });
            }
        }
    }

    write_atomic(
        &output_dir.join(TRACES_FILE),
        &csv_bytes(traces.iter().flat_map(trace_rows))?,
    )?;
    write_atomic(
        &output_dir.join(REPLICATIONS_FILE),
        &csv_bytes(&replication_rows)?,
    )?;
    let timing_rows = traces.iter().zip(&timing).flat_map(|(t, ms)| {
        ms.iter()
            .enumerate()
            .map(move |(i, &wall_ms)| TimingCsvRow {
                dataset: &t.dataset,
                method: &t.method,
                seed: t.seed,
                iteration: i,
                wall_ms,
            })
    });
    write_atomic(&output_dir.join(TIMING_FILE), &csv_bytes(timing_rows)?)?;
    write_atomic(
        &output_dir.join(CONFIG_FILE),
        config.to_toml_string()?.as_bytes(),
    )?;
    write_atomic(
        &output_dir.join(METADATA_FILE),
        metadata(config, dataset.warnings())?.as_bytes(),
    )?;
    fs::remove_dir_all(&parts).map_err(|e| Error::io(&parts, e))?;

    Ok(RunRecord {
        config: config.clone(),
        dataset: dataset.name().to_string(),
        traces,
        failures,
    })
}

fn persist_part(
    dir: &Path,
    method: usize,
    seed: u64,
    outcome: &std::result::Result<Replication, String>,
) -> Result<()> {
    let path: PathBuf = dir.join(format!("m{method:03}-s{seed}.json"));
    let value = match outcome {
        Ok(r) => serde_json::json!({ "trace": r.trace, "wall_ms": r.wall_ms }),
        Err(e) => serde_json::json!({ "error": e }),
    };
    let text = serde_json::to_vec(&value).map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(&path, &text)
}

fn metadata(config: &ExperimentConfig, warnings: &[String]) -> Result<String> {
    let decisions: BTreeMap<&str, &str> = DESIGN_DECISIONS.iter().copied().collect();
    let value = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "state_features": STATE_FEATURES_VERSION,
        "design_decisions": decisions,
        "methods": config.methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
        "seeds": config.seeds(),
        "dataset_warnings": warnings,
    });
    serde_json::to_string_pretty(&value).map_err(|e| Error::invalid(e.to_string()))
}

/// Reads a record written by [`run_experiment`].
pub fn load_record(dir: &Path) -> Result<RunRecord> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let config = ExperimentConfig::from_toml_str(&text)?;

    let mut reader = csv::Reader::from_path(dir.join(REPLICATIONS_FILE))?;
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut dataset = String::new();
    for row in reader.deserialize::<ReplicationCsvRow>() {
        let row = row?;
        dataset = row.dataset.clone();
        if row.status == "ok" {
            traces.push(Trace {
                dataset: row.dataset,
                method: row.method,
                seed: row.seed,
                pool_size: row.pool_size.unwrap_or(0),
                initial_rmse: row.initial_rmse.unwrap_or(f64::NAN),
                initial_cc: row.initial_cc,
                rows: Vec::new(),
            });
        } else {
            failures.push(ReplicationFailure {
                method: row.method,
                seed: row.seed,
                error: row.error,
            });
        }
    }
    let index: BTreeMap<(String, u64), usize> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| ((t.method.clone(), t.seed), i))
        .collect();
    let mut reader = csv::Reader::from_path(dir.join(TRACES_FILE))?;
    for row in reader.deserialize::<TraceCsvRow>() {
        let row = row?;
        let &i = index.get(&(row.method.clone(), row.seed)).ok_or_else(|| {
            Error::invalid(format!(
                "trace row for unknown pair {} / {}",
                row.method, row.seed
            ))
        })?;
        traces[i].rows.push(TraceRow {
            iteration: row.iteration,
            labeled_count: row.labeled_count,
            rmse: row.rmse,
            cc: row.cc,
            weight: row.weight,
            selector_score: row.selector_score,
            chosen_index: row.chosen_index,
            x_position: row.x_position,
        });
    }
    Ok(RunRecord {
        config,
        dataset,
        traces,
        failures,
    })
}
