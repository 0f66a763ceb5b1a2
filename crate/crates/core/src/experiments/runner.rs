//! Parallel experiment execution and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, ExperimentError, ExperimentSpec};
use crate::engine::{run_isolated, run_simulation, SimConfig};
use crate::games::{action_label, JointAction};
use crate::metrics::{self, Aggregate, ComparisonTable, RunSummary};

/// Runner options; unset fields fall back to the spec's values.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub replicas: Option<usize>,
    pub rounds: Option<u32>,
    pub seed: Option<u64>,
}

/// Per-replica isolation outcome kept alongside the summary.
#[derive(Debug, Clone, PartialEq)]
struct IsolationRow {
    seed: u64,
    norms: [Option<JointAction>; 2],
}

/// One sweep value's results.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub label: String,
    pub config: SimConfig,
    pub summaries: Vec<RunSummary>,
    pub aggregate: Aggregate,
    /// Fraction of replicas where the two populations settled on different
    /// norms (isolation arms only).
    pub divergent_fraction: Option<f64>,
}

/// Everything a run produced, with the files written to disk.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub name: String,
    pub arms: Vec<ArmResult>,
    pub comparison: ComparisonTable,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    description: &'a str,
    replicas: usize,
    base_seed: u64,
    arms: Vec<&'a str>,
    base: &'a SimConfig,
}

/// Runs every (arm, replica) job, aggregates per arm, and writes artifacts
/// under `<output_dir>/<name>/`. Replica seeds derive from
/// `(base seed, arm label, replica index)`, so arms are independently
/// reproducible; results merge by index, independent of completion order.
pub fn run_experiment(
    spec: &ExperimentSpec,
    opts: &RunOptions,
) -> Result<ExperimentResult, ExperimentError> {
    let replicas = opts.replicas.unwrap_or(spec.replicas).max(1);
    let base_seed = opts.seed.unwrap_or(spec.base.seed);
    let mut arms = spec.arms();
    for arm in &mut arms {
        if let Some(rounds) = opts.rounds {
            arm.config.rounds = rounds;
        }
        arm.config.validate()?;
    }

    let jobs: Vec<(usize, SimConfig)> = arms
        .iter()
        .enumerate()
        .flat_map(|(arm_idx, arm)| {
            (0..replicas).map(move |replica| {
                let mut config = arm.config.clone();
                config.seed = derive_seed(base_seed, &arm.label, replica as u64);
                (arm_idx, config)
            })
        })
        .collect();

    let execute = || -> Result<Vec<(RunSummary, Option<IsolationRow>)>, ExperimentError> {
        jobs.par_iter()
            .map(|(_, config)| {
                if config.isolation.is_some() {
                    let out = run_isolated(config)?;
                    let row = IsolationRow {
                        seed: config.seed,
                        norms: out.final_norms,
                    };
                    Ok((out.outcome.summary, Some(row)))
                } else {
                    let out = run_simulation(config)?;
                    Ok((out.summary, None))
                }
            })
            .collect()
    };
    let outputs = match opts.workers {
        Some(workers) if workers > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool")
            .install(execute),
        _ => execute(),
    }?;

    let mut arm_results = Vec::with_capacity(arms.len());
    for (arm_idx, arm) in arms.iter().enumerate() {
        let mut summaries = Vec::with_capacity(replicas);
        let mut iso_rows = Vec::new();
        for ((job_arm, _), (summary, iso)) in jobs.iter().zip(&outputs) {
            if *job_arm == arm_idx {
                summaries.push(summary.clone());
                if let Some(row) = iso {
                    iso_rows.push(row.clone());
                }
            }
        }
        let aggregate = metrics::aggregate(&summaries)?;
        let divergent_fraction = (!iso_rows.is_empty()).then(|| {
            iso_rows
                .iter()
                .filter(|r| matches!((r.norms[0], r.norms[1]), (Some(a), Some(b)) if a != b))
                .count() as f64
                / iso_rows.len() as f64
        });
        arm_results.push((
            ArmResult {
                label: arm.label.clone(),
                config: arm.config.clone(),
                summaries,
                aggregate,
                divergent_fraction,
            },
            iso_rows,
        ));
    }

    let comparison = metrics::compare(
        &arm_results
            .iter()
            .map(|(a, _)| (a.label.clone(), a.aggregate.clone()))
            .collect::<Vec<_>>(),
    )?;

    let root = opts.output_dir.join(&spec.name);
    let mut files = Vec::new();
    for (arm, iso_rows) in &arm_results {
        let dir = root.join(&arm.label);
        create_dir(&dir)?;
        files.push(write(&dir.join("curve.csv"), &metrics::curve_csv(&arm.aggregate))?);
        files.push(write(&dir.join("runs.csv"), &metrics::runs_csv(&arm.summaries))?);
        files.push(write(
            &dir.join("aggregate.json"),
            &metrics::aggregate_json(&arm.aggregate),
        )?);
        if !iso_rows.is_empty() {
            files.push(write(&dir.join("isolation.csv"), &isolation_csv(iso_rows))?);
        }
    }
    files.push(write(&root.join("comparison.csv"), &comparison.to_csv())?);
    let manifest = Manifest {
        name: &spec.name,
        description: &spec.description,
        replicas,
        base_seed,
        arms: arm_results.iter().map(|(a, _)| a.label.as_str()).collect(),
        base: &spec.base,
    };
    files.push(write(
        &root.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?);

    Ok(ExperimentResult {
        name: spec.name.clone(),
        arms: arm_results.into_iter().map(|(a, _)| a).collect(),
        comparison,
        files,
    })
}

/// Per-replica isolation CSV:
/// `seed,norm_a_row,norm_a_col,norm_b_row,norm_b_col,divergent`.
fn isolation_csv(rows: &[IsolationRow]) -> String {
    let mut out = String::from("seed,norm_a_row,norm_a_col,norm_b_row,norm_b_col,divergent\n");
    for row in rows {
        let cell = |norm: Option<JointAction>| match norm {
            Some((r, c)) => (action_label(r), action_label(c)),
            None => (String::new(), String::new()),
        };
        let (ar, ac) = cell(row.norms[0]);
        let (br, bc) = cell(row.norms[1]);
        let divergent = matches!(
            (row.norms[0], row.norms[1]),
            (Some(a), Some(b)) if a != b
        );
        out.push_str(&format!("{},{ar},{ac},{br},{bc},{divergent}\n", row.seed));
    }
    out
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<PathBuf, ExperimentError> {
    fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}
