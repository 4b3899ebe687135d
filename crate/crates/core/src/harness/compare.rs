use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;

use super::config::RunConfig;
use super::metrics::{curve, emit_table, mean_curve, render_table, table_from_runs, write_csv, write_run, MetricsRow};
use super::train::{run_training_logged, RunRecord, RunStatus, TrainHooks};
use crate::error::Result;
use crate::gate::GateKind;

pub const LOG_DIR_ENV: &str = "SPARQ_LOG_DIR";

/// `SPARQ_LOG_DIR` when set, otherwise `default`.
pub fn log_dir(default: &Path) -> PathBuf {
    env::var_os(LOG_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| default.to_path_buf())
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub methods: Vec<GateKind>,
    pub seeds: Vec<u64>,
    pub log_dir: PathBuf,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// `<log_dir>/<config hash>`
    pub dir: PathBuf,
    pub table: Vec<MetricsRow>,
    pub per_seed: Vec<MetricsRow>,
    pub runs: Vec<RunRecord>,
}

impl Comparison {
    pub fn row(&self, method: GateKind) -> Option<&MetricsRow> {
        self.table.iter().find(|r| r.method == method.as_str())
    }

    pub fn seed_row(&self, method: GateKind, seed: u64) -> Option<&MetricsRow> {
        self.per_seed
            .iter()
            .find(|r| r.method == method.as_str() && r.seed == Some(seed))
    }
}

/// Runs every `(method, seed)` pair and writes run logs, curves and tables.
pub fn compare_methods(base: &RunConfig, opts: &CompareOptions) -> Result<Comparison> {
    base.validate()?;
    let dir = opts.log_dir.join(base.config_hash());
    fs::create_dir_all(&dir)?;
    let jobs: Vec<(GateKind, u64)> = opts
        .methods
        .iter()
        .flat_map(|&m| opts.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let queue = Mutex::new(jobs.iter().enumerate());
    let done: Mutex<Vec<(usize, RunRecord)>> = Mutex::new(Vec::new());
    let first_err: Mutex<Option<crate::error::Error>> = Mutex::new(None);
    let workers = opts.jobs.clamp(1, jobs.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some((i, &(method, seed))) = queue.lock().expect("queue").next() else {
                    break;
                };
                let cfg = base.with_method(method, seed);
                log::info!("training {method} seed {seed}");
                match run_training_logged(&cfg, &TrainHooks::default()) {
                    Ok((outcome, err)) => {
                        if let Some(e) = err {
                            log::warn!("run {method}/{seed} aborted and is excluded: {e}");
                        }
                        done.lock().expect("results").push((i, outcome.record));
                    }
                    Err(e) => {
                        first_err.lock().expect("errors").get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = first_err.into_inner().expect("errors") {
        return Err(e);
    }
    let mut runs = done.into_inner().expect("results");
    runs.sort_by_key(|(i, _)| *i);
    let runs: Vec<RunRecord> = runs.into_iter().map(|(_, r)| r).collect();

    for r in &runs {
        write_run(&dir, r)?;
        if r.meta.status == RunStatus::Completed {
            write_csv(&dir.join(format!("curves_{}_{}.csv", r.meta.method, r.meta.seed)), &curve(r))?;
        }
    }
    for &m in &opts.methods {
        let curves: Vec<_> = runs
            .iter()
            .filter(|r| r.meta.method == m && r.meta.status == RunStatus::Completed)
            .map(curve)
            .collect();
        write_csv(&dir.join(format!("curves_{m}.csv")), &mean_curve(&curves))?;
    }
    let (table, per_seed) = table_from_runs(&runs, &opts.methods, &opts.seeds);
    write_tables(&dir, &table, &per_seed)?;
    Ok(Comparison {
        dir,
        table,
        per_seed,
        runs,
    })
}

pub fn write_tables(dir: &Path, table: &[MetricsRow], per_seed: &[MetricsRow]) -> Result<()> {
    fs::write(dir.join("table.csv"), emit_table(table)?)?;
    fs::write(dir.join("table_seeds.csv"), emit_table(per_seed)?)?;
    let mut text = render_table(table);
    text.push('\n');
    text.push_str(&render_table(per_seed));
    fs::write(dir.join("table.txt"), text)?;
    Ok(())
}
