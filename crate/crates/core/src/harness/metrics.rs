//! Table and curve metrics, computed only from what a run writes to disk.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::eval::{mad, median};
use super::train::{EvalRow, EventRow, RunMeta, RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::gate::GateKind;

/// One row of the comparison table. `seed` is empty on aggregate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub seed: Option<u64>,
    pub runs: usize,
    pub complete: bool,
    pub success_rate: f64,
    pub success_std: f64,
    pub budget_pct: f64,
    pub cost_adjusted_return: f64,
    pub queries_per_success: f64,
    pub final_dist_median: f64,
    pub final_dist_mad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub timestep: u64,
    pub success_rate: f64,
    pub queries_per_episode: f64,
}

/// `Σ returns − c · charged_queries`.
pub fn cost_adjusted_return(returns: &[f64], charged_queries: f64, c: f64) -> f64 {
    returns.iter().sum::<f64>() - c * charged_queries
}

/// Training queries attributed to an evaluation suite of `eval_episodes`
/// episodes: the per-episode training query rate times the suite size.
pub fn amortized_queries(total_queries: u64, training_episodes: u64, eval_episodes: usize) -> f64 {
    total_queries as f64 * eval_episodes as f64 / training_episodes.max(1) as f64
}

fn final_eval(evals: &[EvalRow]) -> Vec<EvalRow> {
    match evals.iter().map(|e| e.timestep).max() {
        Some(last) => evals.iter().filter(|e| e.timestep == last).copied().collect(),
        None => Vec::new(),
    }
}

fn bernoulli(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = successes as f64 / n as f64;
    (p, (p * (1.0 - p)).sqrt())
}

fn queries_per_success(queries: u64, successes: usize) -> f64 {
    if queries == 0 {
        0.0
    } else {
        queries as f64 / successes as f64
    }
}

struct RunTotals {
    queries: u64,
    steps: u64,
    eval_successes: usize,
    final_episodes: Vec<EvalRow>,
    cost_adjusted: f64,
    eval_episodes: usize,
}

fn totals(record: &RunRecord) -> RunTotals {
    let queries = record.events.iter().filter(|e| e.query).count() as u64;
    let episodes = record.events.iter().filter(|e| e.done).count() as u64;
    let final_episodes = final_eval(&record.evals);
    let returns: Vec<f64> = final_episodes.iter().map(|e| e.episode_return).collect();
    let charged = amortized_queries(queries, episodes, final_episodes.len());
    RunTotals {
        queries,
        steps: record.events.len() as u64,
        eval_successes: record.evals.iter().filter(|e| e.success).count(),
        cost_adjusted: cost_adjusted_return(&returns, charged, record.meta.config.gate.query_cost),
        eval_episodes: final_episodes.len(),
        final_episodes,
    }
}

/// Metrics of one run.
pub fn run_metrics(record: &RunRecord) -> MetricsRow {
    aggregate_rows(record.meta.method.as_str(), Some(record.meta.seed), &[record], 1)
}

/// Pools runs of one method: final evaluation episodes are pooled for the
/// success and distance statistics, the rest is averaged over runs.
pub fn aggregate(method: GateKind, records: &[&RunRecord], expected_runs: usize) -> MetricsRow {
    aggregate_rows(method.as_str(), None, records, expected_runs)
}

fn aggregate_rows(method: &str, seed: Option<u64>, records: &[&RunRecord], expected_runs: usize) -> MetricsRow {
    let t: Vec<RunTotals> = records.iter().map(|r| totals(r)).collect();
    let k = t.len() as f64;
    let pooled: Vec<&EvalRow> = t.iter().flat_map(|r| &r.final_episodes).collect();
    let (success_rate, success_std) = bernoulli(pooled.iter().filter(|e| e.success).count(), pooled.len());
    let dists: Vec<f64> = pooled.iter().map(|e| e.final_dist).collect();
    let mean = |f: &dyn Fn(&RunTotals) -> f64| {
        if t.is_empty() {
            f64::NAN
        } else {
            t.iter().map(f).sum::<f64>() / k
        }
    };
    let queries: u64 = t.iter().map(|r| r.queries).sum();
    let successes: usize = t.iter().map(|r| r.eval_successes).sum();
    MetricsRow {
        method: method.to_string(),
        seed,
        runs: t.len(),
        complete: t.len() == expected_runs && t.iter().all(|r| r.eval_episodes > 0),
        success_rate,
        success_std,
        budget_pct: mean(&|r| 100.0 * r.queries as f64 / r.steps.max(1) as f64),
        cost_adjusted_return: mean(&|r| r.cost_adjusted),
        queries_per_success: if t.is_empty() {
            f64::NAN
        } else {
            queries_per_success(queries, successes)
        },
        final_dist_median: median(&dists),
        final_dist_mad: mad(&dists),
    }
}

/// Success rate at every evaluation and the training queries per episode
/// since the previous evaluation.
pub fn curve(record: &RunRecord) -> Vec<CurvePoint> {
    let mut timesteps: Vec<u64> = record.evals.iter().map(|e| e.timestep).collect();
    timesteps.dedup();
    let mut points = Vec::with_capacity(timesteps.len());
    let mut from = 0u64;
    for ts in timesteps {
        let rows: Vec<&EvalRow> = record.evals.iter().filter(|e| e.timestep == ts).collect();
        let (success_rate, _) = bernoulli(rows.iter().filter(|e| e.success).count(), rows.len());
        let window: Vec<&EventRow> = record.events.iter().filter(|e| e.step >= from && e.step < ts).collect();
        let queries = window.iter().filter(|e| e.query).count() as f64;
        let episodes = window.iter().filter(|e| e.done).count().max(1) as f64;
        points.push(CurvePoint {
            timestep: ts,
            success_rate,
            queries_per_episode: queries / episodes,
        });
        from = ts;
    }
    points
}

/// Pointwise mean of curves sharing the same evaluation timesteps.
pub fn mean_curve(curves: &[Vec<CurvePoint>]) -> Vec<CurvePoint> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    let k = curves.len() as f64;
    first
        .iter()
        .enumerate()
        .filter(|(i, p)| curves.iter().all(|c| c.get(*i).is_some_and(|q| q.timestep == p.timestep)))
        .map(|(i, p)| CurvePoint {
            timestep: p.timestep,
            success_rate: curves.iter().map(|c| c[i].success_rate).sum::<f64>() / k,
            queries_per_episode: curves.iter().map(|c| c[i].queries_per_episode).sum::<f64>() / k,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::MalformedLog {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn emit_table(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_table(text: &str) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn run_stem(config_hash: &str, method: GateKind, seed: u64) -> String {
    format!("run_{config_hash}_{method}_{seed}")
}

pub fn write_run(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let stem = run_stem(&record.meta.config_hash, record.meta.method, record.meta.seed);
    write_csv(&dir.join(format!("{stem}.events.csv")), &record.events)?;
    write_csv(&dir.join(format!("{stem}.eval.csv")), &record.evals)?;
    let meta = File::create(dir.join(format!("{stem}.meta.json")))?;
    serde_json::to_writer_pretty(meta, &record.meta)?;
    Ok(dir.join(stem))
}

/// Reads the three files of a run given the path of its `.meta.json`.
pub fn read_run(meta_path: &Path) -> Result<RunRecord> {
    let name = meta_path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".meta.json"))
        .ok_or_else(|| Error::MalformedLog {
            path: meta_path.to_path_buf(),
            message: "expected a .meta.json file".into(),
        })?;
    let dir = meta_path.parent().unwrap_or(Path::new("."));
    let meta: RunMeta = serde_json::from_reader(File::open(meta_path)?).map_err(|e| Error::MalformedLog {
        path: meta_path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(RunRecord {
        meta,
        events: read_csv(&dir.join(format!("{name}.events.csv")))?,
        evals: read_csv(&dir.join(format!("{name}.eval.csv")))?,
    })
}

/// All runs in `dir`, ordered by method then seed.
pub fn read_runs(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut metas: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".meta.json"))
        })
        .collect();
    metas.sort();
    let mut runs = metas.iter().map(|p| read_run(p)).collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| (GateKind::ALL.iter().position(|k| *k == r.meta.method), r.meta.seed));
    Ok(runs)
}

/// Aggregate and per-seed rows for the given runs. Aborted runs are left
/// out; their method row is then marked incomplete.
pub fn table_from_runs(runs: &[RunRecord], methods: &[GateKind], seeds: &[u64]) -> (Vec<MetricsRow>, Vec<MetricsRow>) {
    let mut table = Vec::new();
    let mut per_seed = Vec::new();
    for &m in methods {
        let ok: Vec<&RunRecord> = runs
            .iter()
            .filter(|r| r.meta.method == m && r.meta.status == RunStatus::Completed)
            .collect();
        table.push(aggregate(m, &ok, seeds.len()));
        for &s in seeds {
            if let Some(r) = ok.iter().find(|r| r.meta.seed == s) {
                per_seed.push(run_metrics(r));
            }
        }
    }
    (table, per_seed)
}

fn pm(value: f64, spread: f64, digits: usize) -> String {
    format!("{value:.digits$} ± {spread:.digits$}")
}

pub fn render_table(rows: &[MetricsRow]) -> String {
    let header = [
        "method",
        "success",
        "budget %",
        "cost-adj return",
        "queries/success",
        "final dist",
    ];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let mut method = r.method.clone();
            if let Some(s) = r.seed {
                method.push_str(&format!(" (seed {s})"));
            }
            if !r.complete {
                method.push_str(" *");
            }
            [
                method,
                pm(r.success_rate, r.success_std, 3),
                format!("{:.1}", r.budget_pct),
                format!("{:.1}", r.cost_adjusted_return),
                format!("{:.2}", r.queries_per_success),
                pm(r.final_dist_median, r.final_dist_mad, 3),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    if rows.iter().any(|r| !r.complete) {
        out.push_str("* incomplete: one or more runs aborted\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_adjusted_examples() {
        let r = vec![50.0, 50.0, 100.0];
        assert_eq!(cost_adjusted_return(&r, 100.0, 0.05), 195.0);
        assert_eq!(cost_adjusted_return(&r, 0.0, 0.05), 200.0);
        assert_eq!(cost_adjusted_return(&r, 1e6, 0.0), 200.0);
    }

    #[test]
    fn amortization() {
        assert_eq!(amortized_queries(1000, 500, 100), 200.0);
        assert_eq!(amortized_queries(0, 500, 100), 0.0);
        assert_eq!(amortized_queries(10, 0, 100), 1000.0);
    }

    #[test]
    fn no_queries_means_zero_per_success() {
        assert_eq!(queries_per_success(0, 0), 0.0);
        assert_eq!(queries_per_success(10, 4), 2.5);
    }
}
