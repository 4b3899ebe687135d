use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sparq_core::gate::GateKind;
use sparq_core::harness::compare::write_tables;
use sparq_core::harness::metrics::{curve, emit_table, read_runs, render_table, run_metrics, table_from_runs, write_csv, write_run};
use sparq_core::harness::train::{run_training_logged, RunStatus};
use sparq_core::harness::{compare_methods, log_dir, CompareOptions, OracleBridge, RunConfig, SessionPolicy, TrainHooks};

#[derive(Parser)]
#[command(name = "sparq", version, about = "Query-gated SAC training on a planar reach task")]
struct Cli {
    /// Output directory (overridden by SPARQ_LOG_DIR).
    #[arg(long, global = true, default_value = "runs")]
    log_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "sparq")]
        method: GateKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Listen for an oracle console; queries go to it.
        #[arg(long)]
        serve_oracle: bool,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "console")]
        session: String,
    },
    /// Train every method on every seed and write the comparison table.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "no_oracle,random,always,sparq")]
        methods: Vec<GateKind>,
        /// Parallel runs (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Recompute the table from saved run logs and check it against `table.csv`.
    Report {
        #[arg(long)]
        logs: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn train(
    out: &Path,
    config: Option<&Path>,
    method: GateKind,
    seed: u64,
    serve: Option<(u16, String)>,
) -> Result<()> {
    let mut cfg = load_config(config)?.with_method(method, seed);
    let mut bridge = None;
    if let Some((port, session)) = serve {
        cfg.oracle_backend = sparq_core::harness::OracleBackend::Human;
        let b = OracleBridge::serve(
            port,
            SessionPolicy {
                session_id: session,
                run_id: format!("{}_{method}_{seed}", cfg.config_hash()),
            },
        )?;
        eprintln!("oracle bridge listening on {}", b.local_addr());
        bridge = Some(b);
    }
    let hooks = TrainHooks {
        bridge: bridge.as_ref().map(OracleBridge::handle),
    };
    let (outcome, err) = run_training_logged(&cfg, &hooks)?;
    let dir = out.join(cfg.config_hash());
    let stem = write_run(&dir, &outcome.record)?;
    let record = &outcome.record;
    if record.meta.status == RunStatus::Completed {
        write_csv(&dir.join(format!("curves_{method}_{seed}.csv")), &curve(record))?;
    }
    print!("{}", render_table(&[run_metrics(record)]));
    println!("logs: {}.*", stem.display());
    println!("final params: {}", record.meta.final_params_hash);
    if let Some(e) = err {
        bail!("run aborted: {e}");
    }
    Ok(())
}

fn compare(out: &Path, config: Option<&Path>, seeds: Vec<u64>, methods: Vec<GateKind>, jobs: Option<usize>) -> Result<()> {
    let cfg = load_config(config)?;
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = compare_methods(
        &cfg,
        &CompareOptions {
            methods,
            seeds,
            log_dir: out.to_path_buf(),
            jobs,
        },
    )?;
    print!("{}", render_table(&result.table));
    println!();
    print!("{}", render_table(&result.per_seed));
    println!("written to {}", result.dir.display());
    Ok(())
}

fn report(logs: &Path) -> Result<()> {
    let runs = read_runs(logs).with_context(|| format!("reading {}", logs.display()))?;
    if runs.is_empty() {
        bail!("no run logs in {}", logs.display());
    }
    let methods: Vec<GateKind> = GateKind::ALL
        .into_iter()
        .filter(|m| runs.iter().any(|r| r.meta.method == *m))
        .collect();
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.meta.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let (table, per_seed) = table_from_runs(&runs, &methods, &seeds);
    print!("{}", render_table(&table));
    println!();
    print!("{}", render_table(&per_seed));
    let saved = logs.join("table.csv");
    if saved.is_file() {
        let stored = fs::read_to_string(&saved).with_context(|| format!("reading {}", saved.display()))?;
        if stored != emit_table(&table)? {
            bail!("{} does not match the run logs", saved.display());
        }
        println!("{} matches the run logs", saved.display());
    } else {
        write_tables(logs, &table, &per_seed)?;
        println!("tables written to {}", logs.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let out = log_dir(&cli.log_dir);
    let result = match cli.command {
        Command::Train {
            config,
            method,
            seed,
            serve_oracle,
            port,
            session,
        } => train(&out, config.as_deref(), method, seed, serve_oracle.then_some((port, session))),
        Command::Compare {
            config,
            seeds,
            methods,
            jobs,
        } => compare(&out, config.as_deref(), seeds, methods, jobs),
        Command::Report { logs } => report(&logs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
