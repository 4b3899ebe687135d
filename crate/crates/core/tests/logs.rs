use std::fs;

use sparq_core::gate::GateKind;
use sparq_core::harness::compare::{compare_methods, CompareOptions};
use sparq_core::harness::metrics::{emit_table, parse_table, read_run, read_runs, run_stem, table_from_runs, write_run};
use sparq_core::harness::{run_training, RunConfig, TrainHooks};
use sparq_core::Error;

fn short(kind: GateKind, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default().with_method(kind, seed);
    cfg.total_timesteps = 1500;
    cfg.eval_every = 500;
    cfg.eval_episodes = 8;
    cfg.learner.batch_size = 32;
    cfg
}

#[test]
fn run_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short(GateKind::Sparq, 1);
    cfg.gate.epsilon_worsen = f64::INFINITY;
    let record = run_training(&cfg, &TrainHooks::default()).unwrap().record;
    let stem = write_run(dir.path(), &record).unwrap();
    let name = run_stem(&cfg.config_hash(), GateKind::Sparq, 1);
    assert_eq!(stem.file_name().unwrap().to_str().unwrap(), name);
    for ext in ["events.csv", "eval.csv", "meta.json"] {
        assert!(dir.path().join(format!("{name}.{ext}")).is_file());
    }
    let back = read_run(&dir.path().join(format!("{name}.meta.json"))).unwrap();
    assert_eq!(back, record);
    assert!(back.meta.config.gate.epsilon_worsen.is_infinite());
}

#[test]
fn event_log_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let record = run_training(&short(GateKind::Random, 0), &TrainHooks::default()).unwrap().record;
    write_run(dir.path(), &record).unwrap();
    let stem = run_stem(&record.meta.config_hash, GateKind::Random, 0);
    let events = fs::read_to_string(dir.path().join(format!("{stem}.events.csv"))).unwrap();
    assert_eq!(
        events.lines().next().unwrap(),
        "step,kind,query,reason,budget_remaining,cooldown,delta_j,episode,r_env,f,r_eff,done"
    );
    assert_eq!(events.lines().count(), 1 + 1500);
    let evals = fs::read_to_string(dir.path().join(format!("{stem}.eval.csv"))).unwrap();
    assert_eq!(evals.lines().next().unwrap(), "timestep,episode,success,final_dist,episode_return");
}

#[test]
fn corrupt_logs_are_reported_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let record = run_training(&short(GateKind::NoOracle, 0), &TrainHooks::default()).unwrap().record;
    write_run(dir.path(), &record).unwrap();
    let stem = run_stem(&record.meta.config_hash, GateKind::NoOracle, 0);
    let events = dir.path().join(format!("{stem}.events.csv"));
    let mut text = fs::read_to_string(&events).unwrap();
    text.push_str("oops,1,true\n");
    fs::write(&events, text).unwrap();
    match read_run(&dir.path().join(format!("{stem}.meta.json"))) {
        Err(Error::MalformedLog { path, .. }) => assert_eq!(path, events),
        other => panic!("expected a malformed-log error, got {other:?}"),
    }
}

#[test]
fn tables_recompute_bit_exactly_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let base = short(GateKind::Sparq, 0);
    let methods = vec![GateKind::NoOracle, GateKind::Always, GateKind::Sparq];
    let seeds = vec![0, 1];
    let cmp = compare_methods(
        &base,
        &CompareOptions {
            methods: methods.clone(),
            seeds: seeds.clone(),
            log_dir: dir.path().to_path_buf(),
            jobs: 2,
        },
    )
    .unwrap();
    assert_eq!(cmp.dir, dir.path().join(base.config_hash()));
    assert_eq!(cmp.runs.len(), 6);
    assert_eq!(cmp.table.len(), 3);
    assert_eq!(cmp.per_seed.len(), 6);
    assert!(cmp.table.iter().all(|r| r.complete && r.runs == 2));

    let on_disk = fs::read_to_string(cmp.dir.join("table.csv")).unwrap();
    assert_eq!(on_disk, emit_table(&cmp.table).unwrap());
    assert_eq!(parse_table(&on_disk).unwrap(), cmp.table);

    let runs = read_runs(&cmp.dir).unwrap();
    assert_eq!(runs, cmp.runs);
    let (table, per_seed) = table_from_runs(&runs, &methods, &seeds);
    assert_eq!(emit_table(&table).unwrap(), on_disk);
    assert_eq!(
        emit_table(&per_seed).unwrap(),
        fs::read_to_string(cmp.dir.join("table_seeds.csv")).unwrap()
    );
    for f in ["table.txt", "curves_sparq.csv", "curves_always_1.csv"] {
        assert!(cmp.dir.join(f).is_file(), "{f} missing");
    }

    let no_oracle = cmp.row(GateKind::NoOracle).unwrap();
    assert_eq!(no_oracle.budget_pct, 0.0);
    assert_eq!(no_oracle.queries_per_success, 0.0);
    let always = cmp.seed_row(GateKind::Always, 1).unwrap();
    assert!((always.budget_pct - 500.0 / 1500.0 * 100.0).abs() < 1e-9);
}

#[test]
fn parallel_and_serial_comparisons_agree() {
    let base = short(GateKind::Sparq, 0);
    let run = |jobs| {
        let dir = tempfile::tempdir().unwrap();
        let cmp = compare_methods(
            &base,
            &CompareOptions {
                methods: vec![GateKind::Random, GateKind::Sparq],
                seeds: vec![3],
                log_dir: dir.path().to_path_buf(),
                jobs,
            },
        )
        .unwrap();
        emit_table(&cmp.per_seed).unwrap()
    };
    assert_eq!(run(1), run(2));
}
