use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparq_core::env::{potential, EnvAction, EnvConfig, ReachEnv};
use sparq_core::gate::{
    commit_decision, decide, DecisionReason, GateConfig, GateKind, GateState, ProgressSignal, ProgressTracker,
};

/// Runs a gate over a stream of potentials; `true` entries in `resets` start
/// a new episode before that step.
fn drive(cfg: &GateConfig, potentials: &[f64], resets: &[bool], seed: u64) -> Vec<(bool, DecisionReason)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = ProgressTracker::new(ProgressSignal::StepPotential, 10);
    let mut state = GateState::new(cfg);
    let mut out = Vec::with_capacity(potentials.len());
    for (i, &phi) in potentials.iter().enumerate() {
        if resets.get(i).copied().unwrap_or(false) {
            tracker.begin_episode();
        }
        let progress = tracker.observe_step(phi);
        let d = decide(&state, cfg, &progress, &mut rng);
        let next = commit_decision(&state, &d, cfg, &progress).unwrap();
        out.push((d.query, d.reason));
        state = next;
    }
    out
}

fn gate(kind: GateKind) -> GateConfig {
    GateConfig {
        kind,
        ..GateConfig::default()
    }
}

fn stream() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..400).prop_flat_map(|n| {
        (
            prop::collection::vec(-0.8f64..0.0, n),
            prop::collection::vec(prop::bool::weighted(0.05), n),
        )
    })
}

#[test]
fn shaping_telescopes_over_rollouts() {
    let cfg = EnvConfig::default();
    let env = ReachEnv::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s0 = env.reset(rng.random());
        let mut s = s0;
        let mut discounted = 0.0;
        let mut g = 1.0;
        while !s.done {
            let a = EnvAction::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
            let out = env.step(&s, a).unwrap();
            discounted += g * out.reward.shaping;
            g *= cfg.gamma;
            s = out.state;
        }
        let closed = g * potential(&s) - potential(&s0);
        worst = worst.max((discounted - closed).abs());
    }
    assert!(worst < 1e-9, "telescoping residual {worst:e}");
}

#[test]
fn random_gate_rate_over_a_long_run() {
    let cfg = GateConfig {
        kind: GateKind::Random,
        p: 0.13,
        budget: u64::MAX,
        ..GateConfig::default()
    };
    let n = 50_000;
    let decisions = drive(&cfg, &vec![-0.3; n], &[], 2024);
    let rate = decisions.iter().filter(|d| d.0).count() as f64 / n as f64;
    assert!((rate - 0.13).abs() <= 0.01, "rate {rate}");
}

proptest! {
    #[test]
    fn every_gate_respects_its_budget(
        (phis, resets) in stream(),
        budget in 0u64..50,
        cooldown in 0u64..6,
        patience in 1u64..8,
        kind_ix in 0usize..4,
        seed in any::<u64>(),
    ) {
        let cfg = GateConfig {
            budget,
            cooldown,
            patience,
            epsilon_worsen: 0.01,
            p: 0.4,
            ..gate(GateKind::ALL[kind_ix])
        };
        let d = drive(&cfg, &phis, &resets, seed);
        let used = d.iter().filter(|x| x.0).count() as u64;
        prop_assert!(used <= budget);
        for (q, r) in &d {
            prop_assert_eq!(*q, r.is_query_reason());
        }
    }

    #[test]
    fn sparq_queries_are_separated_by_the_cooldown(
        (phis, resets) in stream(),
        cooldown in 0u64..12,
        patience in 1u64..8,
        eps in 0.0f64..0.05,
    ) {
        let cfg = GateConfig {
            budget: u64::MAX,
            cooldown,
            patience,
            epsilon_worsen: eps,
            ..gate(GateKind::Sparq)
        };
        let d = drive(&cfg, &phis, &resets, 0);
        let steps: Vec<usize> = d.iter().enumerate().filter(|(_, x)| x.0).map(|(i, _)| i).collect();
        for w in steps.windows(2) {
            prop_assert!((w[1] - w[0]) as u64 >= cooldown + 1);
        }
    }

    #[test]
    fn unreachable_sparq_never_queries((phis, resets) in stream()) {
        let cfg = GateConfig {
            budget: u64::MAX,
            cooldown: 0,
            epsilon_worsen: f64::INFINITY,
            patience: phis.len() as u64 + 1,
            ..gate(GateKind::Sparq)
        };
        prop_assert!(drive(&cfg, &phis, &resets, 0).iter().all(|x| !x.0));
    }

    #[test]
    fn certain_random_matches_always(
        (phis, resets) in stream(),
        budget in 0u64..500,
        seed in any::<u64>(),
    ) {
        let always = GateConfig { budget, ..gate(GateKind::Always) };
        let random = GateConfig { budget, p: 1.0, ..gate(GateKind::Random) };
        let a: Vec<bool> = drive(&always, &phis, &resets, seed).iter().map(|x| x.0).collect();
        let r: Vec<bool> = drive(&random, &phis, &resets, seed ^ 1).iter().map(|x| x.0).collect();
        prop_assert_eq!(&a, &r);
        prop_assert_eq!(a.iter().filter(|q| **q).count() as u64, budget.min(phis.len() as u64));
    }

    #[test]
    fn eager_sparq_fires_on_every_step_without_a_new_best(
        (phis, resets) in stream(),
    ) {
        let cfg = GateConfig {
            budget: u64::MAX,
            cooldown: 0,
            patience: 1,
            epsilon_worsen: 0.0,
            ..gate(GateKind::Sparq)
        };
        let d = drive(&cfg, &phis, &resets, 0);
        let mut best = f64::NEG_INFINITY;
        for (i, &phi) in phis.iter().enumerate() {
            let episode_start = i == 0 || resets[i];
            let new_best = !episode_start && phi > best + 1e-9;
            if episode_start || new_best {
                best = phi;
            }
            prop_assert_eq!(d[i].0, !new_best, "step {}", i);
        }
    }

    #[test]
    fn no_oracle_is_inert((phis, resets) in stream(), budget in 0u64..100) {
        let cfg = GateConfig { budget, ..gate(GateKind::NoOracle) };
        prop_assert!(drive(&cfg, &phis, &resets, 0).iter().all(|x| !x.0 && x.1 == DecisionReason::Disabled));
    }
}
