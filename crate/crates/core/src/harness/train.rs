//! The training loop: policy proposal, gate, oracle substitution, effective
//! reward, replay, SAC update and periodic evaluation.

use std::time::Duration;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bridge::BridgeHandle;
use super::config::{OracleBackend, RunConfig};
use super::eval::{evaluate, GreedyAgent};
use crate::env::{potential, EnvAction, ReachEnv};
use crate::error::Result;
use crate::gate::{commit_decision, decide, effective_reward, DecisionReason, GateKind, GateState, ProgressTracker, QueryDecision};
use crate::learner::{from_workspace, to_workspace, Batch, ReplayBuffer, SacAgent, Transition, UpdateStats};
use crate::oracle::{feedback_value, HumanOracle, Oracle, OracleQuery, OracleSource, ScriptedOracle};

const STREAM_INIT: u64 = 1;
const STREAM_RESET: u64 = 2;
const STREAM_ACTION: u64 = 3;
const STREAM_GATE: u64 = 4;
const STREAM_UPDATE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One row of the per-step event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub step: u64,
    pub kind: GateKind,
    pub query: bool,
    pub reason: DecisionReason,
    pub budget_remaining: u64,
    pub cooldown: u64,
    pub delta_j: f64,
    pub episode: u64,
    pub r_env: f64,
    pub f: f64,
    pub r_eff: f64,
    pub done: bool,
}

/// One evaluation episode, keyed by the training timestep it was run at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub timestep: u64,
    pub episode: usize,
    pub success: bool,
    pub final_dist: f64,
    pub episode_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "message")]
pub enum RunStatus {
    Completed,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: GateKind,
    pub seed: u64,
    pub config_hash: String,
    #[serde(with = "config_as_toml")]
    pub config: RunConfig,
    pub status: RunStatus,
    pub steps_completed: u64,
    pub initial_budget: u64,
    pub final_budget_remaining: u64,
    pub queries: u64,
    pub episodes: u64,
    pub human_answers: u64,
    pub fallback_answers: u64,
    pub final_params_hash: String,
}

// JSON cannot carry infinite thresholds, so the config travels as TOML text.
mod config_as_toml {
    use serde::{de::Error as _, ser::Error as _, Deserialize, Deserializer, Serializer};

    use crate::harness::config::RunConfig;

    pub fn serialize<S: Serializer>(cfg: &RunConfig, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&cfg.to_toml_string().map_err(S::Error::custom)?)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RunConfig, D::Error> {
        let text = String::deserialize(d)?;
        toml::from_str(&text).map_err(D::Error::custom)
    }
}

/// Everything a run leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub events: Vec<EventRow>,
    pub evals: Vec<EvalRow>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHooks {
    /// Console bridge for the human oracle backend and telemetry.
    pub bridge: Option<BridgeHandle>,
}

pub struct TrainOutcome {
    pub agent: SacAgent<f32>,
    pub record: RunRecord,
}

enum Backend {
    Scripted(ScriptedOracle),
    Human(HumanOracle),
    Unattended,
}

impl Backend {
    fn respond(&mut self, query: &OracleQuery<'_>) -> crate::oracle::OracleResponse {
        match self {
            Backend::Scripted(o) => o.respond(query),
            Backend::Human(o) => o.respond(query),
            Backend::Unattended => crate::oracle::OracleResponse {
                action: crate::oracle::scripted_oracle(query.state),
                source: OracleSource::TimeoutFallback,
            },
        }
    }
}

struct Loop {
    cfg: RunConfig,
    env: ReachEnv,
    agent: SacAgent<f32>,
    replay: ReplayBuffer,
    gate: GateState,
    tracker: ProgressTracker,
    oracle: Backend,
    bridge: Option<BridgeHandle>,
    events: Vec<EventRow>,
    evals: Vec<EvalRow>,
    episodes: u64,
    human_answers: u64,
    fallback_answers: u64,
    last_stats: Option<UpdateStats>,
}

impl Loop {
    fn meta(&self, status: RunStatus, steps_completed: u64) -> RunMeta {
        RunMeta {
            method: self.cfg.gate.kind,
            seed: self.cfg.seed,
            config_hash: self.cfg.config_hash(),
            config: self.cfg.clone(),
            status,
            steps_completed,
            initial_budget: self.cfg.gate.budget,
            final_budget_remaining: self.gate.budget_remaining,
            queries: self.gate.queries_made,
            episodes: self.episodes,
            human_answers: self.human_answers,
            fallback_answers: self.fallback_answers,
            final_params_hash: self.agent.params_hash(),
        }
    }

    fn run_eval(&mut self, timestep: u64) -> Result<()> {
        let policy = GreedyAgent {
            agent: &self.agent,
            half_extent: self.cfg.env.workspace_half_extent,
        };
        let result = evaluate(&policy, &self.cfg.env, self.cfg.eval_episodes, self.cfg.seed)?;
        log::debug!(
            "{} seed {} t={timestep}: success {:.2} dist {:.4} queries {} alpha {:.4} {:?}",
            self.cfg.gate.kind,
            self.cfg.seed,
            result.success_rate,
            result.final_dist_median,
            self.gate.queries_made,
            self.agent.alpha(),
            self.last_stats,
        );
        self.evals.extend(result.episodes.iter().enumerate().map(|(i, e)| EvalRow {
            timestep,
            episode: i,
            success: e.success,
            final_dist: e.final_dist,
            episode_return: e.episode_return,
        }));
        Ok(())
    }

    fn train(&mut self) -> Result<()> {
        let cfg = self.cfg.clone();
        let h = cfg.env.workspace_half_extent;
        let mut reset_rng = stream(cfg.seed, STREAM_RESET);
        let mut action_rng = stream(cfg.seed, STREAM_ACTION);
        let mut gate_rng = stream(cfg.seed, STREAM_GATE);
        let mut update_rng = stream(cfg.seed, STREAM_UPDATE);

        let mut state = self.env.reset(reset_rng.next_u64());
        self.tracker.begin_episode();
        let mut episode_return = 0.0;
        for t in 0..cfg.total_timesteps {
            let raw = if t < cfg.learner.warmup_steps {
                [action_rng.random_range(-1.0..=1.0), action_rng.random_range(-1.0..=1.0)]
            } else {
                self.agent.act(&state.observation(), false, &mut action_rng)
            };

            let progress = self.tracker.observe_step(potential(&state));
            let decision = if t < cfg.learner.warmup_steps {
                QueryDecision::no(DecisionReason::Disabled)
            } else {
                decide(&self.gate, &cfg.gate, &progress, &mut gate_rng)
            };
            let budget_before = self.gate.budget_remaining;
            self.gate = commit_decision(&self.gate, &decision, &cfg.gate, &progress)?;

            let (executed, stored): (EnvAction, [f64; 2]) = if decision.query {
                let response = self.oracle.respond(&OracleQuery {
                    step: t,
                    state: &state,
                    budget_remaining: budget_before,
                });
                match response.source {
                    OracleSource::Human => self.human_answers += 1,
                    OracleSource::TimeoutFallback => self.fallback_answers += 1,
                    OracleSource::Scripted => {}
                }
                let target = response.action.clamped(h);
                (target, from_workspace(target, h))
            } else {
                (to_workspace(raw, h), raw)
            };

            let out = self.env.step(&state, executed)?;
            let f = feedback_value(&cfg.feedback, &state, &out.state, decision.query);
            let r_eff = effective_reward(out.reward.env_total, f, decision.query, &cfg.gate);
            self.replay.push(Transition {
                s: state.observation(),
                a: stored,
                s_next: out.state.observation(),
                r_eff,
                done: out.grasped(),
                queried: decision.query,
            });
            episode_return += out.reward.env_total;
            self.events.push(EventRow {
                step: t,
                kind: cfg.gate.kind,
                query: decision.query,
                reason: decision.reason,
                budget_remaining: self.gate.budget_remaining,
                cooldown: self.gate.cooldown_remaining,
                delta_j: progress.delta_j,
                episode: self.episodes,
                r_env: out.reward.env_total,
                f,
                r_eff,
                done: out.done,
            });
            if let Some(b) = &self.bridge {
                b.send_step_update(t, &out.state, decision.query, r_eff, episode_return);
            }

            if t >= cfg.learner.warmup_steps {
                for _ in 0..cfg.learner.updates_per_step {
                    let idx = self.replay.sample_indices(cfg.learner.batch_size, &mut update_rng);
                    let batch = Batch::<f32>::from_transitions(&self.replay.gather(&idx));
                    self.last_stats = Some(self.agent.update(&batch, &idx, &mut update_rng)?);
                }
            }

            if out.done {
                self.tracker.record_episode_return(episode_return);
                self.episodes += 1;
                episode_return = 0.0;
                state = self.env.reset(reset_rng.next_u64());
                self.tracker.begin_episode();
            } else {
                state = out.state;
            }

            if (t + 1) % cfg.eval_every == 0 || t + 1 == cfg.total_timesteps {
                self.run_eval(t + 1)?;
            }
        }
        Ok(())
    }
}

/// Trains one agent. Errors before the first step (invalid configuration)
/// and learner aborts are both returned as `Err`; see [`run_training_logged`]
/// for a variant that keeps the partial log of an aborted run.
pub fn run_training(cfg: &RunConfig, hooks: &TrainHooks) -> Result<TrainOutcome> {
    let (outcome, err) = run_training_logged(cfg, hooks)?;
    match err {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

/// Like [`run_training`], but an abort mid-run still yields the record so
/// far (status `aborted`) alongside the error.
pub fn run_training_logged(
    cfg: &RunConfig,
    hooks: &TrainHooks,
) -> Result<(TrainOutcome, Option<crate::error::Error>)> {
    cfg.validate()?;
    let env = ReachEnv::new(cfg.env.clone())?;
    let agent = SacAgent::<f32>::new(&cfg.learner, &mut stream(cfg.seed, STREAM_INIT))?;
    let oracle = match (cfg.oracle_backend, &hooks.bridge) {
        (OracleBackend::Scripted, _) => Backend::Scripted(ScriptedOracle),
        (OracleBackend::Human, Some(b)) => Backend::Human(HumanOracle::new(
            b.clone(),
            Duration::from_millis(cfg.human_timeout_ms),
            cfg.env.workspace_half_extent,
        )),
        (OracleBackend::Human, None) => Backend::Unattended,
    };
    let mut lp = Loop {
        env,
        agent,
        replay: ReplayBuffer::new(cfg.learner.replay_capacity),
        gate: GateState::new(&cfg.gate),
        tracker: ProgressTracker::new(cfg.gate.progress, cfg.gate.window),
        oracle,
        bridge: hooks.bridge.clone(),
        events: Vec::with_capacity(cfg.total_timesteps as usize),
        evals: Vec::new(),
        episodes: 0,
        human_answers: 0,
        fallback_answers: 0,
        last_stats: None,
        cfg: cfg.clone(),
    };
    let result = lp.train();
    let steps = lp.events.len() as u64;
    let (status, err) = match result {
        Ok(()) => (RunStatus::Completed, None),
        Err(e) => (RunStatus::Aborted(e.to_string()), Some(e)),
    };
    let meta = lp.meta(status, steps);
    let record = RunRecord {
        meta,
        events: lp.events,
        evals: lp.evals,
    };
    Ok((TrainOutcome { agent: lp.agent, record }, err))
}
