//! Query policies and their budget/cooldown/patience bookkeeping.
//!
//! Every gate kind is budget-gated. Decisions are pure: `sparq_decide` and
//! `baseline_decide` only read the [`GateState`]; [`commit_decision`] applies
//! the outcome (budget, cooldown, patience) and returns the next state.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "strict improvement" of the running best progress value.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

/// Percentile of negative progress magnitudes used for the worsening threshold.
pub const EPSILON_PERCENTILE: f64 = 7.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    NoOracle,
    Random,
    Always,
    Sparq,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [
        GateKind::NoOracle,
        GateKind::Random,
        GateKind::Always,
        GateKind::Sparq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::NoOracle => "no_oracle",
            GateKind::Random => "random",
            GateKind::Always => "always",
            GateKind::Sparq => "sparq",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown gate kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressSignal {
    /// `ΔJ_t = Φ(s_t) − Φ(s_{t−1})` within an episode.
    StepPotential,
    /// Difference of mean episodic return between the two latest windows.
    WindowedReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub kind: GateKind,
    /// Bernoulli query probability for the random gate.
    pub p: f64,
    /// Initial query budget `B`.
    pub budget: u64,
    pub epsilon_worsen: f64,
    /// Patience `P` in steps.
    pub patience: u64,
    /// Cooldown `C` in steps.
    pub cooldown: u64,
    /// Feedback scale `λ`.
    pub lambda: f64,
    /// Per-query cost `c`.
    pub query_cost: f64,
    pub progress: ProgressSignal,
    /// Episodes per window for [`ProgressSignal::WindowedReturn`].
    pub window: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            kind: GateKind::Sparq,
            p: 0.13,
            budget: 13_300,
            epsilon_worsen: 0.006,
            patience: 60,
            cooldown: 8,
            lambda: 0.1,
            query_cost: 0.05,
            progress: ProgressSignal::StepPotential,
            window: 10,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("gate: {m}")));
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p must lie in [0, 1]");
        }
        if !(self.epsilon_worsen >= 0.0) {
            return bad("epsilon_worsen must be >= 0");
        }
        if self.patience < 1 {
            return bad("patience must be >= 1");
        }
        if !(self.query_cost >= 0.0) {
            return bad("query_cost must be >= 0");
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Worsened,
    Stagnated,
    ForcedAlways,
    RandomDraw,
    NotTriggered,
    DeniedBudget,
    DeniedCooldown,
    Disabled,
}

impl DecisionReason {
    pub const ALL: [DecisionReason; 8] = [
        DecisionReason::Worsened,
        DecisionReason::Stagnated,
        DecisionReason::ForcedAlways,
        DecisionReason::RandomDraw,
        DecisionReason::NotTriggered,
        DecisionReason::DeniedBudget,
        DecisionReason::DeniedCooldown,
        DecisionReason::Disabled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionReason::Worsened => "worsened",
            DecisionReason::Stagnated => "stagnated",
            DecisionReason::ForcedAlways => "forced_always",
            DecisionReason::RandomDraw => "random_draw",
            DecisionReason::NotTriggered => "not_triggered",
            DecisionReason::DeniedBudget => "denied_budget",
            DecisionReason::DeniedCooldown => "denied_cooldown",
            DecisionReason::Disabled => "disabled",
        }
    }

    /// Reasons that may accompany `query = true`.
    pub fn is_query_reason(self) -> bool {
        matches!(
            self,
            DecisionReason::Worsened
                | DecisionReason::Stagnated
                | DecisionReason::ForcedAlways
                | DecisionReason::RandomDraw
        )
    }
}

impl fmt::Display for DecisionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecisionReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown decision reason `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryDecision {
    pub query: bool,
    pub reason: DecisionReason,
}

impl QueryDecision {
    pub fn yes(reason: DecisionReason) -> Self {
        debug_assert!(reason.is_query_reason());
        Self {
            query: true,
            reason,
        }
    }

    pub fn no(reason: DecisionReason) -> Self {
        debug_assert!(!reason.is_query_reason());
        Self {
            query: false,
            reason,
        }
    }
}

/// One reading of the progress proxy.
///
/// `level` is the quantity whose running best drives the patience counter
/// (the potential itself in step mode, the latest window mean in windowed
/// mode). When `reset_reference` is set the running best is re-anchored to
/// `level`; the sample never counts as an improvement in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressSample {
    pub delta_j: f64,
    pub signal: ProgressSignal,
    pub level: f64,
    pub reset_reference: bool,
}

impl ProgressSample {
    /// A step-mode sample with no reference reset. Handy for driving the gate directly.
    pub fn step(delta_j: f64, level: f64) -> Self {
        Self {
            delta_j,
            signal: ProgressSignal::StepPotential,
            level,
            reset_reference: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProgressTracker {
    signal: ProgressSignal,
    window: usize,
    last_potential: Option<f64>,
    returns: VecDeque<f64>,
}

impl ProgressTracker {
    pub fn new(signal: ProgressSignal, window: usize) -> Self {
        assert!(window > 0, "window must be > 0");
        Self {
            signal,
            window,
            last_potential: None,
            returns: VecDeque::with_capacity(2 * window),
        }
    }

    pub fn signal(&self) -> ProgressSignal {
        self.signal
    }

    /// Marks an episode boundary; the next step-mode sample yields `ΔJ = 0`.
    pub fn begin_episode(&mut self) {
        self.last_potential = None;
    }

    /// Feeds the potential of the current state and returns `ΔJ_t`.
    pub fn observe_step(&mut self, potential: f64) -> ProgressSample {
        let first = self.last_potential.is_none();
        let prev = self.last_potential.replace(potential);
        match self.signal {
            ProgressSignal::StepPotential => ProgressSample {
                delta_j: prev.map_or(0.0, |p| potential - p),
                signal: self.signal,
                level: potential,
                reset_reference: first,
            },
            ProgressSignal::WindowedReturn => {
                let (latest, previous) = self.window_means();
                ProgressSample {
                    delta_j: match (latest, previous) {
                        (Some(l), Some(p)) => l - p,
                        _ => 0.0,
                    },
                    signal: self.signal,
                    level: latest.unwrap_or(f64::NEG_INFINITY),
                    reset_reference: false,
                }
            }
        }
    }

    /// Records a completed episode's return (used by the windowed signal).
    pub fn record_episode_return(&mut self, ret: f64) {
        if self.returns.len() == 2 * self.window {
            self.returns.pop_front();
        }
        self.returns.push_back(ret);
    }

    fn window_means(&self) -> (Option<f64>, Option<f64>) {
        let n = self.returns.len();
        let w = self.window;
        let mean = |it: std::collections::vec_deque::Iter<'_, f64>, k: usize| {
            it.sum::<f64>() / k as f64
        };
        let latest = (n >= w).then(|| mean(self.returns.range(n - w..), w));
        let previous = (n >= 2 * w).then(|| mean(self.returns.range(n - 2 * w..n - w), w));
        (latest, previous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateState {
    pub budget_remaining: u64,
    pub cooldown_remaining: u64,
    pub steps_since_improvement: u64,
    pub best_progress_value: f64,
    pub queries_made: u64,
}

impl GateState {
    pub fn new(cfg: &GateConfig) -> Self {
        Self {
            budget_remaining: cfg.budget,
            cooldown_remaining: 0,
            steps_since_improvement: 0,
            best_progress_value: f64::NEG_INFINITY,
            queries_made: 0,
        }
    }

    /// Patience bookkeeping after absorbing `progress`: `(counter, best)`.
    pub fn patience_after(&self, progress: &ProgressSample) -> (u64, f64) {
        if progress.reset_reference {
            (self.steps_since_improvement + 1, progress.level)
        } else if progress.level > self.best_progress_value + IMPROVEMENT_TOLERANCE {
            (0, progress.level)
        } else {
            (self.steps_since_improvement + 1, self.best_progress_value)
        }
    }
}

/// Progress-aware rule: query iff cooldown is 0, budget remains, and the
/// progress worsened by more than `ε_worsen` or has not improved for `P` steps
/// (counting the current sample).
pub fn sparq_decide(state: &GateState, cfg: &GateConfig, progress: &ProgressSample) -> QueryDecision {
    debug_assert_eq!(cfg.kind, GateKind::Sparq);
    if state.budget_remaining == 0 {
        return QueryDecision::no(DecisionReason::DeniedBudget);
    }
    if state.cooldown_remaining > 0 {
        return QueryDecision::no(DecisionReason::DeniedCooldown);
    }
    if progress.delta_j < -cfg.epsilon_worsen {
        return QueryDecision::yes(DecisionReason::Worsened);
    }
    let (stale_steps, _) = state.patience_after(progress);
    if stale_steps >= cfg.patience {
        return QueryDecision::yes(DecisionReason::Stagnated);
    }
    QueryDecision::no(DecisionReason::NotTriggered)
}

/// No-oracle, always and random gates. The random gate draws exactly one
/// uniform per call, regardless of the budget, so the draw stream is fixed.
pub fn baseline_decide<R: Rng + ?Sized>(state: &GateState, cfg: &GateConfig, rng: &mut R) -> QueryDecision {
    match cfg.kind {
        GateKind::NoOracle => QueryDecision::no(DecisionReason::Disabled),
        GateKind::Always => {
            if state.budget_remaining > 0 {
                QueryDecision::yes(DecisionReason::ForcedAlways)
            } else {
                QueryDecision::no(DecisionReason::DeniedBudget)
            }
        }
        GateKind::Random => {
            let draw = rng.random::<f64>() < cfg.p;
            if state.budget_remaining == 0 {
                QueryDecision::no(DecisionReason::DeniedBudget)
            } else if draw {
                QueryDecision::yes(DecisionReason::RandomDraw)
            } else {
                QueryDecision::no(DecisionReason::NotTriggered)
            }
        }
        GateKind::Sparq => panic!("baseline_decide called with the sparq gate"),
    }
}

/// Dispatches to the decision rule of `cfg.kind`.
pub fn decide<R: Rng + ?Sized>(
    state: &GateState,
    cfg: &GateConfig,
    progress: &ProgressSample,
    rng: &mut R,
) -> QueryDecision {
    match cfg.kind {
        GateKind::Sparq => sparq_decide(state, cfg, progress),
        _ => baseline_decide(state, cfg, rng),
    }
}

pub fn commit_decision(
    state: &GateState,
    decision: &QueryDecision,
    cfg: &GateConfig,
    progress: &ProgressSample,
) -> Result<GateState> {
    let (steps_since_improvement, best_progress_value) = state.patience_after(progress);
    let mut next = GateState {
        steps_since_improvement,
        best_progress_value,
        ..state.clone()
    };
    if decision.query {
        if state.budget_remaining == 0 {
            return Err(Error::BudgetUnderflow);
        }
        next.budget_remaining -= 1;
        next.queries_made += 1;
        next.cooldown_remaining = cfg.cooldown;
    } else {
        next.cooldown_remaining = state.cooldown_remaining.saturating_sub(1);
    }
    Ok(next)
}

/// `r_eff = r_env + λ·f − c·q`.
pub fn effective_reward(r_env: f64, f: f64, queried: bool, cfg: &GateConfig) -> f64 {
    let q = if queried { 1.0 } else { 0.0 };
    r_env + cfg.lambda * f - cfg.query_cost * q
}

/// Linear-interpolation percentile (`p` in percent) of an unsorted sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Worsening threshold from early progress samples: the 7.5th percentile of
/// the magnitudes of the negative ones.
pub fn calibrate_epsilon_worsen(early_samples: &[f64]) -> Result<f64> {
    let magnitudes: Vec<f64> = early_samples
        .iter()
        .filter(|d| **d < 0.0)
        .map(|d| d.abs())
        .collect();
    if magnitudes.is_empty() {
        return Err(Error::NoWorseningObserved);
    }
    Ok(percentile(&magnitudes, EPSILON_PERCENTILE))
}

/// Doubles the cooldown when the observed query rate is more than 20% above
/// target, halves it when more than 20% below, and leaves it alone otherwise.
pub fn calibrate_cooldown(
    observed_query_rate: f64,
    target_budget_fraction: f64,
    current_cooldown: u64,
    max_cooldown: u64,
) -> u64 {
    assert!(
        target_budget_fraction > 0.0 && target_budget_fraction <= 1.0,
        "target_budget_fraction must lie in (0, 1]"
    );
    if observed_query_rate > target_budget_fraction * 1.2 {
        (current_cooldown.max(1) * 2).min(max_cooldown)
    } else if observed_query_rate < target_budget_fraction * 0.8 {
        current_cooldown / 2
    } else {
        current_cooldown
    }
}
