//! Oracle backends that answer queries with a corrective action π_h(s).
//!
//! The scripted expert aims straight at the cube. The human backend relays
//! the query over the console bridge and falls back to the scripted answer
//! when nobody replies in time.

mod human;
pub mod wire;

use serde::{Deserialize, Serialize};

pub use human::HumanOracle;

use crate::env::{potential, EnvAction, EnvState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSource {
    Scripted,
    Human,
    TimeoutFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResponse {
    pub action: EnvAction,
    pub source: OracleSource,
}

/// Everything an oracle gets to see when queried.
#[derive(Debug, Clone, Copy)]
pub struct OracleQuery<'a> {
    pub step: u64,
    pub state: &'a EnvState,
    pub budget_remaining: u64,
}

pub trait Oracle {
    fn respond(&mut self, query: &OracleQuery<'_>) -> OracleResponse;
}

/// Greedy expert: target the cube.
pub fn scripted_oracle(state: &EnvState) -> EnvAction {
    EnvAction {
        target_xy: state.cube_xy,
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle;

impl Oracle for ScriptedOracle {
    fn respond(&mut self, query: &OracleQuery<'_>) -> OracleResponse {
        OracleResponse {
            action: scripted_oracle(query.state),
            source: OracleSource::Scripted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    ConstantBonus,
    PotentialGain,
}

/// Functional form of the scalar feedback `f_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackMode {
    pub mode: FeedbackKind,
    pub constant: f64,
}

impl Default for FeedbackMode {
    fn default() -> Self {
        Self {
            mode: FeedbackKind::ConstantBonus,
            constant: 1.0,
        }
    }
}

/// `f_t`; identically zero on steps without a query.
pub fn feedback_value(mode: &FeedbackMode, s: &EnvState, s_next: &EnvState, queried: bool) -> f64 {
    if !queried {
        return 0.0;
    }
    match mode.mode {
        FeedbackKind::ConstantBonus => mode.constant,
        FeedbackKind::PotentialGain => potential(s_next) - potential(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, ReachEnv};
    use approx::assert_abs_diff_eq;

    fn state(cube: [f64; 2], effector: [f64; 2]) -> EnvState {
        EnvState {
            cube_xy: cube,
            effector_xy: effector,
            step_index: 0,
            done: false,
        }
    }

    #[test]
    fn scripted_targets_cube() {
        let s = state([0.3, 0.4], [0.0, 0.0]);
        assert_eq!(scripted_oracle(&s).target_xy, [0.3, 0.4]);
    }

    #[test]
    fn scripted_at_cube_finishes_in_one_step() {
        let env = ReachEnv::new(EnvConfig::default()).unwrap();
        let s = state([0.2, 0.2], [0.2, 0.2]);
        let a = scripted_oracle(&s);
        assert_eq!(a.target_xy, s.effector_xy);
        let out = env.step(&s, a).unwrap();
        assert!(out.done && out.grasped());
    }

    #[test]
    fn scripted_rollouts_always_succeed_at_optimal_speed() {
        let env = ReachEnv::new(EnvConfig::default()).unwrap();
        for seed in 0..1_000 {
            let mut s = env.reset(seed);
            let d0 = s.distance_to_cube();
            let bound = (d0 / 0.05).ceil() as usize;
            let mut steps = 0;
            let mut success = false;
            while !s.done {
                let before = s.distance_to_cube();
                let out = env.step(&s, scripted_oracle(&s)).unwrap();
                let reduced = before - out.state.distance_to_cube();
                assert_abs_diff_eq!(reduced, before.min(0.05), epsilon = 1e-12);
                success = out.grasped();
                s = out.state;
                steps += 1;
            }
            assert!(success, "seed {seed}");
            assert!(steps <= bound, "seed {seed}: {steps} > {bound}");
        }
    }

    #[test]
    fn feedback_examples() {
        let s = state([0.5, 0.0], [0.0, 0.0]);
        let s_next = state([0.5, 0.0], [0.05, 0.0]);
        let constant = FeedbackMode::default();
        let gain = FeedbackMode {
            mode: FeedbackKind::PotentialGain,
            constant: 1.0,
        };
        assert_eq!(feedback_value(&constant, &s, &s_next, false), 0.0);
        assert_eq!(feedback_value(&gain, &s, &s_next, false), 0.0);
        assert_eq!(feedback_value(&constant, &s, &s_next, true), 1.0);
        assert_abs_diff_eq!(feedback_value(&gain, &s, &s_next, true), 0.05, epsilon = 1e-12);
    }
}
