//! Kinematic planar reach-and-grasp task.
//!
//! The effector starts at the origin and moves toward a commanded target
//! by at most `max_step_size` per step. An episode ends when the effector
//! comes within `grasp_threshold` of the cube or when the step limit is hit.
//! Reward is a sparse `+1` on grasp plus the shaping term `γΦ(s′) − Φ(s)`
//! with `Φ(s) = −‖effector − cube‖`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in workspace units.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn clamp_point(p: Point, half_extent: f64) -> Point {
    [
        p[0].clamp(-half_extent, half_extent),
        p[1].clamp(-half_extent, half_extent),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub grasp_threshold: f64,
    pub max_episode_steps: usize,
    pub max_step_size: f64,
    pub gamma: f64,
    pub workspace_half_extent: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            grasp_threshold: 0.01,
            max_episode_steps: 50,
            max_step_size: 0.05,
            gamma: 0.99,
            workspace_half_extent: 0.5,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("env: {m}")));
        if !(self.grasp_threshold > 0.0) {
            return bad("grasp_threshold must be > 0");
        }
        if !(self.max_step_size > 0.0) {
            return bad("max_step_size must be > 0");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.workspace_half_extent > 0.0) {
            return bad("workspace_half_extent must be > 0");
        }
        if self.max_episode_steps == 0 {
            return bad("max_episode_steps must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub cube_xy: Point,
    pub effector_xy: Point,
    pub step_index: usize,
    pub done: bool,
}

impl EnvState {
    pub fn distance_to_cube(&self) -> f64 {
        distance(self.effector_xy, self.cube_xy)
    }

    /// Observation vector fed to the learner: `cube ⊕ effector`.
    pub fn observation(&self) -> [f64; 4] {
        [
            self.cube_xy[0],
            self.cube_xy[1],
            self.effector_xy[0],
            self.effector_xy[1],
        ]
    }
}

/// Commanded end-effector target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvAction {
    pub target_xy: Point,
}

impl EnvAction {
    pub fn new(x: f64, y: f64) -> Self {
        Self { target_xy: [x, y] }
    }

    pub fn clamped(self, half_extent: f64) -> Self {
        Self {
            target_xy: clamp_point(self.target_xy, half_extent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub sparse: f64,
    pub shaping: f64,
    pub env_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: RewardBreakdown,
    pub done: bool,
}

impl StepOutcome {
    pub fn grasped(&self) -> bool {
        self.reward.sparse > 0.0
    }
}

/// Shaping potential `Φ(s) = −‖effector − cube‖₂`.
pub fn potential(state: &EnvState) -> f64 {
    -state.distance_to_cube()
}

#[derive(Debug, Clone)]
pub struct ReachEnv {
    cfg: EnvConfig,
}

impl ReachEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.cfg.workspace_half_extent;
        let effector_xy = [0.0, 0.0];
        // Cubes that would already count as grasped at the origin are redrawn.
        let cube_xy = loop {
            let c = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
            if distance(c, effector_xy) >= self.cfg.grasp_threshold {
                break c;
            }
        };
        EnvState {
            cube_xy,
            effector_xy,
            step_index: 0,
            done: false,
        }
    }

    pub fn step(&self, state: &EnvState, action: EnvAction) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::EpisodeFinished);
        }
        let h = self.cfg.workspace_half_extent;
        let target = action.clamped(h).target_xy;
        let from = state.effector_xy;
        let delta = [target[0] - from[0], target[1] - from[1]];
        let len = delta[0].hypot(delta[1]);
        // The small slack keeps exact-length moves (e.g. a 3-4-5 step) from
        // being rescaled by one ulp.
        let moved = if len <= self.cfg.max_step_size + 1e-12 {
            target
        } else {
            let scale = self.cfg.max_step_size / len;
            [from[0] + delta[0] * scale, from[1] + delta[1] * scale]
        };
        let next = EnvState {
            cube_xy: state.cube_xy,
            effector_xy: clamp_point(moved, h),
            step_index: state.step_index + 1,
            done: false,
        };
        let grasped = next.distance_to_cube() < self.cfg.grasp_threshold;
        let done = grasped || next.step_index >= self.cfg.max_episode_steps;
        let next = EnvState { done, ..next };

        let sparse = if grasped { 1.0 } else { 0.0 };
        let shaping = self.cfg.gamma * potential(&next) - potential(state);
        Ok(StepOutcome {
            state: next,
            reward: RewardBreakdown {
                sparse,
                shaping,
                env_total: sparse + shaping,
            },
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env() -> ReachEnv {
        ReachEnv::new(EnvConfig::default()).unwrap()
    }

    fn state_at(cube: Point, effector: Point) -> EnvState {
        EnvState {
            cube_xy: cube,
            effector_xy: effector,
            step_index: 0,
            done: false,
        }
    }

    #[test]
    fn reset_is_deterministic() {
        let env = env();
        let a = env.reset(42);
        let b = env.reset(42);
        assert_eq!(a.cube_xy[0].to_bits(), b.cube_xy[0].to_bits());
        assert_eq!(a.cube_xy[1].to_bits(), b.cube_xy[1].to_bits());
        assert_eq!(a, b);
        assert_eq!(a.effector_xy, [0.0, 0.0]);
        assert_eq!(a.step_index, 0);
    }

    #[test]
    fn reset_samples_uniformly() {
        let env = env();
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for seed in 0..n {
            let s = env.reset(seed);
            assert!(s.cube_xy.iter().all(|c| c.abs() <= 0.5));
            sx += s.cube_xy[0];
            sy += s.cube_xy[1];
        }
        assert!((sx / n as f64).abs() < 0.02);
        assert!((sy / n as f64).abs() < 0.02);
    }

    #[test]
    fn short_move_lands_on_target() {
        let out = env()
            .step(&state_at([0.4, 0.4], [0.0, 0.0]), EnvAction::new(0.03, 0.04))
            .unwrap();
        assert_eq!(out.state.effector_xy, [0.03, 0.04]);
        assert_eq!(out.state.step_index, 1);
    }

    #[test]
    fn long_move_is_capped() {
        let out = env()
            .step(&state_at([0.4, -0.4], [0.0, 0.0]), EnvAction::new(0.3, 0.4))
            .unwrap();
        assert_abs_diff_eq!(out.state.effector_xy[0], 0.03, epsilon = 1e-12);
        assert_abs_diff_eq!(out.state.effector_xy[1], 0.04, epsilon = 1e-12);
    }

    #[test]
    fn landing_near_cube_grasps() {
        let out = env()
            .step(&state_at([0.02, 0.0], [0.0, 0.0]), EnvAction::new(0.015, 0.0))
            .unwrap();
        assert_eq!(out.reward.sparse, 1.0);
        assert!(out.done && out.state.done);
    }

    #[test]
    fn stepping_done_state_fails() {
        let mut s = state_at([0.2, 0.2], [0.0, 0.0]);
        s.done = true;
        let err = env().step(&s, EnvAction::new(0.0, 0.0)).unwrap_err();
        assert_eq!(err.to_string(), "episode finished");
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential(&state_at([0.1, 0.1], [0.1, 0.1])), 0.0);
        assert_abs_diff_eq!(
            potential(&state_at([0.3, 0.4], [0.0, 0.0])),
            -0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn step_limit_ends_episode() {
        let env = env();
        let mut s = state_at([0.4, 0.4], [0.0, 0.0]);
        let mut steps = 0;
        while !s.done {
            s = env.step(&s, EnvAction::new(-0.5, -0.5)).unwrap().state;
            steps += 1;
        }
        assert_eq!(steps, 50);
        assert_eq!(s.step_index, 50);
    }

    #[test]
    fn out_of_range_targets_are_clamped() {
        let env = env();
        let mut s = state_at([0.0, 0.3], [0.45, 0.45]);
        for _ in 0..10 {
            if s.done {
                break;
            }
            s = env.step(&s, EnvAction::new(3.0, 3.0)).unwrap().state;
            assert!(s.effector_xy.iter().all(|c| c.abs() <= 0.5));
        }
        assert_eq!(s.effector_xy, [0.5, 0.5]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EnvConfig::default();
        cfg.gamma = 1.5;
        assert!(ReachEnv::new(cfg).is_err());
        let mut cfg = EnvConfig::default();
        cfg.grasp_threshold = 0.0;
        assert!(ReachEnv::new(cfg).is_err());
    }
}
