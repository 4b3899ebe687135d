use std::time::Duration;

use super::{scripted_oracle, Oracle, OracleQuery, OracleResponse, OracleSource};
use crate::env::{EnvAction, EnvState};
use crate::harness::bridge::BridgeHandle;

/// Oracle answered by a person at the console.
///
/// Blocks the caller until the console answers or `timeout` elapses; a
/// timeout, a missing session or a disconnect all resolve to the scripted
/// action tagged [`OracleSource::TimeoutFallback`].
#[derive(Debug, Clone)]
pub struct HumanOracle {
    bridge: BridgeHandle,
    timeout: Duration,
    half_extent: f64,
}

impl HumanOracle {
    pub fn new(bridge: BridgeHandle, timeout: Duration, half_extent: f64) -> Self {
        assert!(!timeout.is_zero(), "timeout must be > 0");
        Self {
            bridge,
            timeout,
            half_extent,
        }
    }

    pub fn request_human_action(&self, step: u64, state: &EnvState, budget_remaining: u64) -> OracleResponse {
        match self
            .bridge
            .request_action(step, state, budget_remaining, self.timeout)
        {
            Some([x, y]) => OracleResponse {
                action: EnvAction::new(x, y).clamped(self.half_extent),
                source: OracleSource::Human,
            },
            None => OracleResponse {
                action: scripted_oracle(state),
                source: OracleSource::TimeoutFallback,
            },
        }
    }
}

impl Oracle for HumanOracle {
    fn respond(&mut self, query: &OracleQuery<'_>) -> OracleResponse {
        self.request_human_action(query.step, query.state, query.budget_remaining)
    }
}
