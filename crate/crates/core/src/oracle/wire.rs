//! Newline-delimited JSON messages exchanged with the oracle console.
//!
//! Field names are normative. Unknown fields are ignored on input.

use serde::{Deserialize, Serialize};

use crate::env::EnvState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireState {
    pub cube: [f64; 2],
    pub effector: [f64; 2],
}

impl From<&EnvState> for WireState {
    fn from(s: &EnvState) -> Self {
        Self {
            cube: s.cube_xy,
            effector: s.effector_xy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    QueryRequest {
        session: String,
        run_id: String,
        step: u64,
        state: WireState,
        budget_remaining: u64,
        timeout_ms: u64,
    },
    OracleResponse {
        session: String,
        step: u64,
        action: [f64; 2],
    },
    StepUpdate {
        step: u64,
        state: WireState,
        queried: bool,
        reward: f64,
        episode_return: f64,
    },
    Error {
        message: String,
    },
}

impl Message {
    pub fn error(message: impl Into<String>) -> Self {
        Message::Error {
            message: message.into(),
        }
    }

    /// One protocol line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn parse(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line.trim())
    }
}
