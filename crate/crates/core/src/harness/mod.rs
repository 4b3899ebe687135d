//! Training runs, evaluation, metrics, method comparison and the console
//! bridge.

pub mod bridge;
pub mod compare;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod train;

pub use bridge::{BridgeHandle, OracleBridge, SessionPolicy};
pub use compare::{compare_methods, log_dir, CompareOptions, Comparison};
pub use config::{OracleBackend, RunConfig};
pub use eval::{evaluate, EvalResult, Policy};
pub use metrics::{cost_adjusted_return, MetricsRow};
pub use train::{run_training, EventRow, RunRecord, TrainHooks};
