//! Batch evaluation, reporting, latency benchmarking and the HTTP service
//! around the translation engine. The `scale` binary is a thin CLI on top.

pub mod bench;
pub mod config;
pub mod dataset;
mod error;
pub mod evaluate;
pub mod report;
pub mod serve;

pub use config::{HarnessConfig, MetricEndpoints};
pub use dataset::{load_dataset, DatasetRecord};
pub use error::{HarnessError, Result};
pub use evaluate::{run_evaluate, EvalOptions, EvaluationReport, SegmentRow};

use scale_core::DemoPool;

/// Loads the pool named in the config, or an empty one for zero-shot runs.
pub fn open_pool(path: Option<&std::path::Path>) -> Result<DemoPool> {
    match path {
        Some(path) => Ok(DemoPool::load(path)?),
        None => Ok(DemoPool::empty()),
    }
}
