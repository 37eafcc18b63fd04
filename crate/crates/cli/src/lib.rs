//! Command implementations behind the `csinet` binary.

mod commands;
mod run;

pub use commands::{
    cmd_baseline, cmd_convert, cmd_eval, cmd_export_features, cmd_train, load_standardized,
    BaselineMethod, Dataset, TrainOutputs, CHECKPOINT_FILE, CURVE_FILE, SPEC_FILE,
};
pub use run::{fnv1a64, RunManifest, RUN_MANIFEST_FILE};

use std::fmt;

/// Invalid command-line usage detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

/// Machine-readable code for the first recognizable cause in the chain.
pub fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<csinet::Error>() {
            return e.code();
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return "E_USAGE";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "E_IO";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "E_FORMAT";
        }
    }
    "E_INTERNAL"
}

/// `error[CODE]: message` on one line.
pub fn error_line(err: &anyhow::Error) -> String {
    let text = format!("{err:#}").replace('\n', " ");
    format!("error[{}]: {text}", error_code(err))
}
