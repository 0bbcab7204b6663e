//! Exit-code contract: 0 success, 2 usage/config error, 3 numerical
//! divergence, 4 I/O error. Anything else (internal bugs) exits 1.

use fast3r_core::losses::LossError;
use fast3r_core::metrics::MetricsError;
use fast3r_core::model::ModelError;
use fast3r_core::pose::PoseError;
use fast3r_core::synthgen::SynthError;
use fast3r_core::trainer::TrainError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Bad or unreadable configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Structural mismatch between input files (view counts, sample counts).
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "schema error: {}", self.0)
    }
}

impl std::error::Error for SchemaError {}

pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some()
            || cause.downcast_ref::<SchemaError>().is_some()
        {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return match e {
                ModelError::Io(_) | ModelError::Format(_) => EXIT_IO,
                ModelError::NonFiniteActivation(_) => EXIT_DIVERGED,
                ModelError::StaleTape => 1,
                _ => EXIT_USAGE,
            };
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return match e {
                TrainError::Diverged { .. } | TrainError::NonFiniteGradient { .. } => {
                    EXIT_DIVERGED
                }
                TrainError::Io(_) => EXIT_IO,
                TrainError::Model(m) => match m {
                    ModelError::Io(_) | ModelError::Format(_) => EXIT_IO,
                    ModelError::NonFiniteActivation(_) => EXIT_DIVERGED,
                    _ => EXIT_USAGE,
                },
                TrainError::Loss(_) => EXIT_DIVERGED,
                TrainError::EmptyDataset => EXIT_USAGE,
            };
        }
        if let Some(e) = cause.downcast_ref::<SynthError>() {
            return match e {
                SynthError::Io(_) | SynthError::Format(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<MetricsError>().is_some()
            || cause.downcast_ref::<PoseError>().is_some()
            || cause.downcast_ref::<LossError>().is_some()
        {
            return EXIT_USAGE;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    1
}
