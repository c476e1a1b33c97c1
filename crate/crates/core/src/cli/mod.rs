pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_str, Experiment, Overrides, RunConfig};
pub use run::{exit_code, run, RunManifest, MANIFEST, PARTIAL_MARKER};
