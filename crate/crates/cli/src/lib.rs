//! Scenario files, output writers and the subcommand runs behind the
//! `slabguide` binary.

pub mod error;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use run::{run, run_estimates, run_field, run_green, run_modes, run_perturb, run_picard, RunOutput};
pub use scenario::{RunKind, Scenario};
