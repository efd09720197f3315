//! Library half of the binary: argument types, artifact formats and the
//! subcommand runners, exposed so integration tests can drive them and
//! parse their outputs without shelling out.

pub mod args;
pub mod artifacts;
pub mod commands;

use graphldp::GraphLdpError;

pub fn run(cli: args::Cli) -> anyhow::Result<()> {
    match &cli.command {
        args::Command::Gen(a) => commands::run_gen(a),
        args::Command::Empirical(a) => commands::run_empirical(a),
        args::Command::Entropy(a) => commands::run_entropy(a),
        args::Command::Ugwt(a) => commands::run_ugwt(a),
        args::Command::Project(a) => commands::run_project(a),
        args::Command::Diffuse(a) => commands::run_diffuse(a),
        args::Command::Verify(a) => commands::run_verify(a),
    }
}

/// Exit-code contract: 0 success, 2 validation (bad flags, bad files,
/// inconsistent parameters), 3 certification or budget failures (an
/// identity or certified bound did not hold, or work was refused).
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<GraphLdpError>() {
        Some(GraphLdpError::Validation(_)) | None => 2,
        Some(_) => 3,
    }
}
