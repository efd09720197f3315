use clap::Parser;

use graphldp_cli::args::Cli;
use graphldp_cli::{exit_code, run};

fn main() {
    if let Ok(threads) = std::env::var("GRAPHLDP_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t > 0 => {
                // Ignore a second initialization (tests may share a process).
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: GRAPHLDP_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
