use std::process::ExitCode;

use clap::Parser;

use invforge_cli::{dispatch, exit_code, Cli};

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("INVFORGE_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build_global()
                .ok();
        }
    }
    let cli = Cli::parse();
    let outcome = dispatch(&cli);
    if let Err(e) = &outcome {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(exit_code(&outcome))
}
