mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::{Failure, Session};

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain().find_map(|e| e.downcast_ref::<Failure>()).map_or(1, Failure::exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Status 2 is reserved for invalid networks.
            return ExitCode::from(if e.exit_code() == 0 { 0 } else { 1 });
        }
    };
    if let Some(t) = cli.opts.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("glass-entropy: {e}");
            return ExitCode::from(1);
        }
    }
    match Session::new(cli.command, cli.opts).run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glass-entropy: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
