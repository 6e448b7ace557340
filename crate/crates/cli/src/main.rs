mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::Cli;
use commands::Failure;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage { subcommand, message }) => {
            let mut cmd = Cli::command();
            cmd.build();
            let sub = cmd
                .find_subcommand_mut(subcommand)
                .expect("usage errors name a real subcommand");
            sub.error(ErrorKind::MissingRequiredArgument, message).exit()
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
