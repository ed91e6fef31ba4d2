mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::{record_errors, ErrorSummary};

fn run(command: &Command) -> anyhow::Result<commands::Partial> {
    match command {
        Command::Segment(a) => commands::segment(a),
        Command::BpeTrain(a) => commands::bpe_train(a),
        Command::LmTrain(a) => commands::lm_train(a),
        Command::Surprisal(a) => commands::surprisal(a),
        Command::Regress(a) => commands::regress(a),
        Command::OracleCheck(a) => commands::oracle(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let name = cli.command.name();
    let (fatal, errors) = match run(&cli.command) {
        Ok(errors) => (None, errors),
        Err(e) => {
            eprintln!("error: {e:#}");
            (Some(format!("{e:#}")), Vec::new())
        }
    };
    for e in &errors {
        eprintln!("error: {e}");
    }
    let failed = fatal.is_some() || !errors.is_empty();
    if let Err(e) = record_errors(cli.command.out(), &ErrorSummary { command: name, fatal, errors: &errors }) {
        eprintln!("error: could not write error summary: {e:#}");
    }
    if failed {
        if !errors.is_empty() {
            eprintln!("{} of the results failed; see {}", errors.len(), cli.command.out().join(output::ERROR_SUMMARY).display());
        }
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
