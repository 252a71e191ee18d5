mod cli;
mod commands;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cli::{Cli, Command};
use commands::Ctx;

fn dispatch(cli: &Cli) -> provclass::Result<()> {
    let mut ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::Segment(a) => commands::segment(&ctx, a),
        Command::Classify(a) => commands::classify(&mut ctx, a),
        Command::Predict(a) => commands::predict(&mut ctx, a),
        Command::Run(a) => commands::run(&mut ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
        Command::Kappa(a) => commands::kappa(a),
        Command::Corpus(c) => commands::corpus_cmd(&ctx, c),
        Command::ExportFinetune(a) => commands::export_finetune(&ctx, a),
        Command::Keywords(c) => commands::keywords_cmd(c),
        Command::Taxonomy(c) => commands::taxonomy_cmd(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
