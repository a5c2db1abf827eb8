mod args;
mod commands;
mod failure;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use failure::{CliResult, ExitCode, Failure};

/// Caps rayon's global pool at `ICD_ATTN_THREADS` when set.
fn configure_threads() -> CliResult {
    let Ok(raw) = std::env::var("ICD_ATTN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("ICD_ATTN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: ExitCode::Internal,
            message: e.to_string(),
        })
}

fn run(cli: &Cli) -> CliResult {
    configure_threads()?;
    match &cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Neighbors(a) => commands::neighbors(a),
        Command::AttnTable(a) => commands::attn_table(a),
        Command::Ablate(a) => commands::ablate(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            std::process::exit(if ok { 0 } else { ExitCode::Usage as i32 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(f) = run(&cli) {
        eprintln!("error: {f}");
        std::process::exit(f.code as i32);
    }
}
