mod args;
mod commands;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, OutputFormat};
use commands::Outcome;
use report::{CliError, RunReport};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FRACTAL_FORMS_LOG"))
        .format_timestamp(None)
        .init();

    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let started = Instant::now();
    match run(&cli) {
        Ok(outcome) => {
            let mismatch = outcome.mismatch.clone();
            emit(&cli, &argv[1..], outcome, started);
            match mismatch {
                Some(m) => {
                    eprintln!("error: verification mismatch: {m}");
                    ExitCode::from(4)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = e.hint() {
                eprintln!("hint: {h}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Runs the command. Export without `--out` prints its body here.
fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cat = commands::load_catalog(cli.catalog_dir.as_deref())?;
    match &cli.command {
        Command::List => Ok(commands::list(&cat)),
        Command::Solve { source, solver } => commands::solve(&commands::load_source(source, &cat)?, solver),
        Command::Resist { source, level, pair, set } => {
            commands::resist(&commands::load_source(source, &cat)?, *level, pair.as_deref(), set)
        }
        Command::Extend { source, level, values, set } => {
            commands::extend(&commands::load_source(source, &cat)?, *level, values, set)
        }
        Command::Verify { tol, seed } => commands::verify(&cat, *tol, *seed),
        Command::Export { source, level, format, out, set } => {
            let (body, outcome) = commands::export(&commands::load_source(source, &cat)?, *level, *format, set)?;
            match out {
                Some(path) => {
                    std::fs::write(path, &body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    Ok(outcome)
                }
                None => {
                    print!("{body}");
                    Ok(Outcome { text: String::new(), ..outcome })
                }
            }
        }
    }
}

fn emit(cli: &Cli, args: &[String], outcome: Outcome, started: Instant) {
    let writes_body = matches!(&cli.command, Command::Export { out: None, .. });
    let mut stdout = std::io::stdout().lock();
    match cli.output {
        OutputFormat::Json if !writes_body => {
            let report = RunReport {
                command: args.to_vec(),
                input_sha256: outcome.input_sha256,
                result: outcome.result,
                wall_time_s: started.elapsed().as_secs_f64(),
            };
            let _ = writeln!(stdout, "{}", report.to_json());
        }
        _ => {
            let _ = write!(stdout, "{}", outcome.text);
        }
    }
}
