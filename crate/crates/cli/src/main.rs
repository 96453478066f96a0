use std::io::Write;
use std::process::ExitCode;

use seis_cli::{parse_config, run, CliError, RunConfig};

fn execute(cfg: &RunConfig) -> Result<Option<bool>, CliError> {
    let out = run(cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &out.body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.body.as_bytes());
        }
    }
    if !out.summary.is_empty() {
        eprintln!("{}", out.summary);
    }
    Ok(out.passed)
}

fn main() -> ExitCode {
    let result = parse_config(std::env::args_os()).and_then(|cfg| Ok((execute(&cfg)?, cfg.require_pass)));
    match result {
        Ok((Some(false), true)) => {
            eprintln!("certificate failed");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
