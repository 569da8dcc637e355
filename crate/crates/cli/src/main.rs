mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// What a command produced: the main text, whether its check passed, and
/// any side files or notes.
pub struct Outcome {
    pub text: String,
    pub ok: bool,
    pub side_files: Vec<(std::path::PathBuf, String)>,
    pub note: Option<String>,
}

impl Outcome {
    pub fn ok(text: String) -> Self {
        Outcome { text, ok: true, side_files: Vec::new(), note: None }
    }

    pub fn checked(text: String, ok: bool) -> Self {
        Outcome { text, ok, side_files: Vec::new(), note: None }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(fmmlab::Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(e) => write!(f, "error: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<fmmlab::Error> for CliError {
    fn from(e: fmmlab::Error) -> Self {
        CliError::Input(e)
    }
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = commands::dispatch(&cli).and_then(|outcome| {
        for (path, text) in &outcome.side_files {
            write_file(path, text)?;
        }
        match &cli.out {
            Some(path) => write_file(path, &outcome.text)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(outcome.text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
        if let Some(note) = &outcome.note {
            eprintln!("{note}");
        }
        Ok(outcome.ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
