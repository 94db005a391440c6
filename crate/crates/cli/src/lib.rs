//! Library half of the `lee2d` binary: configuration, flag parsing and the
//! subcommand implementations, exposed so tests can drive them in-process.

pub mod args;
pub mod commands;
pub mod config;

use config::{Config, ConfigErrors, Format};
use std::io::Write;

/// Failures mapped onto the exit-code taxonomy.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(ConfigErrors),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Model(#[from] lee2d::Error),
    /// A tolerance or checked inequality failed; the artifact was still
    /// written.
    #[error("{0}")]
    Check(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Model(e) => match e {
                lee2d::Error::Accuracy { .. } => 4,
                _ => 3,
            },
            CliError::Check(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<lee2d_sweep::SweepError> for CliError {
    fn from(e: lee2d_sweep::SweepError) -> Self {
        match e {
            lee2d_sweep::SweepError::Config(m) => CliError::Usage(m),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// Rendered artifact of one subcommand.
pub enum Artifact {
    Csv {
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    },
    Json(serde_json::Value),
    /// Both renderings available; the config picks one.
    Either {
        csv: Box<Artifact>,
        json: Box<Artifact>,
        default: Format,
    },
}

impl Artifact {
    pub fn render(&self, format: Option<Format>) -> Result<String, CliError> {
        match self {
            Artifact::Csv { header, rows } => {
                if format == Some(Format::Json) {
                    return Err(CliError::Usage("this subcommand only writes csv".into()));
                }
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(header)?;
                for r in rows {
                    w.write_record(r)?;
                }
                let bytes = w
                    .into_inner()
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
            }
            Artifact::Json(v) => {
                if format == Some(Format::Csv) {
                    return Err(CliError::Usage("this subcommand only writes json".into()));
                }
                Ok(serde_json::to_string_pretty(v)? + "\n")
            }
            Artifact::Either { csv, json, default } => match format.unwrap_or(*default) {
                Format::Csv => csv.render(Some(Format::Csv)),
                Format::Json => json.render(Some(Format::Json)),
            },
        }
    }
}

/// Writes the artifact to the configured path, or to `out`.
pub fn emit<W: Write>(cfg: &Config, artifact: &Artifact, out: &mut W) -> Result<(), CliError> {
    let text = artifact.render(cfg.format)?;
    match &cfg.path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Loads the config file (if any), applies flag overrides and validates.
pub fn load_config(global: &args::GlobalArgs) -> Result<Config, CliError> {
    let text = match &global.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    config::load(&text, global.overrides()).map_err(CliError::Config)
}

/// Parses the command line, runs the subcommand, writes its artifact to
/// `out` (or the configured file) and returns the exit code.
pub fn run<W: Write, E: Write>(argv: &[String], out: &mut W, err: &mut E) -> i32 {
    use clap::Parser;
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch<W: Write>(cli: &args::Cli, out: &mut W) -> Result<(), CliError> {
    let cfg = load_config(&cli.global)?;
    commands::execute(&cli.command, &cfg, out)
}
