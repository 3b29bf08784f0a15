//! Merging a TOML config file under the command line.
//!
//! Keys are long flag names of the chosen subcommand. A key only applies when
//! the flag was given neither on the command line nor through its `STEG_*`
//! variable; it is then appended to the argument list and everything is
//! parsed again, so config values go through the same validation as flags.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

use crate::args::Cli;
use crate::error::CliError;

pub fn parse_from<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let matches = Cli::command().try_get_matches_from(&argv)?;
    let extra = match config_args(&matches) {
        Ok(extra) => extra,
        Err(e) => {
            return Err(Cli::command().error(clap::error::ErrorKind::InvalidValue, e.to_string()))
        }
    };
    if extra.is_empty() {
        return Cli::from_arg_matches(&matches);
    }
    let mut full = argv;
    full.extend(extra.into_iter().map(OsString::from));
    let matches = Cli::command().try_get_matches_from(&full)?;
    Cli::from_arg_matches(&matches)
}

fn config_args(matches: &ArgMatches) -> Result<Vec<String>, CliError> {
    let Some((name, sub)) = matches.subcommand() else {
        return Ok(Vec::new());
    };
    let Some(path) = sub.get_one::<std::path::PathBuf>("config") else {
        return Ok(Vec::new());
    };
    let table = read_table(path)?;
    let root = Cli::command();
    let cmd = root
        .find_subcommand(name)
        .expect("matched subcommand exists");

    let mut extra = Vec::new();
    for (key, value) in table {
        let Some(arg) = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            let known = root.get_subcommands().any(|c| {
                c.get_arguments()
                    .any(|a| a.get_long() == Some(key.as_str()))
            });
            if known {
                continue;
            }
            return Err(CliError::usage(format!(
                "{}: unknown key {key:?}",
                path.display()
            )));
        };
        if key == "config" {
            continue;
        }
        if matches!(
            sub.value_source(arg.get_id().as_str()),
            Some(ValueSource::CommandLine | ValueSource::EnvVariable)
        ) {
            continue;
        }
        let items = match value {
            toml::Value::Array(items) => items,
            other => vec![other],
        };
        for item in items {
            match item {
                toml::Value::Boolean(true) => extra.push(format!("--{key}")),
                toml::Value::Boolean(false) => {}
                toml::Value::String(s) => extra.push(format!("--{key}={s}")),
                toml::Value::Integer(i) => extra.push(format!("--{key}={i}")),
                toml::Value::Float(f) => extra.push(format!("--{key}={f}")),
                other => {
                    return Err(CliError::usage(format!(
                        "{}: unsupported value for {key}: {other}",
                        path.display()
                    )))
                }
            }
        }
    }
    Ok(extra)
}

fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
