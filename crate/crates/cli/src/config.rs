//! Config files stand in for flags. Values from the file are spliced into the
//! argument list right after the subcommand, ahead of the user's own flags;
//! since every flag overrides earlier occurrences of itself, the command
//! line wins on conflict.
//!
//! ```toml
//! seed = 7            # every command that takes --seed
//!
//! [selfplay]
//! games = 2000
//! exploit_prob = 0.95
//!
//! [tournament]
//! mode = "synthesis"
//! ```

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

const SEEDED: &[&str] = &["init-model", "selfplay", "tutor", "compare", "tournament", "manifest"];

/// Renders one TOML value as `--key value` arguments.
pub fn push_flag(out: &mut Vec<OsString>, key: &str, value: &toml::Value) -> Result<(), CliError> {
    let flag = format!("--{}", key.replace('_', "-"));
    match value {
        toml::Value::String(s) => out.extend([flag.into(), s.into()]),
        toml::Value::Integer(i) => out.extend([flag.into(), i.to_string().into()]),
        toml::Value::Float(f) => out.extend([flag.into(), f.to_string().into()]),
        toml::Value::Boolean(true) => out.push(flag.into()),
        toml::Value::Boolean(false) => {}
        toml::Value::Array(items) => {
            for item in items {
                push_flag(out, key, item)?;
            }
        }
        other => {
            return Err(CliError::Usage(format!("value of `{key}` cannot be used as a flag: {other}")));
        }
    }
    Ok(())
}

fn config_path(argv: &[OsString]) -> Result<Option<&Path>, CliError> {
    let mut found = None;
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_str().unwrap_or_default();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            let value = argv
                .get(i + 1)
                .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            found = Some(Path::new(value));
            i += 1;
        } else if let Some(value) = arg.strip_prefix("--config=") {
            found = Some(Path::new(value));
        }
        i += 1;
    }
    Ok(found)
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_str().unwrap_or_default();
        if arg == "--config" {
            i += 2;
            continue;
        }
        if !arg.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Splices config-file values into `argv`.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Some(sub) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let command = argv[sub].to_str().unwrap_or_default().to_string();
    let mut flags = Vec::new();
    if let Some(seed) = table.get("seed") {
        if SEEDED.contains(&command.as_str()) {
            push_flag(&mut flags, "seed", seed)?;
        }
    }
    match table.get(&command) {
        Some(toml::Value::Table(section)) => {
            for (key, value) in section {
                push_flag(&mut flags, key, value)?;
            }
        }
        Some(_) => return Err(CliError::Usage(format!("{}: `{command}` must be a table", path.display()))),
        None => {}
    }
    let mut out = argv[..=sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}
